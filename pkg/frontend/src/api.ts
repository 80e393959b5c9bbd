/**
 * Typed client for the crowdflow gateway. Every user action in the UI maps to
 * exactly one call here, and server rejections surface verbatim as
 * GatewayError with the machine-readable code from the response body.
 */

export interface PublicTask {
  item_id: string;
  instance_id: string;
  activity_id: string;
  kind: string;
  description: string;
  instructions: string;
  reward: string;
  deadline: number;
  state: string;
  claims: number;
  created_at: number;
}

export interface ExecutionCopy {
  execution_id: string;
  worker: string;
  state: string;
  claimed_at: number;
  finished_at: number | null;
  submission: Submission | null;
}

export interface Submission {
  execution_id: string;
  payload: unknown;
  submitted_at: number;
  accepted: boolean | null;
}

export interface SessionView {
  instance_id: string;
  activity_id: string;
  opened_at: number;
  deadline: number;
  status: string;
  executions: ExecutionCopy[];
  extensions_used: number;
  outcome: string | null;
}

export interface ActivityView {
  activity_id: string;
  state: string;
  assignee: string | null;
  result: unknown;
}

export interface InstanceSnapshot {
  instance: {
    id: string;
    definition_id: string;
    state: string;
    activities: Record<string, ActivityView>;
    data: Record<string, unknown>;
  };
  sessions: Record<string, SessionView>;
}

export interface GatewayEvent {
  seq: number;
  at: number;
  kind: string;
  instance_id: string | null;
  payload: Record<string, unknown>;
}

export interface RegisteredWorker {
  user_id: string;
  token: string;
  display_name: string | null;
  consent_expiry: number;
}

export interface AggregateResult {
  accepted: string[];
  submissions: Submission[];
}

export class GatewayError extends Error {
  constructor(
    public readonly code: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
    this.name = "GatewayError";
  }
}

export class GatewayClient {
  constructor(
    private readonly base: string,
    private token: string | null = null,
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const response = await fetch(this.base + path, {
      method,
      headers,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const text = await response.text();
    const doc = text ? JSON.parse(text) : null;
    if (!response.ok) {
      const code = doc?.error ?? `HTTP_${response.status}`;
      throw new GatewayError(code, doc?.message ?? response.statusText, response.status);
    }
    return doc as T;
  }

  health(): Promise<{ status: string; now: number; last_seq: number }> {
    return this.request("GET", "/health");
  }

  publicTasks(): Promise<{ items: PublicTask[] }> {
    return this.request("GET", "/public/tasks");
  }

  register(displayName: string, contact: string): Promise<RegisteredWorker> {
    return this.request("POST", "/users/register", {
      display_name: displayName,
      contact,
    });
  }

  claim(itemId: string): Promise<ExecutionCopy> {
    return this.request("POST", `/public/tasks/${itemId}/claim`);
  }

  submit(itemId: string, executionId: string, payload: unknown): Promise<Submission> {
    return this.request("POST", `/public/tasks/${itemId}/submissions/${executionId}`, {
      payload,
    });
  }

  abandon(itemId: string, executionId: string): Promise<ExecutionCopy> {
    return this.request("POST", `/public/tasks/${itemId}/abandon/${executionId}`);
  }

  instance(instanceId: string): Promise<InstanceSnapshot> {
    return this.request("GET", `/instances/${instanceId}`);
  }

  events(fromSeq: number): Promise<{ events: GatewayEvent[]; last_seq: number }> {
    return this.request("GET", `/events?from=${fromSeq}`);
  }

  aggregate(instanceId: string, activityId: string, selection: string[]): Promise<AggregateResult> {
    return this.request("POST", `/instances/${instanceId}/activities/${activityId}/aggregate`, {
      selection,
    });
  }

  // test/seed helpers used by owner tooling, not by worker screens
  uploadDefinition(doc: unknown): Promise<{ id: string }> {
    return this.request("POST", "/definitions", doc);
  }

  startInstance(definitionId: string): Promise<InstanceSnapshot> {
    return this.request("POST", "/instances", { definition_id: definitionId });
  }

  beginActivity(instanceId: string, activityId: string): Promise<ActivityView> {
    return this.request("POST", `/instances/${instanceId}/activities/${activityId}/begin`, {});
  }

  completeActivity(instanceId: string, activityId: string, result: unknown): Promise<unknown> {
    return this.request("POST", `/instances/${instanceId}/activities/${activityId}/complete`, {
      result,
    });
  }

  advanceClock(to: number): Promise<{ now: number }> {
    return this.request("POST", "/clock/advance", { to });
  }
}
