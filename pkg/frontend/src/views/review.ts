/**
 * Owner review: after a crowdsourcing session closes COMPLETE, the owner
 * inspects the submissions and picks up to k winners. The picker blocks the
 * k+1-th pick client-side; the server enforces the same bound and its
 * INVALID_SELECTION rejection is rendered with the offending ids.
 */

import { GatewayClient, GatewayError, SessionView, Submission } from "../api";
import { escapeHtml } from "./board";

export class SelectionModel {
  private picked = new Set<string>();
  posted = false;

  constructor(readonly limit: number) {}

  get selection(): string[] {
    return [...this.picked].sort();
  }

  has(executionId: string): boolean {
    return this.picked.has(executionId);
  }

  /** Returns false when the pick is blocked (limit reached or already posted). */
  toggle(executionId: string): boolean {
    if (this.posted) return false;
    if (this.picked.has(executionId)) {
      this.picked.delete(executionId);
      return true;
    }
    if (this.picked.size >= this.limit) return false;
    this.picked.add(executionId);
    return true;
  }
}

export interface ReviewState {
  session: SessionView | null;
  model: SelectionModel;
  error: string | null;
  accepted: string[] | null;
}

export function submissionsOf(session: SessionView): Submission[] {
  return session.executions
    .filter((c) => c.submission !== null)
    .map((c) => c.submission as Submission)
    .sort((a, b) => a.submitted_at - b.submitted_at || a.execution_id.localeCompare(b.execution_id));
}

export function renderReview(state: ReviewState): string {
  const session = state.session;
  if (!session) {
    return `<div class="empty">Load a closed instance to review its submissions.</div>`;
  }
  if (session.status !== "CLOSED") {
    return `<div class="banner">Session still ${session.status}; review opens at the deadline.</div>`;
  }
  const submissions = submissionsOf(session);
  if (submissions.length === 0) {
    return `<div class="empty">Session closed ${session.outcome}: nobody took this task, nothing to review.</div>`;
  }
  const rows = submissions.map((submission) => `
    <label class="card submission ${state.model.has(submission.execution_id) ? "picked" : ""}">
      <input type="checkbox" class="pick" data-exec="${submission.execution_id}"
             ${state.model.has(submission.execution_id) ? "checked" : ""}
             ${state.model.posted ? "disabled" : ""}>
      <code>${submission.execution_id}</code> at t=${submission.submitted_at}
      <pre>${escapeHtml(JSON.stringify(submission.payload))}</pre>
      ${submission.accepted === true ? `<span class="badge ok">accepted</span>` : ""}
      ${submission.accepted === false ? `<span class="badge">passed over</span>` : ""}
    </label>`);
  return `
    ${state.error ? `<div class="banner error">${escapeHtml(state.error)}</div>` : ""}
    ${rows.join("\n")}
    <button class="post-selection" ${state.model.posted ? "disabled" : ""}>
      Accept ${state.model.selection.length} of up to ${state.model.limit}
    </button>
    ${state.accepted ? `<div class="banner ok">Accepted: ${state.accepted.join(", ")}</div>` : ""}`;
}

export class ReviewController {
  state: ReviewState = { session: null, model: new SelectionModel(1), error: null, accepted: null };

  constructor(private readonly client: GatewayClient) {}

  async load(instanceId: string, activityId: string, limit: number): Promise<void> {
    const snapshot = await this.client.instance(instanceId);
    this.state = {
      session: snapshot.sessions[activityId] ?? null,
      model: new SelectionModel(limit),
      error: null,
      accepted: null,
    };
  }

  async post(instanceId: string, activityId: string): Promise<boolean> {
    try {
      const result = await this.client.aggregate(instanceId, activityId, this.state.model.selection);
      this.state.accepted = result.accepted;
      this.state.model.posted = true; // picker locks after acceptance
      this.state.error = null;
      return true;
    } catch (error) {
      if (error instanceof GatewayError) {
        this.state.error = `${error.code}: ${error.message}`;
        return false;
      }
      throw error;
    }
  }
}
