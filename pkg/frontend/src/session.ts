/**
 * Browser-side session: the only thing that survives a reload is the worker's
 * bearer token (the user id issued at registration). Identification data
 * stays server-side under the retention rules.
 */

const WORKER_TOKEN_KEY = "crowdflow.worker.token";

export interface Storage {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

export class WorkerSession {
  constructor(private readonly storage: Storage) {}

  get token(): string | null {
    return this.storage.getItem(WORKER_TOKEN_KEY);
  }

  save(token: string): void {
    this.storage.setItem(WORKER_TOKEN_KEY, token);
  }

  clear(): void {
    this.storage.removeItem(WORKER_TOKEN_KEY);
  }
}
