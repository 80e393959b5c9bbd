/**
 * Worker desk: the claims this worker made in this browsing session, with
 * submit and abandon controls. Every row is the latest gateway response for
 * that execution copy; the gateway offers no "my claims" listing, so a reload
 * starts the desk empty (only the auth token survives reloads).
 */

import { ExecutionCopy, GatewayClient, GatewayError } from "../api";
import { escapeHtml } from "./board";

export interface DeskRow {
  itemId: string;
  copy: ExecutionCopy;
  note: string | null; // last server error code for this row, if any
}

export function renderDesk(rows: DeskRow[]): string {
  if (rows.length === 0) {
    return `<div class="empty">Nothing claimed yet. Claim a task on the board and it appears here.</div>`;
  }
  return rows.map((row) => `
    <article class="card claim-row" data-exec="${row.copy.execution_id}">
      <header>
        <h3>${escapeHtml(row.itemId)}</h3>
        <span class="badge state-${row.copy.state.toLowerCase()}">${row.copy.state}</span>
      </header>
      ${row.note ? `<div class="banner error">${escapeHtml(row.note)}</div>` : ""}
      ${row.copy.state === "ACTIVE" ? `
      <textarea class="payload" data-exec="${row.copy.execution_id}" placeholder="Your result"></textarea>
      <button class="submit" data-exec="${row.copy.execution_id}">Submit</button>
      <button class="abandon" data-exec="${row.copy.execution_id}">Abandon</button>` : ""}
    </article>`).join("\n");
}

export class DeskController {
  rows: DeskRow[] = [];

  constructor(private readonly client: GatewayClient) {}

  track(itemId: string, copy: ExecutionCopy): void {
    this.rows.push({ itemId, copy, note: null });
  }

  private row(executionId: string): DeskRow | undefined {
    return this.rows.find((r) => r.copy.execution_id === executionId);
  }

  async submit(executionId: string, payload: unknown): Promise<boolean> {
    const row = this.row(executionId);
    if (!row) return false;
    try {
      const submission = await this.client.submit(row.itemId, executionId, payload);
      row.copy = { ...row.copy, state: "COMPLETED", submission };
      row.note = null;
      return true;
    } catch (error) {
      if (error instanceof GatewayError) {
        row.note = error.code; // e.g. SESSION_CLOSED when the deadline won
        return false;
      }
      throw error;
    }
  }

  async abandon(executionId: string): Promise<boolean> {
    const row = this.row(executionId);
    if (!row) return false;
    try {
      row.copy = await this.client.abandon(row.itemId, executionId);
      row.note = null;
      return true;
    } catch (error) {
      if (error instanceof GatewayError) {
        row.note = error.code;
        return false;
      }
      throw error;
    }
  }
}
