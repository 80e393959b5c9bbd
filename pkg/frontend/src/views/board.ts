/**
 * Public board: the open crowdsourcing tasks, browsable anonymously.
 * Claiming requires a registered worker token. Tasks stay on the board no
 * matter how many workers claimed them; they vanish when the session closes.
 */

import { GatewayClient, GatewayError, PublicTask } from "../api";

export function renderBoard(tasks: PublicTask[], registered: boolean): string {
  if (tasks.length === 0) {
    return `<div class="empty">No open tasks right now. New crowd work appears here the moment a session opens.</div>`;
  }
  const rows = tasks.map((task) => `
    <article class="card task" data-item="${task.item_id}">
      <header>
        <h3>${escapeHtml(task.description || task.activity_id)}</h3>
        <span class="badge">${task.claims} working</span>
      </header>
      <p class="instructions">${escapeHtml(task.instructions)}</p>
      <dl>
        <dt>Deadline</dt><dd>t=${task.deadline}</dd>
        <dt>Reward</dt><dd>${escapeHtml(task.reward)}</dd>
      </dl>
      <button class="claim" data-item="${task.item_id}" ${registered ? "" : "disabled"}>
        ${registered ? "Claim this task" : "Register to claim"}
      </button>
    </article>`);
  return rows.join("\n");
}

export interface ClaimOutcome {
  ok: boolean;
  executionId?: string;
  errorCode?: string;
}

export class BoardController {
  tasks: PublicTask[] = [];
  lastError: string | null = null;

  constructor(private readonly client: GatewayClient) {}

  async refresh(): Promise<PublicTask[]> {
    this.tasks = (await this.client.publicTasks()).items;
    return this.tasks;
  }

  async claim(itemId: string): Promise<ClaimOutcome> {
    try {
      const copy = await this.client.claim(itemId);
      this.lastError = null;
      return { ok: true, executionId: copy.execution_id };
    } catch (error) {
      if (error instanceof GatewayError) {
        // SESSION_CLOSED, CAPACITY_REACHED, DUPLICATE_ACTIVE_CLAIM render
        // as banners with the server's own code
        this.lastError = error.code;
        return { ok: false, errorCode: error.code };
      }
      throw error;
    }
  }
}

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}
