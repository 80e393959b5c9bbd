/**
 * Instance monitor: live view of one process instance - activity states,
 * execution-copy counters per crowdsourcing session, and the event feed.
 * The feed drives refresh: any event touching the instance triggers a
 * snapshot re-fetch, so the rendered states always come straight from the
 * gateway, and counters move without a reload.
 */

import { GatewayClient, GatewayEvent, InstanceSnapshot } from "../api";
import { EventFeed } from "../poller";
import { escapeHtml } from "./board";

export function renderMonitor(snapshot: InstanceSnapshot | null, feed: GatewayEvent[]): string {
  if (!snapshot) {
    return `<div class="empty">Enter an instance id to watch it live.</div>`;
  }
  const inst = snapshot.instance;
  const activities = Object.values(inst.activities).map((activity) => {
    const session = snapshot.sessions[activity.activity_id];
    const copies = session
      ? `<span class="badge">${session.executions.length} copies, ${session.status}</span>`
      : "";
    return `<li class="activity state-${activity.state.toLowerCase()}">
      <code>${activity.activity_id}</code> ${activity.state} ${copies}</li>`;
  });
  const feedRows = feed.slice(-40).map((event) => `
    <li><code>#${event.seq}</code> t=${event.at} ${event.kind}
        ${escapeHtml(String(event.payload["activity_id"] ?? ""))}</li>`);
  return `
    <section class="card">
      <h3>${inst.id} (${inst.definition_id}) - ${inst.state}</h3>
      <ul class="activities">${activities.join("\n")}</ul>
    </section>
    <section class="card">
      <h3>Event feed</h3>
      <ul class="feed">${feedRows.join("\n")}</ul>
    </section>`;
}

export class MonitorController {
  snapshot: InstanceSnapshot | null = null;
  feedLog: GatewayEvent[] = [];

  constructor(
    private readonly client: GatewayClient,
    readonly feed: EventFeed,
  ) {}

  async watch(instanceId: string): Promise<void> {
    this.snapshot = await this.client.instance(instanceId);
    this.feed.onEvent((event) => {
      this.feedLog.push(event);
      if (event.instance_id === instanceId) {
        void this.client.instance(instanceId).then((snap) => (this.snapshot = snap));
      }
    });
  }
}
