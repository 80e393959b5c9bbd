/**
 * Event feed with a seq cursor.
 *
 * The client owns the cursor: every poll asks the gateway for events from
 * lastSeq + 1, so a dropped connection simply resumes from the cursor - no
 * duplicates, no holes. A server response that skips ahead anyway (which
 * would mean a truncated log) is surfaced as a feed error rather than
 * silently accepted.
 */

import { GatewayEvent } from "./api";

export type FeedListener = (event: GatewayEvent) => void;

/** The one gateway capability the feed needs. */
export interface EventSource {
  events(fromSeq: number): Promise<{ events: GatewayEvent[]; last_seq: number }>;
}

export class FeedGapError extends Error {
  constructor(expected: number, got: number) {
    super(`event feed gap: expected seq ${expected}, got ${got}`);
    this.name = "FeedGapError";
  }
}

export class EventFeed {
  private lastSeq = 0;
  private listeners: FeedListener[] = [];
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly client: EventSource,
    private readonly intervalMs = 1000,
  ) {}

  get cursor(): number {
    return this.lastSeq;
  }

  onEvent(listener: FeedListener): void {
    this.listeners.push(listener);
  }

  /** One poll cycle; returns the events newly delivered to listeners. */
  async poll(): Promise<GatewayEvent[]> {
    const batch = await this.client.events(this.lastSeq + 1);
    const fresh: GatewayEvent[] = [];
    for (const event of batch.events) {
      if (event.seq <= this.lastSeq) continue; // duplicate from a retried poll
      if (event.seq !== this.lastSeq + 1) {
        throw new FeedGapError(this.lastSeq + 1, event.seq);
      }
      this.lastSeq = event.seq;
      fresh.push(event);
      for (const listener of this.listeners) listener(event);
    }
    return fresh;
  }

  /** Poll, swallowing transport failures; the cursor survives and the next
   * call resumes where this one left off. */
  async pollSafe(): Promise<GatewayEvent[]> {
    try {
      return await this.poll();
    } catch (error) {
      if (error instanceof FeedGapError) throw error;
      return []; // transport failure: resume on the next tick
    }
  }

  start(): void {
    if (this.timer) return;
    this.timer = setInterval(() => void this.pollSafe(), this.intervalMs);
  }

  stop(): void {
    if (this.timer) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
