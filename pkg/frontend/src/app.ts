/**
 * Single-page wiring: one hash route per screen, one in-flight mutation per
 * user action, and a polling loop independent of user actions. All domain
 * truth lives server-side; reloading the page keeps only the worker token.
 */

import { GatewayClient, GatewayError } from "./api";
import { EventFeed } from "./poller";
import { WorkerSession } from "./session";
import { BoardController, renderBoard } from "./views/board";
import { DeskController, renderDesk } from "./views/desk";
import { ReviewController, renderReview } from "./views/review";
import { MonitorController, renderMonitor } from "./views/monitor";

const BASE = (window as unknown as { CROWDFLOW_BASE?: string }).CROWDFLOW_BASE ?? "";

const session = new WorkerSession(window.localStorage);
const workerClient = new GatewayClient(BASE, session.token);
const ownerClient = new GatewayClient(BASE);

const board = new BoardController(workerClient);
const desk = new DeskController(workerClient);
const review = new ReviewController(ownerClient);
const ownerFeed = new EventFeed(ownerClient, 1000);
const monitor = new MonitorController(ownerClient, ownerFeed);

function $(selector: string): HTMLElement {
  const node = document.querySelector(selector);
  if (!node) throw new Error(`missing element ${selector}`);
  return node as HTMLElement;
}

function banner(text: string, ok = false): void {
  const el = $("#banner");
  el.textContent = text;
  el.className = ok ? "banner ok" : "banner error";
  el.hidden = !text;
}

async function showBoard(): Promise<void> {
  await board.refresh();
  $("#view").innerHTML = renderBoard(board.tasks, session.token !== null);
  if (board.lastError) banner(board.lastError);
}

function showDesk(): void {
  $("#view").innerHTML = renderDesk(desk.rows);
}

function showReview(): void {
  $("#view").innerHTML = `
    <form id="review-load" class="card">
      <input id="review-instance" placeholder="instance id" required>
      <input id="review-activity" placeholder="activity id" required>
      <input id="review-limit" type="number" value="1" min="1">
      <input id="owner-token" placeholder="owner bearer token" required>
      <button>Load submissions</button>
    </form>
    <div id="review-body">${renderReview(review.state)}</div>`;
}

function showMonitor(): void {
  $("#view").innerHTML = `
    <form id="monitor-load" class="card">
      <input id="monitor-instance" placeholder="instance id" required>
      <input id="monitor-token" placeholder="owner bearer token" required>
      <button>Watch</button>
    </form>
    <div id="monitor-body">${renderMonitor(monitor.snapshot, monitor.feedLog)}</div>`;
}

const routes: Record<string, () => void | Promise<void>> = {
  "#/board": showBoard,
  "#/desk": showDesk,
  "#/review": showReview,
  "#/monitor": showMonitor,
};

async function route(): Promise<void> {
  banner("");
  const show = routes[window.location.hash] ?? showBoard;
  await show();
}

async function registerWorker(name: string, contact: string): Promise<void> {
  try {
    const worker = await workerClient.register(name, contact);
    session.save(worker.token);
    workerClient.setToken(worker.token);
    banner(`Registered as ${worker.user_id}. You can claim tasks now.`, true);
  } catch (error) {
    banner(error instanceof GatewayError ? error.code : String(error));
  }
}

document.addEventListener("submit", (raw) => {
  const form = raw.target as HTMLFormElement;
  raw.preventDefault();
  if (form.id === "register-form") {
    void registerWorker(
      (form.querySelector("#reg-name") as HTMLInputElement).value,
      (form.querySelector("#reg-contact") as HTMLInputElement).value,
    ).then(route);
  } else if (form.id === "review-load") {
    ownerClient.setToken(($("#owner-token") as HTMLInputElement).value);
    void review
      .load(
        ($("#review-instance") as HTMLInputElement).value,
        ($("#review-activity") as HTMLInputElement).value,
        Number(($("#review-limit") as HTMLInputElement).value || "1"),
      )
      .then(() => {
        $("#review-body").innerHTML = renderReview(review.state);
      })
      .catch((error) => banner(error instanceof GatewayError ? error.code : String(error)));
  } else if (form.id === "monitor-load") {
    ownerClient.setToken(($("#monitor-token") as HTMLInputElement).value);
    void monitor
      .watch(($("#monitor-instance") as HTMLInputElement).value)
      .then(() => {
        ownerFeed.start();
        setInterval(() => {
          if (window.location.hash === "#/monitor") {
            $("#monitor-body").innerHTML = renderMonitor(monitor.snapshot, monitor.feedLog);
          }
        }, 1000);
      })
      .catch((error) => banner(error instanceof GatewayError ? error.code : String(error)));
  }
});

document.addEventListener("click", (raw) => {
  const target = raw.target as HTMLElement;
  if (target.matches("button.claim")) {
    const itemId = target.dataset.item as string;
    void board.claim(itemId).then(async (outcome) => {
      if (outcome.ok && outcome.executionId) {
        const copy = { execution_id: outcome.executionId, worker: session.token ?? "",
                       state: "ACTIVE", claimed_at: 0, finished_at: null, submission: null };
        desk.track(itemId, copy);
        banner(`Claimed ${itemId} as ${outcome.executionId}.`, true);
      } else {
        banner(outcome.errorCode ?? "claim failed");
      }
      await route();
    });
  } else if (target.matches("button.submit")) {
    const executionId = target.dataset.exec as string;
    const box = document.querySelector(`textarea.payload[data-exec="${executionId}"]`);
    const payload = { text: (box as HTMLTextAreaElement | null)?.value ?? "" };
    void desk.submit(executionId, payload).then(showDesk);
  } else if (target.matches("button.abandon")) {
    const executionId = target.dataset.exec as string;
    void desk.abandon(executionId).then(showDesk);
  } else if (target.matches("input.pick")) {
    const executionId = target.dataset.exec as string;
    const allowed = review.state.model.toggle(executionId);
    if (!allowed) raw.preventDefault(); // picker blocks the k+1-th pick
    $("#review-body").innerHTML = renderReview(review.state);
  } else if (target.matches("button.post-selection")) {
    void review
      .post(($("#review-instance") as HTMLInputElement).value,
            ($("#review-activity") as HTMLInputElement).value)
      .then(() => {
        $("#review-body").innerHTML = renderReview(review.state);
      });
  }
});

window.addEventListener("hashchange", () => void route());
window.addEventListener("DOMContentLoaded", () => {
  setInterval(() => {
    if (window.location.hash === "#/board" || window.location.hash === "") void showBoard();
  }, 2000);
  void route();
});
