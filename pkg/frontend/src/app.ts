// Review queue application: wires the API client, the pure queue logic,
// and the durable outbox to the page. The service stays the single
// source of truth; this file only renders its state and posts verdicts.

import { ReviewApi } from "./api.js";
import { drainOutbox } from "./deliver.js";
import { Outbox, backoffMs } from "./outbox.js";
import {
  applyFilters,
  clampCursor,
  defaultFilters,
  formatConfidence,
  labelName,
  parsePercent,
  withVerdict,
} from "./queue.js";
import type { Candidate, Stats, Verdict } from "./types.js";

// State
const api = new ReviewApi("");
const outbox = new Outbox(window.localStorage);
let candidates: Candidate[] = [];
let stats: Stats = { total: 0, pending: 0, accepted: 0, rejected: 0 };
const filters = defaultFilters();
let cursor = 0;
let pumping = false;
let retryTimer: number | null = null;
const refusals: string[] = [];

// DOM elements
const reviewerInput = document.getElementById("reviewer") as HTMLInputElement;
const outboxBadge = document.getElementById("outbox-badge")!;
const segAccepted = document.getElementById("seg-accepted")!;
const segRejected = document.getElementById("seg-rejected")!;
const segPending = document.getElementById("seg-pending")!;
const progressCounts = document.getElementById("progress-counts")!;
const errorBanner = document.getElementById("error-banner")!;
const filterLabel = document.getElementById("filter-label") as HTMLSelectElement;
const filterStatus = document.getElementById("filter-status") as HTMLSelectElement;
const confMin = document.getElementById("conf-min") as HTMLInputElement;
const confMax = document.getElementById("conf-max") as HTMLInputElement;
const queuePos = document.getElementById("queue-pos")!;
const card = document.getElementById("card")!;
const complete = document.getElementById("complete")!;
const candImage = document.getElementById("cand-image") as HTMLImageElement;
const imageMissing = document.getElementById("image-missing")!;
const candText = document.getElementById("cand-text")!;
const candId = document.getElementById("cand-id")!;
const candConf = document.getElementById("cand-conf")!;
const candLabel = document.getElementById("cand-label")!;
const candVerdict = document.getElementById("cand-verdict")!;

function chip(text: string, kind: string): string {
  return `<span class="chip chip-${kind}">${text}</span>`;
}

function render(): void {
  const queue = applyFilters(candidates, filters);
  cursor = clampCursor(queue.length, cursor);

  const total = Math.max(stats.total, 1);
  segAccepted.style.width = `${(100 * stats.accepted) / total}%`;
  segRejected.style.width = `${(100 * stats.rejected) / total}%`;
  segPending.style.width = `${(100 * stats.pending) / total}%`;
  progressCounts.textContent =
    `${stats.accepted} accepted / ${stats.rejected} rejected / ` +
    `${stats.pending} pending of ${stats.total}`;

  outboxBadge.hidden = outbox.size === 0;
  outboxBadge.textContent = `${outbox.size} unsaved`;

  errorBanner.hidden = refusals.length === 0;
  errorBanner.textContent = refusals.join("\n");

  if (cursor < 0) {
    card.hidden = true;
    complete.hidden = false;
    queuePos.textContent = "queue empty";
    return;
  }
  card.hidden = false;
  complete.hidden = true;
  queuePos.textContent = `candidate ${cursor + 1} of ${queue.length}`;

  const cand = queue[cursor]!;
  candImage.hidden = false;
  imageMissing.hidden = true;
  candImage.src = cand.image_url;
  candText.textContent = cand.text;
  candId.textContent = `#${cand.id}`;
  candConf.textContent = formatConfidence(cand.confidence);
  candLabel.innerHTML = chip(labelName(cand.assigned_label), labelName(cand.assigned_label));
  candVerdict.innerHTML = chip(cand.status, cand.status);
}

function currentCandidate(): Candidate | null {
  const queue = applyFilters(candidates, filters);
  const index = clampCursor(queue.length, cursor);
  return index < 0 ? null : queue[index]!;
}

function move(step: number): void {
  const queue = applyFilters(candidates, filters);
  if (queue.length === 0) return;
  cursor = clampCursor(queue.length, cursor + step);
  render();
}

function decide(verdict: Verdict): void {
  const cand = currentCandidate();
  if (cand === null) return;

  // optimistic local update; reconciled against every service response
  const wasPending = cand.status === "pending";
  candidates = withVerdict(candidates, cand.id, verdict);
  if (wasPending) {
    stats = {
      ...stats,
      pending: stats.pending - 1,
      [verdict]: stats[verdict] + 1,
    } as Stats;
  } else if (cand.status !== verdict) {
    stats = {
      ...stats,
      [cand.status]: stats[cand.status as Verdict] - 1,
      [verdict]: stats[verdict] + 1,
    } as Stats;
  }
  outbox.push(cand.id, verdict, reviewerInput.value.trim() || "reviewer");

  // under the pending filter the decided card leaves the queue by itself;
  // otherwise step forward past it
  if (filters.status !== "pending") cursor += 1;
  render();
  void pump();
}

async function pump(): Promise<void> {
  if (pumping) return;
  pumping = true;
  try {
    const outcome = await drainOutbox(outbox, api, {
      onAck: (ack) => {
        stats = ack.stats;
        render();
      },
      onRefused: (decision, err) => {
        // the service refused this decision; surface it and resync so
        // the UI shows the service's view again
        refusals.push(`decision for #${decision.candidateId} refused: ${err.message}`);
        void refresh();
      },
    });
    if (outcome === "unreachable") {
      scheduleRetry(backoffMs(outbox.peek()?.attempts ?? 0));
    }
  } finally {
    pumping = false;
    render();
  }
}

function scheduleRetry(delay: number): void {
  if (retryTimer !== null) return;
  retryTimer = window.setTimeout(() => {
    retryTimer = null;
    void pump();
  }, delay);
}

async function refresh(): Promise<void> {
  const [nextStats, all] = await Promise.all([api.stats(), api.allCandidates()]);
  stats = nextStats;
  candidates = all;
  render();
}

function onKey(event: KeyboardEvent): void {
  const target = event.target as HTMLElement | null;
  if (target !== null && ["INPUT", "SELECT", "TEXTAREA"].includes(target.tagName)) return;
  if (event.key === "a") decide("accepted");
  else if (event.key === "r") decide("rejected");
  else if (event.key === "ArrowRight" || event.key === "n") move(1);
  else if (event.key === "ArrowLeft" || event.key === "p") move(-1);
  else return;
  event.preventDefault();
}

function onFilterChange(): void {
  const label = filterLabel.value;
  filters.label = label === "all" ? "all" : (Number(label) as 0 | 1);
  filters.status = filterStatus.value as typeof filters.status;
  filters.minConfidence = parsePercent(confMin.value, 0);
  filters.maxConfidence = parsePercent(confMax.value, 1);
  cursor = 0;
  render();
}

document.getElementById("btn-accept")!.addEventListener("click", () => decide("accepted"));
document.getElementById("btn-reject")!.addEventListener("click", () => decide("rejected"));
document.getElementById("btn-prev")!.addEventListener("click", () => move(-1));
document.getElementById("btn-next")!.addEventListener("click", () => move(1));
for (const control of [filterLabel, filterStatus, confMin, confMax]) {
  control.addEventListener("change", onFilterChange);
}
document.addEventListener("keydown", onKey);
candImage.addEventListener("error", () => {
  candImage.hidden = true;
  imageMissing.hidden = false;
});

const savedReviewer = window.localStorage.getItem("memefusion-reviewer");
if (savedReviewer !== null) reviewerInput.value = savedReviewer;
reviewerInput.addEventListener("change", () => {
  window.localStorage.setItem("memefusion-reviewer", reviewerInput.value);
});

// boot: replay any decisions a previous session could not deliver, then
// pull the authoritative state
outbox.load();
void pump();
refresh().catch((err: unknown) => {
  errorBanner.hidden = false;
  errorBanner.textContent = `cannot reach the review service: ${String(err)}`;
  window.setTimeout(() => void refresh().then(render, () => undefined), 3000);
});
window.setInterval(() => {
  api.stats().then(
    (s) => {
      stats = s;
      render();
    },
    () => undefined,
  );
}, 5000);
