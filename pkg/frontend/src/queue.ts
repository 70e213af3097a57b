// Pure queue logic: filtering, cursor movement, and display formatting.
// Nothing in here touches the DOM or the network, so the whole triage
// flow is unit-testable.

import type { Candidate, Status, Verdict } from "./types.js";

export interface Filters {
  /** "all" or one assigned pseudo-label. */
  label: "all" | 0 | 1;
  /** pending = still to review, decided = already judged. */
  status: "pending" | "decided" | "all";
  /** Inclusive confidence bounds in [0, 1]. */
  minConfidence: number;
  maxConfidence: number;
}

export function defaultFilters(): Filters {
  return { label: "all", status: "pending", minConfidence: 0, maxConfidence: 1 };
}

function statusMatches(status: Status, wanted: Filters["status"]): boolean {
  if (wanted === "all") return true;
  if (wanted === "pending") return status === "pending";
  return status !== "pending";
}

/** Candidates passing the filters, in their incoming (confidence desc) order. */
export function applyFilters(candidates: readonly Candidate[], filters: Filters): Candidate[] {
  return candidates.filter(
    (c) =>
      (filters.label === "all" || c.assigned_label === filters.label) &&
      statusMatches(c.status, filters.status) &&
      c.confidence >= filters.minConfidence &&
      c.confidence <= filters.maxConfidence,
  );
}

/** New array with one candidate's status replaced; input stays untouched. */
export function withVerdict(
  candidates: readonly Candidate[],
  id: number,
  verdict: Verdict,
): Candidate[] {
  return candidates.map((c) => (c.id === id ? { ...c, status: verdict } : c));
}

/** Clamp a cursor into a list; -1 means the queue is empty. */
export function clampCursor(length: number, index: number): number {
  if (length <= 0) return -1;
  return Math.min(Math.max(index, 0), length - 1);
}

/** Confidence rendered as a percentage, the way reviewers read it. */
export function formatConfidence(confidence: number): string {
  return `${(confidence * 100).toFixed(2)}%`;
}

export function labelName(label: 0 | 1): string {
  return label === 1 ? "hateful" : "benign";
}

/** Parse a percent text field back to [0, 1]; bad input becomes the fallback. */
export function parsePercent(raw: string, fallback: number): number {
  if (raw.trim() === "") return fallback;
  const value = Number(raw);
  if (!Number.isFinite(value)) return fallback;
  return Math.min(Math.max(value / 100, 0), 1);
}
