// Durable decision buffer. Every verdict the reviewer enters lands here
// first and is only removed after the service acknowledges it, so an
// unreachable service (or a closed tab, when storage is available)
// never loses a decision. Entries keep their order: the service applies
// latest-wins, so replaying an accept followed by a reject of the same
// candidate ends rejected, exactly as the reviewer saw it.

import type { Verdict } from "./types.js";

export interface PendingDecision {
  candidateId: number;
  verdict: Verdict;
  reviewer: string;
  attempts: number;
}

/** The subset of window.localStorage the outbox needs; null disables persistence. */
export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

/** Capped exponential backoff between delivery attempts. */
export function backoffMs(attempts: number): number {
  return Math.min(1000 * 2 ** Math.min(attempts, 5), 30_000);
}

function isPendingDecision(row: unknown): row is PendingDecision {
  if (row === null || typeof row !== "object") return false;
  const r = row as Record<string, unknown>;
  return (
    typeof r.candidateId === "number" &&
    (r.verdict === "accepted" || r.verdict === "rejected") &&
    typeof r.reviewer === "string" &&
    typeof r.attempts === "number"
  );
}

export class Outbox {
  private items: PendingDecision[] = [];

  constructor(
    private readonly storage: StorageLike | null = null,
    private readonly key: string = "memefusion-review-outbox",
  ) {}

  /** Hydrate from storage; corrupt or missing data starts empty. */
  load(): void {
    if (this.storage === null) return;
    try {
      const raw = this.storage.getItem(this.key);
      if (raw === null) return;
      const parsed: unknown = JSON.parse(raw);
      this.items = Array.isArray(parsed) ? parsed.filter(isPendingDecision) : [];
    } catch {
      this.items = [];
    }
  }

  get size(): number {
    return this.items.length;
  }

  peek(): PendingDecision | undefined {
    return this.items[0];
  }

  push(candidateId: number, verdict: Verdict, reviewer: string): void {
    this.items.push({ candidateId, verdict, reviewer, attempts: 0 });
    this.persist();
  }

  /** Drop the head after a successful delivery. */
  ack(): PendingDecision | undefined {
    const done = this.items.shift();
    this.persist();
    return done;
  }

  /** Count a failed attempt against the head without losing it. */
  fail(): void {
    const head = this.items[0];
    if (head !== undefined) {
      head.attempts += 1;
      this.persist();
    }
  }

  private persist(): void {
    if (this.storage === null) return;
    try {
      if (this.items.length === 0) {
        this.storage.removeItem(this.key);
      } else {
        this.storage.setItem(this.key, JSON.stringify(this.items));
      }
    } catch {
      // storage full or unavailable: in-memory queue still holds everything
    }
  }
}
