// Delivery loop between the outbox and the service. Kept free of DOM
// concerns so the retry semantics are directly testable.

import { ApiError, ReviewApi } from "./api.js";
import type { Outbox, PendingDecision } from "./outbox.js";
import type { DecisionAck } from "./types.js";

export interface DeliveryCallbacks {
  onAck?(ack: DecisionAck): void;
  /** The service understood the request and said no (4xx/5xx). The
      decision leaves the queue so the rest can flow, but the caller
      must surface it; it is never dropped silently. */
  onRefused?(decision: PendingDecision, error: ApiError): void;
}

export type DeliveryOutcome = "drained" | "unreachable";

/** Post queued decisions oldest-first until the outbox is empty or the
    service stops answering. On "unreachable" the head decision stays
    queued with its attempt count bumped, ready for the next try. */
export async function drainOutbox(
  outbox: Outbox,
  api: ReviewApi,
  callbacks: DeliveryCallbacks = {},
): Promise<DeliveryOutcome> {
  for (;;) {
    const head = outbox.peek();
    if (head === undefined) return "drained";
    try {
      const ack = await api.decide(head.candidateId, head.verdict, head.reviewer);
      outbox.ack();
      callbacks.onAck?.(ack);
    } catch (err) {
      if (err instanceof ApiError) {
        outbox.ack();
        callbacks.onRefused?.(head, err);
      } else {
        outbox.fail();
        return "unreachable";
      }
    }
  }
}
