// Typed client for the review service HTTP API.
//
// Every call goes through requestJson, which separates the two failure
// modes the app cares about: an ApiError carries an HTTP status and the
// server's diagnostic (the request reached the service and was refused),
// while network-level failures propagate as whatever the fetch
// implementation throws (the service was unreachable, worth retrying).

import type { Candidate, CandidatePage, DecisionAck, Stats, Status, Verdict } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface ListOptions {
  status?: Status;
  label?: 0 | 1;
  page?: number;
  pageSize?: number;
}

export class ReviewApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async requestJson<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    let body: unknown = null;
    try {
      body = await resp.json();
    } catch {
      // non-JSON body; only acceptable on errors
    }
    if (!resp.ok) {
      const message =
        body !== null && typeof body === "object" && typeof (body as { error?: unknown }).error === "string"
          ? (body as { error: string }).error
          : `request failed with status ${resp.status}`;
      throw new ApiError(resp.status, message);
    }
    if (body === null) {
      throw new ApiError(resp.status, "service returned a non-JSON body");
    }
    return body as T;
  }

  stats(): Promise<Stats> {
    return this.requestJson<Stats>("/api/stats");
  }

  candidates(opts: ListOptions = {}): Promise<CandidatePage> {
    const params = new URLSearchParams();
    params.set("page", String(opts.page ?? 1));
    params.set("page_size", String(opts.pageSize ?? 500));
    if (opts.status !== undefined) params.set("status", opts.status);
    if (opts.label !== undefined) params.set("assigned_label", String(opts.label));
    return this.requestJson<CandidatePage>(`/api/candidates?${params.toString()}`);
  }

  /** Every candidate in the session, paged until the reported total is in hand. */
  async allCandidates(pageSize = 500): Promise<Candidate[]> {
    const out: Candidate[] = [];
    for (let page = 1; ; page += 1) {
      const batch = await this.candidates({ page, pageSize });
      out.push(...batch.items);
      if (out.length >= batch.total || batch.items.length === 0) return out;
    }
  }

  candidate(id: number): Promise<Candidate> {
    return this.requestJson<Candidate>(`/api/candidates/${id}`);
  }

  decide(id: number, verdict: Verdict, reviewer: string, note?: string): Promise<DecisionAck> {
    const payload: Record<string, unknown> = { verdict, reviewer };
    if (note !== undefined) payload.note = note;
    return this.requestJson<DecisionAck>(`/api/candidates/${id}/decision`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  imageUrl(id: number): string {
    return `${this.baseUrl}/api/images/${id}`;
  }
}
