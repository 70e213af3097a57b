import { describe, expect, it } from "vitest";

import { ApiError, ReviewApi } from "../src/api.js";
import { makeFakeService, seedCandidates } from "./fake_service.js";

describe("ReviewApi request shapes", () => {
  it("builds the candidates query from options", async () => {
    const svc = makeFakeService(seedCandidates(3));
    const api = new ReviewApi("", svc.fetch);
    await api.candidates({ status: "pending", label: 1, page: 2, pageSize: 10 });
    const url = svc.requests[0]!.url;
    expect(url).toContain("/api/candidates?");
    expect(url).toContain("page=2");
    expect(url).toContain("page_size=10");
    expect(url).toContain("status=pending");
    expect(url).toContain("assigned_label=1");
  });

  it("POSTs decisions as JSON with verdict and reviewer", async () => {
    const svc = makeFakeService(seedCandidates(3));
    const api = new ReviewApi("", svc.fetch);
    const ack = await api.decide(2, "accepted", "casey");
    expect(ack.ok).toBe(true);
    expect(ack.verdict).toBe("accepted");
    const req = svc.requests[0]!;
    expect(req.method).toBe("POST");
    expect(req.url).toBe("/api/candidates/2/decision");
    expect(req.body).toEqual({ verdict: "accepted", reviewer: "casey" });
  });

  it("prefixes a base URL when given one", async () => {
    const svc = makeFakeService(seedCandidates(1));
    const api = new ReviewApi("http://fake.test", svc.fetch);
    await api.stats();
    expect(svc.requests[0]!.url).toBe("http://fake.test/api/stats");
    expect(api.imageUrl(7)).toBe("http://fake.test/api/images/7");
  });

  it("surfaces service refusals as ApiError with the server message", async () => {
    const svc = makeFakeService(seedCandidates(1));
    const api = new ReviewApi("", svc.fetch);
    const err = await api.decide(999, "accepted", "a").catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(404);
    expect((err as ApiError).message).toContain("unknown candidate 999");
  });

  it("lets network failures propagate untouched", async () => {
    const svc = makeFakeService(seedCandidates(1));
    svc.reachable = false;
    const api = new ReviewApi("", svc.fetch);
    const err = await api.stats().catch((e: unknown) => e);
    expect(err).toBeInstanceOf(TypeError);
    expect(err).not.toBeInstanceOf(ApiError);
  });
});

describe("ReviewApi data access", () => {
  it("reads stats", async () => {
    const svc = makeFakeService(seedCandidates(4));
    const api = new ReviewApi("", svc.fetch);
    expect(await api.stats()).toEqual({ total: 4, pending: 4, accepted: 0, rejected: 0 });
  });

  it("pages through every candidate", async () => {
    const svc = makeFakeService(seedCandidates(123));
    const api = new ReviewApi("", svc.fetch);
    const all = await api.allCandidates(50);
    expect(all).toHaveLength(123);
    expect(new Set(all.map((c) => c.id)).size).toBe(123);
    // three pages of 50 were requested
    const listCalls = svc.requests.filter((r) => r.url.includes("/api/candidates?"));
    expect(listCalls).toHaveLength(3);
  });

  it("lists candidates sorted by confidence descending then id", async () => {
    const svc = makeFakeService(seedCandidates(60));
    const api = new ReviewApi("", svc.fetch);
    const page = await api.candidates({ page: 1, pageSize: 60 });
    const pairs = page.items.map((c) => [c.confidence, c.id] as const);
    const sorted = [...pairs].sort((a, b) => b[0] - a[0] || a[1] - b[1]);
    expect(pairs).toEqual(sorted);
  });

  it("fetches a single candidate", async () => {
    const svc = makeFakeService(seedCandidates(3));
    const api = new ReviewApi("", svc.fetch);
    const cand = await api.candidate(2);
    expect(cand.id).toBe(2);
    expect(cand.image_url).toBe("/api/images/2");
  });
});
