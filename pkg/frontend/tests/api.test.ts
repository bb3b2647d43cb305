import { describe, expect, it, vi } from "vitest";

import { ApiClient, ApiError, matchesSchema } from "../src/api.js";
import { DEFAULT_STATE, ViewerState } from "../src/state.js";

const REPORT = {
  transform: { scale: 1, angle: 0, pivot: [0, 0], anchor: [0, 0] },
  decomposition: null,
  residual_left: 0,
  residual_right: 0,
  psis_distance_sum: 0,
};

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function routedFetch() {
  return vi.fn(async (url: string) => {
    if (url === "/patients") return jsonResponse([{ patient_id: "p1", exams: [] }]);
    if (/^\/patients\/[^/]+\/exams$/.test(url)) return jsonResponse([]);
    if (/\/landmarks$/.test(url)) return jsonResponse({ frame: "e1", spine: [] });
    if (url === "/register") return jsonResponse(REPORT);
    if (url.startsWith("/blend")) {
      return new Response(new Blob([new Uint8Array([137, 80, 78, 71])], { type: "image/png" }));
    }
    return jsonResponse({ status: 404, code: "not_found", message: url }, 404);
  });
}

const COMPLETE: ViewerState = {
  ...DEFAULT_STATE,
  patient: "p1",
  target: "e1",
  sources: ["e2"],
};

describe("endpoint contract", () => {
  it("issues only endpoints the service defines", async () => {
    const client = new ApiClient(routedFetch());
    await client.listPatients();
    await client.listExams("p1");
    await client.getLandmarks("p1", "e1");
    await client.register("p1", "e2", "e1", "angle");
    await client.fetchBlend(COMPLETE);
    expect(client.log.length).toBe(5);
    for (const entry of client.log) {
      expect(matchesSchema(entry), `${entry.method} ${entry.path}`).toBe(true);
    }
  });

  it("rejects paths outside the recorded schema", () => {
    expect(matchesSchema({ method: "GET", path: "/admin" })).toBe(false);
    expect(matchesSchema({ method: "DELETE", path: "/patients" })).toBe(false);
  });
});

describe("registration cache", () => {
  it("re-requesting the same pair and method issues no second POST", async () => {
    const fetchFn = routedFetch();
    const client = new ApiClient(fetchFn);
    const first = await client.register("p1", "e2", "e1", "angle");
    const second = await client.register("p1", "e2", "e1", "angle");
    expect(second).toBe(first);
    expect(client.log.filter((e) => e.method === "POST").length).toBe(1);
  });

  it("caches each method separately and survives re-toggling", async () => {
    const client = new ApiClient(routedFetch());
    await client.register("p1", "e2", "e1", "angle");
    await client.register("p1", "e2", "e1", "lsq");
    await client.register("p1", "e2", "e1", "angle");
    await client.register("p1", "e2", "e1", "lsq");
    expect(client.log.filter((e) => e.method === "POST").length).toBe(2);
  });

  it("does not cache failures", async () => {
    let calls = 0;
    const flaky = vi.fn(async () => {
      calls += 1;
      if (calls === 1) {
        return jsonResponse({ status: 422, code: "degenerate_landmarks", message: "bad" }, 422);
      }
      return jsonResponse(REPORT);
    });
    const client = new ApiClient(flaky);
    await expect(client.register("p1", "e2", "e1", "angle")).rejects.toThrow(ApiError);
    await Promise.resolve(); // let the cache eviction settle
    const report = await client.register("p1", "e2", "e1", "angle");
    expect(report.transform.scale).toBe(1);
  });
});

describe("error decoding", () => {
  it("surfaces the service's stage text", async () => {
    const client = new ApiClient(
      vi.fn(async () =>
        jsonResponse(
          { status: 422, code: "detection_failed", message: "no spine", stage: "spine" },
          422,
        ),
      ),
    );
    const err = await client.getLandmarks("p1", "e1").catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).message).toContain("spine");
    expect((err as ApiError).body.code).toBe("detection_failed");
  });
});

describe("blend requests", () => {
  it("keeps at most one blend in flight (latest wins)", async () => {
    const aborted: boolean[] = [];
    const fetchFn = vi.fn(
      (url: string, init?: RequestInit) =>
        new Promise<Response>((resolve, reject) => {
          init?.signal?.addEventListener("abort", () => {
            aborted.push(true);
            reject(new DOMException("aborted", "AbortError"));
          });
          if (aborted.length > 0 || fetchFn.mock.calls.length > 1) {
            resolve(new Response(new Blob([new Uint8Array(4)], { type: "image/png" })));
          }
        }),
    );
    const client = new ApiClient(fetchFn);
    const first = client.fetchBlend(COMPLETE);
    const second = client.fetchBlend({ ...COMPLETE, alpha: 0.9 });
    await expect(first).rejects.toHaveProperty("name", "AbortError");
    await second;
    expect(aborted).toEqual([true]);
  });

  it("builds blend queries with all view parameters", () => {
    const client = new ApiClient(routedFetch());
    const path = client.blendPath({ ...COMPLETE, alpha: 0.3, overlay: "landmarks", method: "lsq" });
    const q = new URLSearchParams(path.split("?")[1]);
    expect(q.get("patient")).toBe("p1");
    expect(q.get("target")).toBe("e1");
    expect(q.get("sources")).toBe("e2");
    expect(q.get("alpha")).toBe("0.3");
    expect(q.get("overlay")).toBe("landmarks");
    expect(q.get("method")).toBe("lsq");
  });
});
