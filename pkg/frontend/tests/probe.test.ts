import { describe, expect, it } from "vitest";
import { FetchLike, ModelInfo, ServiceClient } from "../src/api.js";
import { loadProbePreviews, probeAvailability } from "../src/probe.js";

const filterbank: ModelInfo = { id: "fb", kind: "filterbank", K: 5 };
const bucket: ModelInfo = { id: "bk", kind: "bucket", K: 5 };

describe("probeAvailability", () => {
  it("enables the panel only for filter-bank models", () => {
    expect(probeAvailability(filterbank)).toEqual({ enabled: true, reason: null });
    const disabled = probeAvailability(bucket);
    expect(disabled.enabled).toBe(false);
    expect(disabled.reason).toMatch(/bucket/);
    expect(disabled.reason).toMatch(/filter-bank/);
  });

  it("explains itself when no model is selected", () => {
    const none = probeAvailability(null);
    expect(none.enabled).toBe(false);
    expect(none.reason).toMatch(/select a model/);
  });
});

describe("loadProbePreviews", () => {
  it("probes k = 0..K-1 in order with the current image", async () => {
    const calls: any[] = [];
    const fetch: FetchLike = async (url, init) => {
      const body = JSON.parse(String(init?.body));
      calls.push({ url, body });
      return new Response(
        JSON.stringify({ image_base64: `p${body.k}`, model: body.model, k: body.k }),
        { status: 200, headers: { "Content-Type": "application/json" } },
      );
    };
    const previews = await loadProbePreviews(new ServiceClient("http://svc", fetch), filterbank, "img");
    expect(previews).toHaveLength(5);
    expect(previews.map((p) => p.k)).toEqual([0, 1, 2, 3, 4]);
    expect(previews.map((p) => p.image)).toEqual(["p0", "p1", "p2", "p3", "p4"]);
    expect(calls.every((c) => c.url === "http://svc/probe")).toBe(true);
    expect(calls.every((c) => c.body.image_base64 === "img")).toBe(true);
  });

  it("refuses to probe a model without a filter bank", async () => {
    const fetch: FetchLike = async () => {
      throw new Error("no request should be sent");
    };
    await expect(
      loadProbePreviews(new ServiceClient("http://svc", fetch), bucket, "img"),
    ).rejects.toThrow(/filter-bank/);
  });
});
