import { describe, expect, it } from "vitest";

import {
  ApiError,
  FetchLike,
  LatestTracker,
  parseWomblePayload,
  ServiceClient,
} from "../src/api.js";
import { SchemaError } from "../src/model.js";

interface RecordedCall {
  url: string;
  method: string;
  headers: Record<string, string>;
  body: string | null;
}

function stub(responder: (call: RecordedCall) => Response): {
  fetchFn: FetchLike;
  calls: RecordedCall[];
} {
  const calls: RecordedCall[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    const call: RecordedCall = {
      url,
      method: init?.method ?? "GET",
      headers: Object.fromEntries(
        Object.entries((init?.headers as Record<string, string>) ?? {}),
      ),
      body: typeof init?.body === "string" ? init.body : null,
    };
    calls.push(call);
    return responder(call);
  };
  return { fetchFn, calls };
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

const MEASURE = { median: 1.25, lower: 0.5, upper: 2.0, flag: "positive" };

const SEGMENT = {
  segment: 0,
  start_x: 0.1,
  start_y: 0.2,
  length: 0.05,
  avg_gradient_median: -3.5,
  avg_gradient_lower: -5.0,
  avg_gradient_upper: -2.0,
  avg_gradient_flag: "negative",
  avg_curvature_median: 0.25,
  avg_curvature_lower: -1.0,
  avg_curvature_upper: 1.5,
  avg_curvature_flag: "none",
};

const PAYLOAD = {
  fit_job_id: "fit123",
  n_segments: 1,
  segments: [SEGMENT],
  curve: {
    length: 0.05,
    n_segments: 1,
    alpha: 0.05,
    mode: "joint",
    total: { gradient: MEASURE, curvature: MEASURE },
    average: { gradient: MEASURE, curvature: MEASURE },
  },
};

const CURVE_DOC = {
  kind: "polyline" as const,
  points: [
    [0.1, 0.2],
    [0.3, 0.4],
  ],
  closed: false,
  level: null,
};

describe("service client requests", () => {
  it("uploads datasets as raw CSV", async () => {
    const { fetchFn, calls } = stub(() => jsonResponse({ dataset_id: "abc", L: 100, p: 1 }));
    const client = new ServiceClient("http://localhost:8337/", fetchFn);
    const receipt = await client.uploadDataset("x,y,value\n0,0,1\n");
    expect(receipt).toEqual({ dataset_id: "abc", L: 100, p: 1 });
    expect(calls[0].url).toBe("http://localhost:8337/v1/datasets");
    expect(calls[0].method).toBe("POST");
    expect(calls[0].headers["content-type"]).toBe("text/csv");
    expect(calls[0].body).toBe("x,y,value\n0,0,1\n");
  });

  it("starts fits with the dataset id and config in the JSON body", async () => {
    const { fetchFn, calls } = stub(() => jsonResponse({ job_id: "fit123" }));
    const client = new ServiceClient("http://localhost:8337", fetchFn);
    const jid = await client.startFit("abc", { iters: 500, seed: 0 });
    expect(jid).toBe("fit123");
    expect(calls[0].url).toBe("http://localhost:8337/v1/fit");
    expect(JSON.parse(calls[0].body!)).toEqual({
      dataset_id: "abc",
      config: { iters: 500, seed: 0 },
    });
  });

  it("fetches job records and grid summaries from the documented paths", async () => {
    const { fetchFn, calls } = stub((call) =>
      call.url.includes("/jobs/")
        ? jsonResponse({ job_id: "fit123", kind: "fit", status: "done" })
        : new Response("x,y,field,median,lower,upper,flag\n", {
            status: 200,
            headers: { "content-type": "text/csv" },
          }),
    );
    const client = new ServiceClient("http://h", fetchFn);
    const record = await client.job("fit123");
    expect(record.status).toBe("done");
    const text = await client.gridSummary("fit123", "grad1");
    expect(text).toContain("x,y,field");
    expect(calls[0].url).toBe("http://h/v1/jobs/fit123");
    expect(calls[1].url).toBe("http://h/v1/grid-summary?job=fit123&field=grad1");
  });

  it("submits womble requests and validates the synchronous payload", async () => {
    const { fetchFn, calls } = stub(() => jsonResponse(PAYLOAD));
    const client = new ServiceClient("http://h", fetchFn);
    const outcome = await client.womble("fit123", CURVE_DOC, { thin: 2 });
    expect(outcome.kind).toBe("payload");
    if (outcome.kind === "payload") {
      expect(outcome.payload.n_segments).toBe(1);
      expect(outcome.payload.segments[0].avg_gradient_flag).toBe("negative");
      expect(outcome.payload.curve.average.curvature.flag).toBe("positive");
    }
    expect(calls[0].url).toBe("http://h/v1/womble");
    expect(JSON.parse(calls[0].body!)).toEqual({
      fit_job_id: "fit123",
      curve: CURVE_DOC,
      settings: { thin: 2 },
    });
  });

  it("reports queued womble jobs from a 202 response", async () => {
    const { fetchFn } = stub(() => jsonResponse({ job_id: "w42" }, 202));
    const client = new ServiceClient("http://h", fetchFn);
    const outcome = await client.womble("fit123", CURVE_DOC);
    expect(outcome).toEqual({ kind: "queued", jobId: "w42" });
  });

  it("surfaces server error detail from both error body shapes", async () => {
    const shapes = [
      { status: 409, body: { detail: "fit fit123 is running" }, expected: "fit fit123 is running" },
      { status: 400, body: { error: "ConfigError", detail: "unknown womble settings ['x']" }, expected: "unknown womble settings ['x']" },
    ];
    for (const shape of shapes) {
      const { fetchFn } = stub(() => jsonResponse(shape.body, shape.status));
      const client = new ServiceClient("http://h", fetchFn);
      const err = await client.womble("fit123", CURVE_DOC).catch((e: unknown) => e);
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).status).toBe(shape.status);
      expect((err as ApiError).detail).toBe(shape.expected);
    }
  });

  it("falls back to the raw body for non-JSON errors", async () => {
    const { fetchFn } = stub(() => new Response("boom", { status: 500 }));
    const client = new ServiceClient("http://h", fetchFn);
    const err = await client.job("x").catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).detail).toBe("boom");
  });
});

describe("womble payload validation", () => {
  it("rejects payloads whose segment rows are malformed", () => {
    const broken = JSON.parse(JSON.stringify(PAYLOAD)) as Record<string, unknown>;
    (broken["segments"] as Record<string, unknown>[])[0]["avg_gradient_flag"] = "maybe";
    expect(() => parseWomblePayload(broken)).toThrow(SchemaError);
  });

  it("rejects payloads whose segment count disagrees with the rows", () => {
    const broken = { ...PAYLOAD, n_segments: 3 };
    expect(() => parseWomblePayload(broken)).toThrow(SchemaError);
  });

  it("rejects payloads missing the curve record", () => {
    const broken: Record<string, unknown> = { ...PAYLOAD };
    delete broken["curve"];
    expect(() => parseWomblePayload(broken)).toThrow(SchemaError);
  });
});

describe("concurrent request matching", () => {
  it("drops responses that arrive after a newer one was applied", () => {
    const tracker = new LatestTracker();
    const first = tracker.issue();
    const second = tracker.issue();
    // the second (newer) response lands first
    expect(tracker.accept(second)).toBe(true);
    expect(tracker.accept(first)).toBe(false);
  });

  it("applies in-order responses normally", () => {
    const tracker = new LatestTracker();
    const a = tracker.issue();
    const b = tracker.issue();
    expect(tracker.accept(a)).toBe(true);
    expect(tracker.accept(b)).toBe(true);
    expect(tracker.accept(b)).toBe(false);
  });
});
