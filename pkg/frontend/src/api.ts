/** HTTP client for the analysis service's /v1 interface.
 *
 * The UI never computes statistics itself; everything numeric shown on screen
 * comes back from these endpoints.  All methods throw ApiError on non-2xx
 * responses so callers can surface the server's own message inline.
 */

import { isFlag, SignificanceFlag } from "./colors.js";
import { CurveDocument, SchemaError } from "./model.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  status: number;
  detail: string;

  constructor(status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }
}

export interface DatasetReceipt {
  dataset_id: string;
  L: number;
  p: number;
}

export interface JobRecord {
  job_id: string;
  kind: string;
  status: string;
  [key: string]: unknown;
}

export interface Measure {
  median: number;
  lower: number;
  upper: number;
  flag: SignificanceFlag;
}

export interface SegmentRow {
  segment: number;
  start_x: number;
  start_y: number;
  length: number;
  avg_gradient_median: number;
  avg_gradient_lower: number;
  avg_gradient_upper: number;
  avg_gradient_flag: SignificanceFlag;
  avg_curvature_median: number;
  avg_curvature_lower: number;
  avg_curvature_upper: number;
  avg_curvature_flag: SignificanceFlag;
}

export interface CurveRecord {
  length: number;
  n_segments: number;
  alpha: number;
  mode: string;
  total: { gradient: Measure; curvature: Measure };
  average: { gradient: Measure; curvature: Measure };
}

export interface WomblePayload {
  fit_job_id: string;
  n_segments: number;
  segments: SegmentRow[];
  curve: CurveRecord;
}

export type WombleOutcome =
  | { kind: "payload"; payload: WomblePayload }
  | { kind: "queued"; jobId: string };

function asRecord(value: unknown, what: string): Record<string, unknown> {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    throw new SchemaError(`${what} must be a JSON object`);
  }
  return value as Record<string, unknown>;
}

function asNumber(value: unknown, what: string): number {
  if (typeof value !== "number" || !Number.isFinite(value)) {
    throw new SchemaError(`${what} must be a finite number`);
  }
  return value;
}

function asFlag(value: unknown, what: string): SignificanceFlag {
  if (!isFlag(value)) {
    throw new SchemaError(`${what} must be a significance flag`);
  }
  return value;
}

function parseMeasure(value: unknown, what: string): Measure {
  const rec = asRecord(value, what);
  return {
    median: asNumber(rec["median"], `${what}.median`),
    lower: asNumber(rec["lower"], `${what}.lower`),
    upper: asNumber(rec["upper"], `${what}.upper`),
    flag: asFlag(rec["flag"], `${what}.flag`),
  };
}

function parseSegment(value: unknown, index: number): SegmentRow {
  const rec = asRecord(value, `segments[${index}]`);
  const num = (key: string) => asNumber(rec[key], `segments[${index}].${key}`);
  return {
    segment: num("segment"),
    start_x: num("start_x"),
    start_y: num("start_y"),
    length: num("length"),
    avg_gradient_median: num("avg_gradient_median"),
    avg_gradient_lower: num("avg_gradient_lower"),
    avg_gradient_upper: num("avg_gradient_upper"),
    avg_gradient_flag: asFlag(rec["avg_gradient_flag"], `segments[${index}].avg_gradient_flag`),
    avg_curvature_median: num("avg_curvature_median"),
    avg_curvature_lower: num("avg_curvature_lower"),
    avg_curvature_upper: num("avg_curvature_upper"),
    avg_curvature_flag: asFlag(rec["avg_curvature_flag"], `segments[${index}].avg_curvature_flag`),
  };
}

/** Validate a wombling response against the documented schema. */
export function parseWomblePayload(value: unknown): WomblePayload {
  const rec = asRecord(value, "womble payload");
  const rawSegments = rec["segments"];
  if (!Array.isArray(rawSegments)) {
    throw new SchemaError("womble payload.segments must be an array");
  }
  const segments = rawSegments.map((seg, i) => parseSegment(seg, i));
  const nSegments = asNumber(rec["n_segments"], "womble payload.n_segments");
  if (nSegments !== segments.length) {
    throw new SchemaError(`n_segments=${nSegments} does not match ${segments.length} segment rows`);
  }
  const curve = asRecord(rec["curve"], "womble payload.curve");
  const total = asRecord(curve["total"], "curve.total");
  const average = asRecord(curve["average"], "curve.average");
  if (typeof rec["fit_job_id"] !== "string") {
    throw new SchemaError("womble payload.fit_job_id must be a string");
  }
  if (typeof curve["mode"] !== "string") {
    throw new SchemaError("curve.mode must be a string");
  }
  return {
    fit_job_id: rec["fit_job_id"],
    n_segments: nSegments,
    segments,
    curve: {
      length: asNumber(curve["length"], "curve.length"),
      n_segments: asNumber(curve["n_segments"], "curve.n_segments"),
      alpha: asNumber(curve["alpha"], "curve.alpha"),
      mode: curve["mode"],
      total: {
        gradient: parseMeasure(total["gradient"], "curve.total.gradient"),
        curvature: parseMeasure(total["curvature"], "curve.total.curvature"),
      },
      average: {
        gradient: parseMeasure(average["gradient"], "curve.average.gradient"),
        curvature: parseMeasure(average["curvature"], "curve.average.curvature"),
      },
    },
  };
}

async function errorDetail(resp: Response): Promise<string> {
  const text = await resp.text();
  try {
    const body = JSON.parse(text) as Record<string, unknown>;
    const detail = body["detail"] ?? body["error"];
    if (typeof detail === "string") {
      return detail;
    }
  } catch {
    // not JSON; fall through to the raw body
  }
  return text || resp.statusText;
}

/** Matches responses of concurrent requests so only the newest one renders. */
export class LatestTracker {
  private issued = 0;
  private applied = 0;

  issue(): number {
    this.issued += 1;
    return this.issued;
  }

  /** Accept a finished request id; false means a newer one already rendered. */
  accept(id: number): boolean {
    if (id <= this.applied) {
      return false;
    }
    this.applied = id;
    return true;
  }
}

export class ServiceClient {
  private baseUrl: string;
  private fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    if (!resp.ok) {
      throw new ApiError(resp.status, await errorDetail(resp));
    }
    return resp;
  }

  async uploadDataset(csvText: string): Promise<DatasetReceipt> {
    const resp = await this.request("/v1/datasets", {
      method: "POST",
      headers: { "content-type": "text/csv" },
      body: csvText,
    });
    return (await resp.json()) as DatasetReceipt;
  }

  async startFit(datasetId: string, config: Record<string, unknown>): Promise<string> {
    const resp = await this.request("/v1/fit", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ dataset_id: datasetId, config }),
    });
    const body = (await resp.json()) as { job_id: string };
    return body.job_id;
  }

  async job(jobId: string): Promise<JobRecord> {
    const resp = await this.request(`/v1/jobs/${encodeURIComponent(jobId)}`);
    return (await resp.json()) as JobRecord;
  }

  async gridSummary(jobId: string, field?: string): Promise<string> {
    const params = new URLSearchParams({ job: jobId });
    if (field !== undefined) {
      params.set("field", field);
    }
    const resp = await this.request(`/v1/grid-summary?${params.toString()}`);
    return await resp.text();
  }

  async womble(
    fitJobId: string,
    curve: CurveDocument,
    settings?: Record<string, unknown>,
  ): Promise<WombleOutcome> {
    const body: Record<string, unknown> = { fit_job_id: fitJobId, curve };
    if (settings !== undefined) {
      body["settings"] = settings;
    }
    const resp = await this.request("/v1/womble", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload = (await resp.json()) as unknown;
    if (resp.status === 202) {
      const rec = asRecord(payload, "queued womble response");
      if (typeof rec["job_id"] !== "string") {
        throw new SchemaError("queued womble response lacks job_id");
      }
      return { kind: "queued", jobId: rec["job_id"] };
    }
    return { kind: "payload", payload: parseWomblePayload(payload) };
  }
}
