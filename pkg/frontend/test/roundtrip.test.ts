/** End-to-end round trip against the real service.
 *
 * Boots the HTTP service, uploads a simulated dataset, runs a short fit,
 * submits a five-point polyline sketch through the client, and checks the
 * returned measures digit-for-digit against the command-line `womble` run on
 * the identical curve document.  Skipped automatically when the Python
 * backend is not installed.
 */

import { execFileSync, spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ServiceClient, SegmentRow } from "../src/api.js";
import { SketchEditor } from "../src/sketch.js";

const PYTHON = process.env.ARTIFACT_PYTHON ?? "python3";

function backendAvailable(): boolean {
  try {
    execFileSync(PYTHON, ["-c", "import artifact"], { stdio: "ignore" });
    return true;
  } catch {
    return false;
  }
}

const HAVE_BACKEND = backendAvailable();

const FIT_CONFIG = {
  family: "squared_exponential",
  iters: 600,
  burn_in: 300,
  seed: 0,
};

let root = "";
let server: ChildProcess | null = null;
let client: ServiceClient;
let base = "";

async function waitForHealth(url: string, timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  let lastError: unknown = null;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(url + "/v1/health");
      if (resp.ok) {
        return;
      }
    } catch (err) {
      lastError = err;
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error(`service did not come up at ${url}: ${String(lastError)}`);
}

async function waitForJob(jobId: string, timeoutMs: number): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    const record = await client.job(jobId);
    if (record.status === "done") {
      return;
    }
    if (record.status === "failed") {
      throw new Error(`job ${jobId} failed: ${JSON.stringify(record)}`);
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error(`job ${jobId} did not finish in time`);
}

describe.skipIf(!HAVE_BACKEND)("live service round trip", () => {
  beforeAll(async () => {
    root = mkdtempSync(join(tmpdir(), "artifact-ui-"));
    const port = 20000 + (process.pid % 20000);
    base = `http://127.0.0.1:${port}`;
    server = spawn(
      PYTHON,
      ["-m", "artifact.io_cli", "serve", "--host", "127.0.0.1", "--port", String(port), "--root", root],
      { stdio: "ignore" },
    );
    await waitForHealth(base, 30_000);
    client = new ServiceClient(base);
  }, 60_000);

  afterAll(() => {
    if (server !== null) {
      server.kill();
    }
    if (root !== "") {
      rmSync(root, { recursive: true, force: true });
    }
  });

  it("matches the command-line womble output for a sketched polyline", async () => {
    // simulate the dataset with the same tool the service wraps
    const dataPath = join(root, "data.csv");
    execFileSync(PYTHON, [
      "-m",
      "artifact.io_cli",
      "simulate",
      "--pattern",
      "1",
      "--L",
      "100",
      "--seed",
      "0",
      "--out",
      dataPath,
    ]);
    const csvText = readFileSync(dataPath, "utf-8");

    const receipt = await client.uploadDataset(csvText);
    expect(receipt.L).toBe(100);

    const fitId = await client.startFit(receipt.dataset_id, FIT_CONFIG);
    await waitForJob(fitId, 240_000);

    // the user draws five points on the canvas
    const editor = new SketchEditor();
    editor.addPoint(0.1, 0.2);
    editor.addPoint(0.3, 0.5);
    editor.addPoint(0.5, 0.4);
    editor.addPoint(0.7, 0.6);
    editor.addPoint(0.9, 0.3);
    expect(editor.ready()).toBe(true);
    const doc = editor.toDocument();
    expect(doc.points).toHaveLength(5);

    const outcome = await client.womble(fitId, doc);
    expect(outcome.kind).toBe("payload");
    if (outcome.kind !== "payload") {
      return;
    }
    const payload = outcome.payload;
    expect(payload.fit_job_id).toBe(fitId);
    expect(payload.n_segments).toBeGreaterThan(0);
    expect(payload.segments).toHaveLength(payload.n_segments);

    // run the CLI on the identical curve document and the same chain file
    const curvePath = join(root, "curve.json");
    writeFileSync(curvePath, JSON.stringify(doc));
    const outPrefix = join(root, "parity");
    execFileSync(PYTHON, [
      "-m",
      "artifact.io_cli",
      "womble",
      "--data",
      join(root, "datasets", `${receipt.dataset_id}.csv`),
      "--chains",
      join(root, "chains", `${fitId}.csv`),
      "--curve",
      curvePath,
      "--out",
      outPrefix,
      "--seed",
      String(FIT_CONFIG.seed),
    ]);

    // per-segment numbers must agree digit for digit
    const table = readFileSync(outPrefix + ".segments.csv", "utf-8")
      .split("\n")
      .filter((ln) => ln.length > 0);
    const header = table[0].split(",");
    expect(table.length - 1).toBe(payload.n_segments);
    for (let i = 0; i < payload.n_segments; i++) {
      const cols = table[i + 1].split(",");
      const row: Record<string, string> = {};
      header.forEach((h, j) => (row[h] = cols[j]));
      const seg: SegmentRow = payload.segments[i];
      expect(Number(row["segment"])).toBe(seg.segment);
      expect(Number(row["start_x"])).toBe(seg.start_x);
      expect(Number(row["start_y"])).toBe(seg.start_y);
      expect(Number(row["length"])).toBe(seg.length);
      expect(Number(row["avg_gradient_median"])).toBe(seg.avg_gradient_median);
      expect(Number(row["avg_gradient_lower"])).toBe(seg.avg_gradient_lower);
      expect(Number(row["avg_gradient_upper"])).toBe(seg.avg_gradient_upper);
      expect(row["avg_gradient_flag"]).toBe(seg.avg_gradient_flag);
      expect(Number(row["avg_curvature_median"])).toBe(seg.avg_curvature_median);
      expect(Number(row["avg_curvature_lower"])).toBe(seg.avg_curvature_lower);
      expect(Number(row["avg_curvature_upper"])).toBe(seg.avg_curvature_upper);
      expect(row["avg_curvature_flag"]).toBe(seg.avg_curvature_flag);
    }

    // whole-curve record must agree as well
    const curveRecord = JSON.parse(readFileSync(outPrefix + ".curve.json", "utf-8"));
    expect(payload.curve).toEqual(curveRecord);
  }, 300_000);

  it("surfaces the server's own message for bad requests", async () => {
    const err = await client
      .womble("not-a-job", {
        kind: "polyline",
        points: [
          [0, 0],
          [1, 1],
        ],
        closed: false,
        level: null,
      })
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(Error);
    expect(String((err as Error).message)).toContain("404");
  });
});
