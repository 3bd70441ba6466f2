/** Browser entry point: wires the canvas, controls, and service client.
 *
 * Everything numeric on screen is server output; this module only does
 * coordinate transforms, drawing, and the level-set picker's display-side
 * contour chase over the already-summarized grid.
 */

import { ApiError, LatestTracker, ServiceClient, WomblePayload } from "./api.js";
import { flagColor, heatColor, NEGATIVE_COLOR, NEUTRAL_COLOR, POSITIVE_COLOR } from "./colors.js";
import { FIELD_NAMES, GridCell, GridSummary, isEmpty, parseGridSummary } from "./gridsummary.js";
import { SchemaError } from "./model.js";
import { SketchEditor } from "./sketch.js";

const MARGIN = 40;

interface ViewState {
  client: ServiceClient;
  fitJobId: string | null;
  summary: GridSummary | null;
  field: string;
  editor: SketchEditor;
  tracker: LatestTracker;
  womble: WomblePayload | null;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function banner(message: string | null): void {
  const box = el<HTMLDivElement>("banner");
  if (message === null) {
    box.style.display = "none";
    box.textContent = "";
  } else {
    box.style.display = "block";
    box.textContent = message;
  }
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    return `server rejected the request (${err.status}): ${err.detail}`;
  }
  if (err instanceof SchemaError) {
    return `response did not match the documented schema: ${err.message}`;
  }
  return err instanceof Error ? err.message : String(err);
}

interface Transform {
  toCanvas(x: number, y: number): [number, number];
  toData(px: number, py: number): [number, number];
  cellW: number;
  cellH: number;
}

function makeTransform(summary: GridSummary, canvas: HTMLCanvasElement): Transform {
  const xs = summary.xs;
  const ys = summary.ys;
  const x0 = xs[0];
  const x1 = xs[xs.length - 1];
  const y0 = ys[0];
  const y1 = ys[ys.length - 1];
  const w = canvas.width - 2 * MARGIN;
  const h = canvas.height - 2 * MARGIN;
  const sx = x1 > x0 ? w / (x1 - x0) : 1;
  const sy = y1 > y0 ? h / (y1 - y0) : 1;
  return {
    toCanvas: (x, y) => [MARGIN + (x - x0) * sx, canvas.height - MARGIN - (y - y0) * sy],
    toData: (px, py) => [x0 + (px - MARGIN) / sx, y0 + (canvas.height - MARGIN - py) / sy],
    cellW: xs.length > 1 ? (sx * (x1 - x0)) / (xs.length - 1) : w,
    cellH: ys.length > 1 ? (sy * (y1 - y0)) / (ys.length - 1) : h,
  };
}

function drawHeatmap(state: ViewState, ctx: CanvasRenderingContext2D, tf: Transform): void {
  const cells = state.summary?.fields.get(state.field);
  if (cells === undefined || state.summary === null) {
    return;
  }
  let lo = Infinity;
  let hi = -Infinity;
  for (const c of cells) {
    lo = Math.min(lo, c.median);
    hi = Math.max(hi, c.median);
  }
  const span = hi > lo ? hi - lo : 1;
  for (const c of cells) {
    const [px, py] = tf.toCanvas(c.x, c.y);
    ctx.fillStyle = heatColor((c.median - lo) / span);
    ctx.fillRect(px - tf.cellW / 2, py - tf.cellH / 2, tf.cellW + 1, tf.cellH + 1);
  }
  // significance overlay: dot where the interval excludes zero
  for (const c of cells) {
    if (c.flag === "none") {
      continue;
    }
    const [px, py] = tf.toCanvas(c.x, c.y);
    ctx.fillStyle = flagColor(c.flag);
    ctx.beginPath();
    ctx.arc(px, py, Math.max(1.5, Math.min(tf.cellW, tf.cellH) / 5), 0, 2 * Math.PI);
    ctx.fill();
  }
}

function drawSketch(state: ViewState, ctx: CanvasRenderingContext2D, tf: Transform): void {
  const pts = state.editor.points;
  if (pts.length === 0) {
    return;
  }
  ctx.strokeStyle = "#212121";
  ctx.lineWidth = 2;
  ctx.beginPath();
  const [sx, sy] = tf.toCanvas(pts[0][0], pts[0][1]);
  ctx.moveTo(sx, sy);
  for (let i = 1; i < pts.length; i++) {
    const [px, py] = tf.toCanvas(pts[i][0], pts[i][1]);
    ctx.lineTo(px, py);
  }
  if (state.editor.closed) {
    ctx.closePath();
  }
  ctx.stroke();
  ctx.fillStyle = "#212121";
  for (const p of pts) {
    const [px, py] = tf.toCanvas(p[0], p[1]);
    ctx.beginPath();
    ctx.arc(px, py, 3, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function drawWomble(state: ViewState, ctx: CanvasRenderingContext2D, tf: Transform): void {
  const result = state.womble;
  if (result === null) {
    return;
  }
  ctx.lineWidth = 4;
  for (const seg of result.segments) {
    ctx.strokeStyle = flagColor(seg.avg_gradient_flag);
    const [px, py] = tf.toCanvas(seg.start_x, seg.start_y);
    ctx.beginPath();
    ctx.arc(px, py, 4, 0, 2 * Math.PI);
    ctx.stroke();
  }
}

function render(state: ViewState): void {
  const canvas = el<HTMLCanvasElement>("surface");
  const ctx = canvas.getContext("2d");
  if (ctx === null) {
    return;
  }
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const empty = el<HTMLDivElement>("empty-state");
  if (state.summary === null || isEmpty(state.summary)) {
    empty.style.display = "block";
    empty.textContent =
      state.summary === null
        ? "Load a finished fit job to see its surface."
        : "The fit returned an empty grid; nothing to draw.";
    return;
  }
  empty.style.display = "none";
  const tf = makeTransform(state.summary, canvas);
  drawHeatmap(state, ctx, tf);
  drawWomble(state, ctx, tf);
  drawSketch(state, ctx, tf);
}

function measureRow(label: string, m: { median: number; lower: number; upper: number; flag: string }): string {
  const color = flagColor(m.flag as "positive" | "negative" | "none");
  return (
    `<tr><td>${label}</td><td>${m.median.toPrecision(6)}</td>` +
    `<td>[${m.lower.toPrecision(6)}, ${m.upper.toPrecision(6)}]</td>` +
    `<td style="color:${color}">${m.flag}</td></tr>`
  );
}

function renderWombleTable(state: ViewState): void {
  const box = el<HTMLDivElement>("womble-table");
  const result = state.womble;
  if (result === null) {
    box.innerHTML = "";
    return;
  }
  const head =
    "<tr><th>measure</th><th>median</th><th>95% interval</th><th>flag</th></tr>";
  const curve = result.curve;
  const rows = [
    measureRow("total gradient", curve.total.gradient),
    measureRow("total curvature", curve.total.curvature),
    measureRow("average gradient", curve.average.gradient),
    measureRow("average curvature", curve.average.curvature),
  ];
  const segHead =
    "<tr><th>#</th><th>start</th><th>length</th><th>avg gradient</th><th>avg curvature</th></tr>";
  const segRows = result.segments.map(
    (s) =>
      `<tr><td>${s.segment}</td><td>(${s.start_x.toFixed(3)}, ${s.start_y.toFixed(3)})</td>` +
      `<td>${s.length.toFixed(4)}</td>` +
      `<td style="color:${flagColor(s.avg_gradient_flag)}">${s.avg_gradient_median.toPrecision(5)}</td>` +
      `<td style="color:${flagColor(s.avg_curvature_flag)}">${s.avg_curvature_median.toPrecision(5)}</td></tr>`,
  );
  box.innerHTML =
    `<p>curve length ${curve.length.toPrecision(6)}, ${curve.n_segments} segments, ` +
    `mode ${curve.mode}, alpha ${curve.alpha}</p>` +
    `<table>${head}${rows.join("")}</table>` +
    `<table>${segHead}${segRows.join("")}</table>`;
}

/** Chase one contour of the selected field at the given level (display only). */
function traceLevel(summary: GridSummary, field: string, level: number): Array<[number, number]> | null {
  const cells = summary.fields.get(field);
  if (cells === undefined) {
    return null;
  }
  const xs = summary.xs;
  const ys = summary.ys;
  const index = new Map<string, number>();
  for (const c of cells) {
    index.set(`${c.x}|${c.y}`, c.median);
  }
  const value = (i: number, j: number) => index.get(`${xs[i]}|${ys[j]}`);
  const segments: Array<[[number, number], [number, number]]> = [];
  const cross = (
    ax: number,
    ay: number,
    av: number,
    bx: number,
    by: number,
    bv: number,
  ): [number, number] | null => {
    if ((av < level) === (bv < level)) {
      return null;
    }
    const t = (level - av) / (bv - av);
    return [ax + t * (bx - ax), ay + t * (by - ay)];
  };
  for (let i = 0; i + 1 < xs.length; i++) {
    for (let j = 0; j + 1 < ys.length; j++) {
      const v00 = value(i, j);
      const v10 = value(i + 1, j);
      const v01 = value(i, j + 1);
      const v11 = value(i + 1, j + 1);
      if (v00 === undefined || v10 === undefined || v01 === undefined || v11 === undefined) {
        continue;
      }
      const pts: Array<[number, number]> = [];
      const edges = [
        cross(xs[i], ys[j], v00, xs[i + 1], ys[j], v10),
        cross(xs[i + 1], ys[j], v10, xs[i + 1], ys[j + 1], v11),
        cross(xs[i + 1], ys[j + 1], v11, xs[i], ys[j + 1], v01),
        cross(xs[i], ys[j + 1], v01, xs[i], ys[j], v00),
      ];
      for (const e of edges) {
        if (e !== null) {
          pts.push(e);
        }
      }
      if (pts.length === 2) {
        segments.push([pts[0], pts[1]]);
      }
    }
  }
  if (segments.length === 0) {
    return null;
  }
  // chain segments endpoint-to-endpoint into the longest path
  const used = new Array(segments.length).fill(false);
  const closeTo = (a: [number, number], b: [number, number]) =>
    Math.abs(a[0] - b[0]) < 1e-9 && Math.abs(a[1] - b[1]) < 1e-9;
  let best: Array<[number, number]> = [];
  for (let start = 0; start < segments.length; start++) {
    if (used[start]) {
      continue;
    }
    const chain: Array<[number, number]> = [segments[start][0], segments[start][1]];
    used[start] = true;
    let grew = true;
    while (grew) {
      grew = false;
      for (let k = 0; k < segments.length; k++) {
        if (used[k]) {
          continue;
        }
        const [a, b] = segments[k];
        const tail = chain[chain.length - 1];
        const head = chain[0];
        if (closeTo(a, tail)) {
          chain.push(b);
        } else if (closeTo(b, tail)) {
          chain.push(a);
        } else if (closeTo(a, head)) {
          chain.unshift(b);
        } else if (closeTo(b, head)) {
          chain.unshift(a);
        } else {
          continue;
        }
        used[k] = true;
        grew = true;
      }
    }
    if (chain.length > best.length) {
      best = chain;
    }
  }
  if (best.length < 2) {
    return null;
  }
  // thin long chains so the curve document stays manageable
  const maxPts = 40;
  if (best.length > maxPts) {
    const step = (best.length - 1) / (maxPts - 1);
    const thinned: Array<[number, number]> = [];
    for (let k = 0; k < maxPts; k++) {
      thinned.push(best[Math.round(k * step)]);
    }
    best = thinned;
  }
  return best;
}

async function loadFit(state: ViewState): Promise<void> {
  const input = el<HTMLInputElement>("fit-job");
  const jobId = input.value.trim();
  if (jobId === "") {
    banner("enter a fit job id first");
    return;
  }
  banner(null);
  try {
    const record = await state.client.job(jobId);
    if (record.status !== "done") {
      banner(`job ${jobId} is ${record.status}; wait for it to finish`);
      return;
    }
    const text = await state.client.gridSummary(jobId);
    state.summary = parseGridSummary(text);
    state.fitJobId = jobId;
    state.womble = null;
    render(state);
    renderWombleTable(state);
  } catch (err) {
    banner(describeError(err));
  }
}

async function submitWomble(state: ViewState): Promise<void> {
  if (state.fitJobId === null) {
    banner("load a finished fit before submitting a curve");
    return;
  }
  if (!state.editor.ready()) {
    banner("the sketch needs at least two points (and a level in level mode)");
    return;
  }
  banner(null);
  const requestId = state.tracker.issue();
  try {
    const outcome = await state.client.womble(state.fitJobId, state.editor.toDocument());
    if (!state.tracker.accept(requestId)) {
      return; // a newer submission already rendered
    }
    if (outcome.kind === "queued") {
      banner(`curve accepted as background job ${outcome.jobId}; poll it from the jobs panel`);
      return;
    }
    state.womble = outcome.payload;
    render(state);
    renderWombleTable(state);
  } catch (err) {
    if (state.tracker.accept(requestId)) {
      banner(describeError(err));
    }
  }
}

function wireControls(state: ViewState): void {
  el<HTMLButtonElement>("load-fit").addEventListener("click", () => void loadFit(state));
  const fieldSelect = el<HTMLSelectElement>("field");
  for (const name of FIELD_NAMES) {
    const opt = document.createElement("option");
    opt.value = name;
    opt.textContent = name;
    fieldSelect.appendChild(opt);
  }
  fieldSelect.value = state.field;
  fieldSelect.addEventListener("change", () => {
    state.field = fieldSelect.value;
    render(state); // sketch is preserved across field toggles
  });
  const modeSelect = el<HTMLSelectElement>("mode");
  modeSelect.addEventListener("change", () => {
    state.editor.setMode(modeSelect.value as "polyline" | "bezier" | "level");
    render(state);
  });
  el<HTMLInputElement>("closed").addEventListener("change", () => {
    state.editor.toggleClosed();
    render(state);
  });
  el<HTMLButtonElement>("trace").addEventListener("click", () => {
    const level = Number(el<HTMLInputElement>("level").value);
    if (!Number.isFinite(level)) {
      banner("enter a numeric level to trace");
      return;
    }
    if (state.summary === null) {
      banner("load a fit before tracing a level set");
      return;
    }
    const pts = traceLevel(state.summary, state.field, level);
    if (pts === null) {
      banner(`no ${state.field} contour at level ${level}`);
      return;
    }
    state.editor.loadTrace(pts, level, false);
    (el<HTMLSelectElement>("mode")).value = "level";
    banner(null);
    render(state);
  });
  el<HTMLButtonElement>("undo").addEventListener("click", () => {
    state.editor.undo();
    render(state);
  });
  el<HTMLButtonElement>("clear").addEventListener("click", () => {
    state.editor.clear();
    state.womble = null;
    render(state);
    renderWombleTable(state);
  });
  el<HTMLButtonElement>("submit").addEventListener("click", () => void submitWomble(state));
  const canvas = el<HTMLCanvasElement>("surface");
  canvas.addEventListener("click", (ev) => {
    if (state.summary === null || isEmpty(state.summary)) {
      return;
    }
    if (state.editor.mode === "level") {
      return; // level curves come from the trace button, not clicks
    }
    const rect = canvas.getBoundingClientRect();
    const tf = makeTransform(state.summary, canvas);
    const [x, y] = tf.toData(ev.clientX - rect.left, ev.clientY - rect.top);
    state.editor.addPoint(x, y);
    render(state);
  });
}

function main(): void {
  const params = new URLSearchParams(window.location.search);
  const base = params.get("api") ?? "";
  const state: ViewState = {
    client: new ServiceClient(base),
    fitJobId: null,
    summary: null,
    field: "z",
    editor: new SketchEditor(),
    tracker: new LatestTracker(),
    womble: null,
  };
  const legend = el<HTMLDivElement>("legend");
  legend.innerHTML =
    `<span style="color:${POSITIVE_COLOR}">&#9632; significantly positive</span> ` +
    `<span style="color:${NEGATIVE_COLOR}">&#9632; significantly negative</span> ` +
    `<span style="color:${NEUTRAL_COLOR}">&#9632; interval covers zero</span>`;
  wireControls(state);
  render(state);
}

main();
