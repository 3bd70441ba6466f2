/** Curve sketch model and its mapping onto the curve exchange document.
 *
 * The sketch is what the user edits on the canvas; the document is the JSON
 * shape the analysis service (and its CLI) accept verbatim.  The mapping must
 * be lossless in both directions so a sketch can make the round trip through
 * the server and come back identical.
 */

export type SketchMode = "polyline" | "bezier" | "level";

export type DocumentKind = "polyline" | "bezier" | "levelset";

export interface CurveSketch {
  mode: SketchMode;
  /** Vertices (polyline), control points (bezier) or traced contour (level),
   *  in data coordinates. */
  points: Array<[number, number]>;
  closed: boolean;
  /** Chosen contour level; only meaningful in level mode. */
  level: number | null;
}

export interface CurveDocument {
  kind: DocumentKind;
  points: number[][];
  closed: boolean;
  level: number | null;
}

/** Raised when incoming data does not match the documented schema. */
export class SchemaError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SchemaError";
  }
}

const MODE_TO_KIND: Record<SketchMode, DocumentKind> = {
  polyline: "polyline",
  bezier: "bezier",
  level: "levelset",
};

const KIND_TO_MODE: Record<DocumentKind, SketchMode> = {
  polyline: "polyline",
  bezier: "bezier",
  levelset: "level",
};

function isFinitePair(p: unknown): p is [number, number] {
  return (
    Array.isArray(p) &&
    p.length === 2 &&
    typeof p[0] === "number" &&
    typeof p[1] === "number" &&
    Number.isFinite(p[0]) &&
    Number.isFinite(p[1])
  );
}

/** Validate a sketch and serialize it to the exchange document. */
export function toDocument(sketch: CurveSketch): CurveDocument {
  if (!(sketch.mode in MODE_TO_KIND)) {
    throw new SchemaError(`unknown sketch mode: ${String(sketch.mode)}`);
  }
  if (!Array.isArray(sketch.points) || sketch.points.length < 2) {
    throw new SchemaError("a curve needs at least two points");
  }
  for (const p of sketch.points) {
    if (!isFinitePair(p)) {
      throw new SchemaError("sketch points must be finite [x, y] pairs");
    }
  }
  if (sketch.mode === "level") {
    if (typeof sketch.level !== "number" || !Number.isFinite(sketch.level)) {
      throw new SchemaError("level mode requires a finite contour level");
    }
  }
  return {
    kind: MODE_TO_KIND[sketch.mode],
    points: sketch.points.map((p) => [p[0], p[1]]),
    closed: Boolean(sketch.closed),
    level: sketch.mode === "level" ? sketch.level : null,
  };
}

/** Parse an exchange document (e.g. echoed back by the server) into a sketch. */
export function fromDocument(doc: unknown): CurveSketch {
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new SchemaError("curve document must be a JSON object");
  }
  const rec = doc as Record<string, unknown>;
  const kind = rec["kind"];
  if (kind !== "polyline" && kind !== "bezier" && kind !== "levelset") {
    throw new SchemaError(`unknown curve kind: ${String(kind)}`);
  }
  const rawPoints = rec["points"];
  if (!Array.isArray(rawPoints) || rawPoints.length < 2) {
    throw new SchemaError("curve document needs at least two points");
  }
  const points: Array<[number, number]> = rawPoints.map((p) => {
    if (!isFinitePair(p)) {
      throw new SchemaError("curve points must be finite [x, y] pairs");
    }
    return [p[0], p[1]];
  });
  const level = rec["level"];
  if (level !== undefined && level !== null && typeof level !== "number") {
    throw new SchemaError("curve level must be a number or null");
  }
  if (kind === "levelset" && (typeof level !== "number" || !Number.isFinite(level))) {
    throw new SchemaError("levelset document requires a numeric level");
  }
  return {
    mode: KIND_TO_MODE[kind],
    points,
    closed: Boolean(rec["closed"]),
    level: kind === "levelset" ? (level as number) : null,
  };
}
