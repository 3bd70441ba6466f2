/** Parser for the grid-summary CSV served at /v1/grid-summary.
 *
 * Expected layout: header `x,y,field,median,lower,upper,flag`, one row per
 * grid node per field.  Anything that deviates raises SchemaError so the app
 * can show a banner instead of rendering garbage.
 */

import { isFlag, SignificanceFlag } from "./colors.js";
import { SchemaError } from "./model.js";

export const GRID_HEADER = ["x", "y", "field", "median", "lower", "upper", "flag"];

/** Fields the service can summarize, in display order. */
export const FIELD_NAMES = [
  "z",
  "grad1",
  "grad2",
  "hess11",
  "hess12",
  "hess22",
  "divergence",
  "laplacian",
  "eigen1",
  "eigen2",
  "gaussian",
  "theta_pc",
];

export interface GridCell {
  x: number;
  y: number;
  median: number;
  lower: number;
  upper: number;
  flag: SignificanceFlag;
}

export interface GridSummary {
  /** Field name -> cells in file order. */
  fields: Map<string, GridCell[]>;
  /** Distinct x and y coordinates, ascending. */
  xs: number[];
  ys: number[];
}

function parseNumber(token: string, what: string, line: number): number {
  const value = Number(token);
  if (token.trim() === "" || !Number.isFinite(value)) {
    throw new SchemaError(`line ${line}: ${what} is not a finite number: ${token}`);
  }
  return value;
}

export function parseGridSummary(text: string): GridSummary {
  const lines = text.split(/\r?\n/).filter((ln) => ln.length > 0);
  if (lines.length === 0) {
    throw new SchemaError("grid summary is empty (missing header)");
  }
  const header = lines[0].split(",");
  if (header.length !== GRID_HEADER.length || header.some((h, i) => h !== GRID_HEADER[i])) {
    throw new SchemaError(`unexpected grid summary header: ${lines[0]}`);
  }
  const fields = new Map<string, GridCell[]>();
  const xs = new Set<number>();
  const ys = new Set<number>();
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== GRID_HEADER.length) {
      throw new SchemaError(`line ${i + 1}: expected ${GRID_HEADER.length} columns, got ${parts.length}`);
    }
    const cell: GridCell = {
      x: parseNumber(parts[0], "x", i + 1),
      y: parseNumber(parts[1], "y", i + 1),
      median: parseNumber(parts[3], "median", i + 1),
      lower: parseNumber(parts[4], "lower", i + 1),
      upper: parseNumber(parts[5], "upper", i + 1),
      flag: parts[6] as SignificanceFlag,
    };
    if (!isFlag(cell.flag)) {
      throw new SchemaError(`line ${i + 1}: unknown significance flag: ${parts[6]}`);
    }
    const name = parts[2];
    if (name === "") {
      throw new SchemaError(`line ${i + 1}: empty field name`);
    }
    let bucket = fields.get(name);
    if (bucket === undefined) {
      bucket = [];
      fields.set(name, bucket);
    }
    bucket.push(cell);
    xs.add(cell.x);
    ys.add(cell.y);
  }
  return {
    fields,
    xs: Array.from(xs).sort((a, b) => a - b),
    ys: Array.from(ys).sort((a, b) => a - b),
  };
}

/** True when the summary holds no cells at all (render the empty state). */
export function isEmpty(summary: GridSummary): boolean {
  return summary.fields.size === 0;
}
