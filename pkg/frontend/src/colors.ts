/** Color conventions for significance flags and the surface heatmap. */

import { SchemaError } from "./model.js";

export type SignificanceFlag = "positive" | "negative" | "none";

/** Significantly positive: green. */
export const POSITIVE_COLOR = "#2e7d32";
/** Significantly negative: cyan. */
export const NEGATIVE_COLOR = "#00bcd4";
/** Interval straddles zero: neutral grey. */
export const NEUTRAL_COLOR = "#bdbdbd";

export function isFlag(value: unknown): value is SignificanceFlag {
  return value === "positive" || value === "negative" || value === "none";
}

export function flagColor(flag: SignificanceFlag): string {
  switch (flag) {
    case "positive":
      return POSITIVE_COLOR;
    case "negative":
      return NEGATIVE_COLOR;
    case "none":
      return NEUTRAL_COLOR;
    default:
      throw new SchemaError(`unknown significance flag: ${String(flag)}`);
  }
}

/** Diverging blue-white-red ramp for posterior medians, t in [0, 1]. */
export function heatColor(t: number): string {
  const u = Math.min(1, Math.max(0, t));
  let r: number;
  let g: number;
  let b: number;
  if (u < 0.5) {
    const w = u / 0.5;
    r = 33 + (255 - 33) * w;
    g = 102 + (255 - 102) * w;
    b = 172 + (255 - 172) * w;
  } else {
    const w = (u - 0.5) / 0.5;
    r = 255 + (178 - 255) * w;
    g = 255 + (24 - 255) * w;
    b = 255 + (43 - 255) * w;
  }
  return `rgb(${Math.round(r)}, ${Math.round(g)}, ${Math.round(b)})`;
}
