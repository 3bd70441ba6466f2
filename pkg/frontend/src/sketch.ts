/** Editable sketch state behind the canvas: add/move/remove vertices, toggle
 *  closure, switch drawing mode, and load a document echoed by the server. */

import { CurveDocument, CurveSketch, fromDocument, SketchMode, toDocument } from "./model.js";

export class SketchEditor {
  mode: SketchMode = "polyline";
  points: Array<[number, number]> = [];
  closed = false;
  level: number | null = null;

  addPoint(x: number, y: number): void {
    this.points.push([x, y]);
  }

  movePoint(index: number, x: number, y: number): void {
    if (index < 0 || index >= this.points.length) {
      throw new RangeError(`no vertex ${index}`);
    }
    this.points[index] = [x, y];
  }

  undo(): void {
    this.points.pop();
  }

  clear(): void {
    this.points = [];
    this.closed = false;
    this.level = null;
  }

  /** Switching modes keeps the drawn vertices so edits are not lost. */
  setMode(mode: SketchMode): void {
    this.mode = mode;
    if (mode !== "level") {
      this.level = null;
    }
  }

  setLevel(level: number): void {
    this.level = level;
  }

  toggleClosed(): void {
    this.closed = !this.closed;
  }

  /** Replace the sketch with a traced contour at the given level. */
  loadTrace(points: Array<[number, number]>, level: number, closed: boolean): void {
    this.mode = "level";
    this.points = points.map((p) => [p[0], p[1]]);
    this.level = level;
    this.closed = closed;
  }

  snapshot(): CurveSketch {
    return {
      mode: this.mode,
      points: this.points.map((p) => [p[0], p[1]]),
      closed: this.closed,
      level: this.level,
    };
  }

  /** True once the sketch can be serialized without error. */
  ready(): boolean {
    if (this.points.length < 2) {
      return false;
    }
    if (this.mode === "level" && this.level === null) {
      return false;
    }
    return true;
  }

  toDocument(): CurveDocument {
    return toDocument(this.snapshot());
  }

  loadDocument(doc: unknown): void {
    const sketch = fromDocument(doc);
    this.mode = sketch.mode;
    this.points = sketch.points;
    this.closed = sketch.closed;
    this.level = sketch.level;
  }
}
