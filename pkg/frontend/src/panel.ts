// Panel models: one (d, kappa) cell of the sweep rendered as iteration
// count against suboptimality ratio on a log axis, one curve per
// initialization scheme plus the gradient-descent baseline, and an
// optional theoretical-envelope overlay.

import { ManifestRow, TraceCurve } from "./trace.js";

// Ratios that converged below the float floor are clipped here before
// log scaling.
export const LOG_CLIP = 1e-16;
const MAX_POINTS_PER_CURVE = 2000;

export type CurveKind = "run" | "envelope";

export interface CurveModel {
  label: string;
  kind: CurveKind;
  points: Array<[number, number]>; // (t, clipped ratio)
}

export interface PanelModel {
  d: number;
  kappa: number;
  xAxis: { type: "linear"; domain: [number, number] };
  yAxis: { type: "log"; domain: [number, number] };
  curves: CurveModel[];
}

export const CURVE_ORDER = ["LI", "muI", "I", "cI", "gd"];

function decimate(points: Array<[number, number]>): Array<[number, number]> {
  if (points.length <= MAX_POINTS_PER_CURVE) return points;
  const stride = Math.ceil(points.length / MAX_POINTS_PER_CURVE);
  const out = points.filter((_, i) => i % stride === 0);
  if (out[out.length - 1] !== points[points.length - 1]) {
    out.push(points[points.length - 1]);
  }
  return out;
}

export function curveFromTrace(label: string, trace: TraceCurve,
                               kind: CurveKind = "run"): CurveModel {
  const points: Array<[number, number]> = [];
  for (let i = 0; i < trace.t.length; i++) {
    const ratio = trace.gapRatio[i];
    if (Number.isNaN(ratio)) continue;
    points.push([trace.t[i], Math.max(ratio, LOG_CLIP)]);
  }
  return { label, kind, points: decimate(points) };
}

export function buildPanelModel(d: number, kappa: number,
                                curves: CurveModel[]): PanelModel {
  if (curves.length === 0 || curves.every((c) => c.points.length === 0)) {
    throw new Error(`panel d=${d} kappa=${kappa} has no curves`);
  }
  let tMax = 1;
  let yMin = 1;
  let yMax = 1;
  for (const curve of curves) {
    for (const [t, y] of curve.points) {
      tMax = Math.max(tMax, t);
      yMin = Math.min(yMin, y);
      yMax = Math.max(yMax, y);
    }
  }
  return {
    d,
    kappa,
    xAxis: { type: "linear", domain: [0, tMax] },
    yAxis: { type: "log", domain: [yMin, Math.max(yMax, 1)] },
    curves,
  };
}

export function groupPanels(rows: ManifestRow[]): Map<string, ManifestRow[]> {
  const panels = new Map<string, ManifestRow[]>();
  for (const row of rows) {
    const key = `${row.d}|${row.kappa}`;
    const cell = panels.get(key) ?? [];
    cell.push(row);
    panels.set(key, cell);
  }
  for (const cell of panels.values()) {
    cell.sort((a, b) => CURVE_ORDER.indexOf(labelFor(a))
      - CURVE_ORDER.indexOf(labelFor(b)));
  }
  return panels;
}

export function labelFor(row: ManifestRow): string {
  return row.method === "gd" ? "gd" : row.init;
}
