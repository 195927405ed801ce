// Theoretical linear-rate envelope (1 - e^{-psi/t} * 2a(1-b)/kappa)^t
// computed from a run's sidecar constants, for overlay on its panel.

import { RunMeta } from "./trace.js";
import { CurveModel, LOG_CLIP } from "./panel.js";

export function envelopeCurve(meta: RunMeta, tMax: number,
                              label: string): CurveModel | null {
  const psi = meta.constants.psi_Bbar0;
  const kappa = meta.constants.kappa;
  const { alpha, beta } = meta.solver;
  if (psi === undefined || !Number.isFinite(kappa)) return null;
  const points: Array<[number, number]> = [];
  for (let t = 1; t <= tMax; t++) {
    const rate = 1 - Math.exp(-psi / t) * (2 * alpha * (1 - beta)) / kappa;
    const value = Math.pow(rate, t);
    points.push([t, Math.max(value, LOG_CLIP)]);
    if (value <= LOG_CLIP) break;
  }
  return { label, kind: "envelope", points };
}
