// Render one SVG panel per (d, kappa) cell of a sweep.
//
// Usage: node dist/main.js <sweep_index.csv> <outdir> [--envelope]
//
// Curves come from the trace CSVs next to the manifest; a missing
// trace drops its curve with a console warning, an empty panel is an
// error.  With --envelope, runs whose report file is present get a
// dashed theoretical-envelope overlay computed from their sidecar
// constants.

import * as fs from "node:fs";
import * as path from "node:path";

import { envelopeCurve } from "./envelope.js";
import { buildPanelModel, curveFromTrace, groupPanels, labelFor,
         CurveModel, PanelModel } from "./panel.js";
import { renderPanelSvg } from "./svg.js";
import { hasReport, loadManifest, loadMeta, loadTrace } from "./trace.js";

export interface RenderResult {
  files: string[];
  panels: PanelModel[];
}

export function renderPanels(manifestPath: string, outdir: string,
                             overlayEnvelope = false): RenderResult {
  const dir = path.dirname(manifestPath);
  const rows = loadManifest(manifestPath);
  fs.mkdirSync(outdir, { recursive: true });

  const files: string[] = [];
  const panels: PanelModel[] = [];
  for (const [key, cell] of groupPanels(rows)) {
    const [d, kappa] = key.split("|").map(Number);
    const curves: CurveModel[] = [];
    for (const row of cell) {
      let curve: CurveModel;
      try {
        curve = curveFromTrace(labelFor(row), loadTrace(dir, row.runid));
      } catch {
        console.warn(`warning: skipping ${row.runid} (missing trace)`);
        continue;
      }
      curves.push(curve);
      if (overlayEnvelope && row.method === "bfgs"
          && hasReport(dir, row.runid)) {
        const meta = loadMeta(dir, row.runid);
        const tMax = curve.points[curve.points.length - 1]?.[0] ?? 1;
        const overlay = meta
          && envelopeCurve(meta, tMax, `${labelFor(row)} envelope`);
        if (overlay) curves.push(overlay);
      }
    }
    const model = buildPanelModel(d, kappa, curves);
    const file = path.join(outdir, `panel_d${d}_k${kappa}.svg`);
    fs.writeFileSync(file, renderPanelSvg(model));
    files.push(file);
    panels.push(model);
  }
  return { files, panels };
}

export function main(argv: string[]): number {
  const args = argv.filter((a) => a !== "--envelope");
  const overlay = argv.includes("--envelope");
  if (args.length !== 2) {
    console.error("usage: main.js <sweep_index.csv> <outdir> [--envelope]");
    return 2;
  }
  const result = renderPanels(args[0], args[1], overlay);
  console.log(`wrote ${result.files.length} panels to ${args[1]}`);
  return 0;
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("main.js") || entry.endsWith("main.ts")) {
  process.exit(main(process.argv.slice(2)));
}
