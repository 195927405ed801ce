// Readers for the solver CLI's file formats: the sweep manifest, the
// per-run trace CSV (fixed column order, empty cells for quantities the
// run did not record) and the JSON sidecar with the run's constants.

import * as fs from "node:fs";
import * as path from "node:path";

export interface ManifestRow {
  runid: string;
  d: number;
  kappa: number;
  init: string;
  method: string;
  status: string;
}

export interface TraceCurve {
  t: number[];
  gapRatio: number[];
}

export interface RunMeta {
  constants: {
    kappa: number;
    psi_Bbar0?: number;
    [key: string]: unknown;
  };
  solver: { alpha: number; beta: number; [key: string]: unknown };
  [key: string]: unknown;
}

function splitCsvLine(line: string): string[] {
  return line.split(",");
}

export function parseManifest(text: string): ManifestRow[] {
  const lines = text.trim().split(/\r?\n/);
  const header = splitCsvLine(lines[0]);
  const idx = (name: string) => {
    const i = header.indexOf(name);
    if (i < 0) throw new Error(`manifest is missing column ${name}`);
    return i;
  };
  const [iRun, iD, iK, iInit, iMethod, iStatus] = [
    idx("runid"), idx("d"), idx("kappa"), idx("init"), idx("method"),
    idx("status"),
  ];
  return lines.slice(1).filter((l) => l.length > 0).map((line) => {
    const cells = splitCsvLine(line);
    return {
      runid: cells[iRun],
      d: Number(cells[iD]),
      kappa: Number(cells[iK]),
      init: cells[iInit],
      method: cells[iMethod],
      status: cells[iStatus],
    };
  });
}

export function parseTraceCsv(text: string): TraceCurve {
  const lines = text.trim().split(/\r?\n/);
  const header = splitCsvLine(lines[0]);
  const iT = header.indexOf("t");
  const iRatio = header.indexOf("f_gap_ratio");
  if (iT < 0 || iRatio < 0) {
    throw new Error("trace CSV lacks t/f_gap_ratio columns");
  }
  const t: number[] = [];
  const gapRatio: number[] = [];
  for (const line of lines.slice(1)) {
    if (!line) continue;
    const cells = splitCsvLine(line);
    const ratio = cells[iRatio];
    t.push(Number(cells[iT]));
    gapRatio.push(ratio === "" ? NaN : Number(ratio));
  }
  return { t, gapRatio };
}

export function loadManifest(manifestPath: string): ManifestRow[] {
  return parseManifest(fs.readFileSync(manifestPath, "utf8"));
}

export function tracePath(dir: string, runid: string): string {
  return path.join(dir, `${runid}_trace.csv`);
}

export function loadTrace(dir: string, runid: string): TraceCurve {
  return parseTraceCsv(fs.readFileSync(tracePath(dir, runid), "utf8"));
}

export function loadMeta(dir: string, runid: string): RunMeta | null {
  const metaPath = path.join(dir, `${runid}_meta.json`);
  if (!fs.existsSync(metaPath)) return null;
  return JSON.parse(fs.readFileSync(metaPath, "utf8")) as RunMeta;
}

export function hasReport(dir: string, runid: string): boolean {
  return fs.existsSync(path.join(dir, `${runid}_report.txt`));
}
