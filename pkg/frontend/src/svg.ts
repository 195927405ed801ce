// Static SVG rendering of a PanelModel: log-decade y ticks, one
// polyline path per curve, envelope overlays dashed, legend labels in
// curve order.

import { PanelModel } from "./panel.js";

const WIDTH = 640;
const HEIGHT = 480;
const MARGIN = { top: 36, right: 24, bottom: 44, left: 64 };

const COLORS: Record<string, string> = {
  LI: "#1f77b4",
  muI: "#d62728",
  I: "#2ca02c",
  cI: "#9467bd",
  gd: "#7f7f7f",
};

function color(label: string): string {
  return COLORS[label.replace(/ envelope$/, "")] ?? "#17becf";
}

export function renderPanelSvg(model: PanelModel): string {
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const [tLo, tHi] = model.xAxis.domain;
  const [yLo, yHi] = model.yAxis.domain;
  const logLo = Math.floor(Math.log10(yLo));
  const logHi = Math.ceil(Math.log10(yHi));

  const sx = (t: number) => MARGIN.left + ((t - tLo) / (tHi - tLo)) * plotW;
  const sy = (y: number) =>
    MARGIN.top + plotH
    - ((Math.log10(y) - logLo) / (logHi - logLo)) * plotH;

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" `
    + `height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">`);
  parts.push(`<title>d=${model.d} kappa=${model.kappa}</title>`);
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(`<text x="${WIDTH / 2}" y="20" text-anchor="middle" `
    + `font-size="15">d=${model.d}, kappa=${model.kappa}</text>`);

  // log-decade grid and tick labels
  for (let e = logLo; e <= logHi; e++) {
    const y = sy(Math.pow(10, e));
    parts.push(`<line class="grid" x1="${MARGIN.left}" y1="${y}" `
      + `x2="${WIDTH - MARGIN.right}" y2="${y}" stroke="#ddd"/>`);
    parts.push(`<text x="${MARGIN.left - 6}" y="${y + 4}" `
      + `text-anchor="end" font-size="11">1e${e}</text>`);
  }
  const xTicks = 5;
  for (let i = 0; i <= xTicks; i++) {
    const t = tLo + ((tHi - tLo) * i) / xTicks;
    parts.push(`<text x="${sx(t)}" y="${HEIGHT - MARGIN.bottom + 18}" `
      + `text-anchor="middle" font-size="11">${Math.round(t)}</text>`);
  }
  parts.push(`<text x="${WIDTH / 2}" y="${HEIGHT - 8}" text-anchor="middle" `
    + `font-size="12">iteration t</text>`);
  parts.push(`<text transform="rotate(-90 14 ${HEIGHT / 2})" x="14" `
    + `y="${HEIGHT / 2}" text-anchor="middle" font-size="12">`
    + `suboptimality ratio</text>`);

  for (const curve of model.curves) {
    const d = curve.points
      .map(([t, y], i) => `${i === 0 ? "M" : "L"}${sx(t).toFixed(2)} `
        + `${sy(y).toFixed(2)}`)
      .join(" ");
    const dash = curve.kind === "envelope" ? ' stroke-dasharray="6 4"' : "";
    parts.push(`<path class="curve" data-label="${curve.label}" `
      + `data-kind="${curve.kind}" d="${d}" fill="none" `
      + `stroke="${color(curve.label)}" stroke-width="1.6"${dash}/>`);
  }

  model.curves.forEach((curve, i) => {
    const y = MARGIN.top + 14 + 16 * i;
    const x = WIDTH - MARGIN.right - 120;
    const dash = curve.kind === "envelope" ? ' stroke-dasharray="6 4"' : "";
    parts.push(`<line x1="${x}" y1="${y - 4}" x2="${x + 26}" y2="${y - 4}" `
      + `stroke="${color(curve.label)}" stroke-width="1.6"${dash}/>`);
    parts.push(`<text class="legend" x="${x + 32}" y="${y}" `
      + `font-size="12">${curve.label}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n");
}
