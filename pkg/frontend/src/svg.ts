/**
 * Minimal standalone SVG line charts: axes, ticks, legend, event markers.
 * No DOM, no dependencies; output is a complete SVG document string.
 */

import type { Series } from "./csv.js";

export interface PanelSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  x: number[];
  series: Series[];
  /** Vertical marker positions in x units (schedule events). */
  markers?: number[];
  width?: number;
  height?: number;
}

const MARGIN = { top: 36, right: 24, bottom: 44, left: 72 };
const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
  "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
  "#98df8a", "#ff9896", "#c5b0d5", "#c49c94", "#f7b6d2",
];

export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return [lo, hi];
}

export function padExtent([lo, hi]: [number, number]): [number, number] {
  if (lo === hi) {
    const pad = lo === 0 ? 1 : Math.abs(lo) * 0.05;
    return [lo - pad, hi + pad];
  }
  const pad = (hi - lo) * 0.05;
  return [lo - pad, hi + pad];
}

export function niceTicks(lo: number, hi: number, count = 5): number[] {
  const span = hi - lo;
  const step0 = span / Math.max(count, 1);
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const candidates = [1, 2, 2.5, 5, 10].map((m) => m * mag);
  const step = candidates.find((s) => span / s <= count) ?? candidates[candidates.length - 1];
  const first = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = first; v <= hi + 1e-12 * span; v += step) {
    ticks.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return ticks;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e5 || a < 1e-3) return v.toExponential(1);
  return Number(v.toPrecision(5)).toString();
}

export function renderPanel(spec: PanelSpec): string {
  const width = spec.width ?? 840;
  const height = spec.height ?? 420;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  const [xLo, xHi] = padExtent(extent(spec.x));
  const all = spec.series.flatMap((s) => s.values);
  const [yLo, yHi] = padExtent(extent(all));
  const sx = (v: number) => MARGIN.left + ((v - xLo) / (xHi - xLo)) * plotW;
  const sy = (v: number) => MARGIN.top + plotH - ((v - yLo) / (yHi - yLo)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="12">`
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${width / 2}" y="20" text-anchor="middle" font-size="15">${spec.title}</text>`
  );

  for (const t of niceTicks(xLo, xHi, 8)) {
    const px = sx(t);
    parts.push(
      `<line x1="${px}" y1="${MARGIN.top}" x2="${px}" y2="${MARGIN.top + plotH}" ` +
        `stroke="#e0e0e0" stroke-width="1"/>`,
      `<text x="${px}" y="${MARGIN.top + plotH + 18}" text-anchor="middle">${fmt(t)}</text>`
    );
  }
  for (const t of niceTicks(yLo, yHi, 6)) {
    const py = sy(t);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${py}" x2="${MARGIN.left + plotW}" y2="${py}" ` +
        `stroke="#e0e0e0" stroke-width="1"/>`,
      `<text x="${MARGIN.left - 6}" y="${py + 4}" text-anchor="end">${fmt(t)}</text>`
    );
  }

  for (const m of spec.markers ?? []) {
    if (m < xLo || m > xHi) continue;
    const px = sx(m);
    parts.push(
      `<line x1="${px}" y1="${MARGIN.top}" x2="${px}" y2="${MARGIN.top + plotH}" ` +
        `stroke="#888888" stroke-width="1" stroke-dasharray="5,4"/>`
    );
  }

  spec.series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const pts = s.values.map((v, k) => `${sx(spec.x[k]).toFixed(2)},${sy(v).toFixed(2)}`);
    parts.push(
      `<polyline fill="none" stroke="${color}" stroke-width="1.5" points="${pts.join(" ")}"/>`
    );
  });

  // Legend along the top edge of the plot area.
  spec.series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    const lx = MARGIN.left + 8 + (i % 6) * 120;
    const ly = MARGIN.top + 14 + Math.floor(i / 6) * 16;
    parts.push(
      `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 18}" y2="${ly - 4}" stroke="${color}" stroke-width="2"/>`,
      `<text x="${lx + 22}" y="${ly}">${s.label}</text>`
    );
  });

  parts.push(
    `<line x1="${MARGIN.left}" y1="${MARGIN.top + plotH}" x2="${MARGIN.left + plotW}" ` +
      `y2="${MARGIN.top + plotH}" stroke="black"/>`,
    `<line x1="${MARGIN.left}" y1="${MARGIN.top}" x2="${MARGIN.left}" ` +
      `y2="${MARGIN.top + plotH}" stroke="black"/>`,
    `<text x="${MARGIN.left + plotW / 2}" y="${height - 8}" text-anchor="middle">` +
      `${spec.xLabel}</text>`,
    `<text x="16" y="${MARGIN.top + plotH / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 16 ${MARGIN.top + plotH / 2})">${spec.yLabel}</text>`,
    `</svg>`
  );
  return parts.join("\n");
}
