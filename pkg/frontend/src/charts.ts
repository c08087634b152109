/** Dependency-free SVG builders for the k charts and the cumulative bar.
 * Chart data comes from experiment report exports; nothing is recomputed. */

import type { CumulativePoint } from "./store.js";

const WIDTH = 420;
const HEIGHT = 180;
const PAD = 28;

function esc(value: string): string {
  return value.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function kHistogram(kValues: number[], bins = 12): string {
  if (kValues.length === 0) {
    return `<svg class="chart" viewBox="0 0 ${WIDTH} ${HEIGHT}"><text x="10" y="20">no experiment report</text></svg>`;
  }
  const max = Math.max(...kValues);
  const width = Math.max(1, Math.ceil((max + 1) / bins));
  const counts = new Array<number>(bins).fill(0);
  for (const k of kValues) {
    counts[Math.min(bins - 1, Math.floor(k / width))]++;
  }
  const peak = Math.max(...counts);
  const barW = (WIDTH - 2 * PAD) / bins;
  const bars = counts.map((count, i) => {
    const h = peak === 0 ? 0 : (count / peak) * (HEIGHT - 2 * PAD);
    const x = PAD + i * barW;
    const y = HEIGHT - PAD - h;
    return `<rect x="${x.toFixed(1)}" y="${y.toFixed(1)}" width="${(barW - 2).toFixed(1)}" height="${h.toFixed(1)}" class="bar"><title>k in [${i * width}, ${(i + 1) * width}): ${count}</title></rect>`;
  }).join("");
  return `<svg class="chart" viewBox="0 0 ${WIDTH} ${HEIGHT}">${bars}` +
    `<text x="${PAD}" y="${HEIGHT - 8}" class="axis">k (bin width ${width})</text></svg>`;
}

export function kVsMarginScatter(pairs: Array<[number, number]>): string {
  if (pairs.length === 0) {
    return `<svg class="chart" viewBox="0 0 ${WIDTH} ${HEIGHT}"><text x="10" y="20">no experiment report</text></svg>`;
  }
  const maxK = Math.max(...pairs.map(([k]) => k), 1);
  const dots = pairs.map(([k, margin]) => {
    const x = PAD + (k / maxK) * (WIDTH - 2 * PAD);
    const y = HEIGHT - PAD - (Math.min(margin, 0.5) / 0.5) * (HEIGHT - 2 * PAD);
    return `<circle cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="3" class="dot"><title>k=${k}, margin=${margin.toFixed(3)}</title></circle>`;
  }).join("");
  return `<svg class="chart" viewBox="0 0 ${WIDTH} ${HEIGHT}">${dots}` +
    `<text x="${PAD}" y="${HEIGHT - 8}" class="axis">k vs |p - 0.5|</text></svg>`;
}

/** Running cumulative-delta bar: one segment per member, the threshold
 * line, and the crossing point where the estimate passes tau. */
export function cumulativeBar(
  trace: CumulativePoint[], originalProb: number, tau: number,
): string {
  if (trace.length === 0) {
    return "";
  }
  const values = [originalProb, tau, ...trace.map((p) => p.cumulative)];
  const lo = Math.min(...values) - 0.02;
  const hi = Math.max(...values) + 0.02;
  const scaleY = (v: number): number =>
    HEIGHT - PAD - ((v - lo) / (hi - lo)) * (HEIGHT - 2 * PAD);
  const stepX = (WIDTH - 2 * PAD) / trace.length;
  let path = `M ${PAD} ${scaleY(originalProb).toFixed(1)}`;
  trace.forEach((point, i) => {
    path += ` L ${(PAD + (i + 1) * stepX).toFixed(1)} ${scaleY(point.cumulative).toFixed(1)}`;
  });
  const tauY = scaleY(tau).toFixed(1);
  const last = trace[trace.length - 1];
  return `<svg class="chart" viewBox="0 0 ${WIDTH} ${HEIGHT}">` +
    `<line x1="${PAD}" y1="${tauY}" x2="${WIDTH - PAD}" y2="${tauY}" class="tau"/>` +
    `<text x="${WIDTH - PAD - 52}" y="${Number(tauY) - 4}" class="axis">tau</text>` +
    `<path d="${path}" class="trace" fill="none"/>` +
    `<circle cx="${WIDTH - PAD}" cy="${scaleY(last.cumulative).toFixed(1)}" r="4" class="crossing"><title>${esc(`estimated ${last.cumulative.toFixed(4)}`)}</title></circle>` +
    `</svg>`;
}
