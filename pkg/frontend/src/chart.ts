/**
 * Dependency-free metrics chart: accuracy per iteration as an SVG line,
 * minted-label counts as bars. Pure string builders so tests can assert on
 * the exact values rendered.
 */

import type { MetricsDoc } from "./api.js";

export interface Series {
  iterations: number[];
  accuracy: number[];
  minted: number[];
}

export function metricsToSeries(doc: MetricsDoc): Series {
  const rows = doc.iterations ?? [];
  return {
    iterations: rows.map((r) => r.iteration),
    accuracy: rows.map((r) => r.test_accuracy),
    minted: rows.map((r) => r.n_minted),
  };
}

function scale(values: number[], lo: number, hi: number, size: number): number[] {
  const span = hi - lo || 1;
  return values.map((v) => ((v - lo) / span) * size);
}

export function renderChart(series: Series, width = 560, height = 220): string {
  if (series.iterations.length === 0) {
    return `<div class="empty">No completed iterations yet.</div>`;
  }
  const pad = 34;
  const w = width - 2 * pad;
  const h = height - 2 * pad;
  const lo = Math.min(...series.accuracy, 0.5);
  const hi = Math.max(...series.accuracy, 1.0);
  const xs = scale(series.iterations, series.iterations[0],
                   series.iterations[series.iterations.length - 1] || 1, w);
  const ys = scale(series.accuracy, lo, hi, h);
  const points = xs.map((x, i) => `${(pad + x).toFixed(1)},${(pad + h - ys[i]).toFixed(1)}`).join(" ");

  const maxMint = Math.max(...series.minted, 1);
  const barW = Math.max(4, w / Math.max(series.minted.length, 1) - 6);
  const bars = series.minted
    .map((m, i) => {
      const bh = (m / maxMint) * (h * 0.5);
      const x = pad + xs[i] - barW / 2;
      return `<rect class="mint" x="${x.toFixed(1)}" y="${(pad + h - bh).toFixed(1)}" ` +
        `width="${barW.toFixed(1)}" height="${bh.toFixed(1)}"><title>minted ${m}</title></rect>`;
    })
    .join("");

  const labels = series.iterations
    .map((t, i) => `<text class="tick" x="${(pad + xs[i]).toFixed(1)}" y="${height - 8}">${t}</text>`)
    .join("");

  return (
    `<svg viewBox="0 0 ${width} ${height}" role="img" aria-label="accuracy per iteration">` +
    `<line class="axis" x1="${pad}" y1="${pad + h}" x2="${pad + w}" y2="${pad + h}"/>` +
    bars +
    `<polyline class="accuracy" fill="none" points="${points}"/>` +
    series.accuracy
      .map((a, i) =>
        `<circle class="dot" cx="${(pad + xs[i]).toFixed(1)}" cy="${(pad + h - ys[i]).toFixed(1)}" r="3">` +
        `<title>iteration ${series.iterations[i]}: ${a.toFixed(4)}</title></circle>`)
      .join("") +
    labels +
    `<text class="tick" x="${pad}" y="${pad - 10}">test accuracy ${lo.toFixed(2)}–${hi.toFixed(2)}</text>` +
    `</svg>`
  );
}
