// Hand-rolled SVG charts. Inputs are server-computed samples; nothing is
// recomputed here beyond pixel coordinates.

import type { DecisionResponse } from "./api.js";

const WIDTH = 560;
const HEIGHT = 240;
const PAD = { left: 44, right: 12, top: 12, bottom: 28 };

function xPixel(x: number, lo: number, hi: number): number {
  return PAD.left + ((x - lo) / (hi - lo)) * (WIDTH - PAD.left - PAD.right);
}

function yPixel(y: number, max: number): number {
  const span = HEIGHT - PAD.top - PAD.bottom;
  return HEIGHT - PAD.bottom - (y / max) * span;
}

function esc(value: string): string {
  return value.replace(/&/g, "&amp;").replace(/</g, "&lt;");
}

/**
 * Posterior density with the target key and strongest key shaded, matching
 * the interim-panel style: target in dark shading, strongest in grey (they
 * coincide when the recommendation is to stay).
 */
export function densityChart(decision: DecisionResponse): string {
  const { x, y } = decision.density;
  const yMax = Math.max(...y, 1e-9) * 1.08;
  const target = decision.keys[decision.target_key];
  const strongest = decision.keys[decision.strongest_key];

  const band = (lo: number, hi: number, fill: string, opacity: number) => {
    const x0 = xPixel(lo, 0, 1);
    const x1 = xPixel(hi, 0, 1);
    const y0 = yPixel(0, yMax);
    const y1 = PAD.top;
    return `<rect x="${x0.toFixed(1)}" y="${y1}" width="${(x1 - x0).toFixed(1)}" height="${(
      y0 - y1
    ).toFixed(1)}" fill="${fill}" opacity="${opacity}"/>`;
  };

  const points = x
    .map((xv, i) => `${xPixel(xv, 0, 1).toFixed(1)},${yPixel(y[i], yMax).toFixed(1)}`)
    .join(" ");

  const ticks = [0, 0.2, 0.4, 0.6, 0.8, 1]
    .map((t) => {
      const px = xPixel(t, 0, 1);
      return (
        `<line x1="${px}" y1="${HEIGHT - PAD.bottom}" x2="${px}" y2="${HEIGHT - PAD.bottom + 4}" stroke="#444"/>` +
        `<text x="${px}" y="${HEIGHT - 8}" text-anchor="middle" font-size="11">${t}</text>`
      );
    })
    .join("");

  return `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img" aria-label="posterior density">
  ${band(strongest.lo, strongest.hi, "#9e9e9e", 0.45)}
  ${band(target.lo, target.hi, "#37474f", 0.35)}
  <polyline points="${points}" fill="none" stroke="#1565c0" stroke-width="2"/>
  <line x1="${PAD.left}" y1="${HEIGHT - PAD.bottom}" x2="${WIDTH - PAD.right}" y2="${HEIGHT - PAD.bottom}" stroke="#444"/>
  ${ticks}
  <text x="${(WIDTH + PAD.left) / 2}" y="${HEIGHT - 20}" text-anchor="middle" font-size="11" fill="#555">toxicity probability</text>
</svg>`;
}

export interface Bar {
  label: string;
  value: number;
}

/** Horizontal-axis bar chart for per-dose percentages (0..100). */
export function barChart(bars: Bar[], title: string, color = "#1565c0"): string {
  const max = Math.max(100 * 0.000001, ...bars.map((b) => b.value), 10);
  const slot = (WIDTH - PAD.left - PAD.right) / Math.max(bars.length, 1);
  const body = bars
    .map((bar, i) => {
      const h = ((HEIGHT - PAD.top - PAD.bottom) * bar.value) / (max * 1.1);
      const cx = PAD.left + slot * i + slot * 0.5;
      const x0 = PAD.left + slot * i + slot * 0.15;
      const y0 = HEIGHT - PAD.bottom - h;
      return (
        `<rect x="${x0.toFixed(1)}" y="${y0.toFixed(1)}" width="${(slot * 0.7).toFixed(1)}" height="${h.toFixed(1)}" fill="${color}"/>` +
        `<text x="${cx}" y="${HEIGHT - 10}" text-anchor="middle" font-size="11">${esc(bar.label)}</text>` +
        `<text x="${cx}" y="${(y0 - 4).toFixed(1)}" text-anchor="middle" font-size="10" fill="#333">${bar.value.toFixed(1)}</text>`
      );
    })
    .join("");
  return `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img" aria-label="${esc(title)}">
  <text x="${PAD.left}" y="${PAD.top + 4}" font-size="12" fill="#333">${esc(title)}</text>
  <line x1="${PAD.left}" y1="${HEIGHT - PAD.bottom}" x2="${WIDTH - PAD.right}" y2="${HEIGHT - PAD.bottom}" stroke="#444"/>
  ${body}
</svg>`;
}

/** q(d) curve for interior insertion prompts. */
export function qCurveChart(samples: { dose: number; q: number }[], proposed: number): string {
  if (!samples.length) return "";
  const lo = samples[0].dose;
  const hi = samples[samples.length - 1].dose;
  const qMax = Math.max(...samples.map((s) => s.q), 1e-9) * 1.1;
  const points = samples
    .map((s) => `${xPixel(s.dose, lo, hi).toFixed(1)},${yPixel(s.q, qMax).toFixed(1)}`)
    .join(" ");
  const px = xPixel(proposed, lo, hi);
  return `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img" aria-label="target-key probability curve">
  <polyline points="${points}" fill="none" stroke="#2e7d32" stroke-width="2"/>
  <line x1="${px.toFixed(1)}" y1="${PAD.top}" x2="${px.toFixed(1)}" y2="${HEIGHT - PAD.bottom}" stroke="#c62828" stroke-dasharray="4 3"/>
  <line x1="${PAD.left}" y1="${HEIGHT - PAD.bottom}" x2="${WIDTH - PAD.right}" y2="${HEIGHT - PAD.bottom}" stroke="#444"/>
  <text x="${px.toFixed(1)}" y="${HEIGHT - 10}" text-anchor="middle" font-size="11">${proposed.toFixed(1)} mg</text>
</svg>`;
}
