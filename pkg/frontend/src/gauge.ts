/** Semi-circular gauge rendering as an SVG string (DOM-free). */

const WIDTH = 220;
const HEIGHT = 140;
const CX = WIDTH / 2;
const CY = 120;
const RADIUS = 88;

function polar(angleDeg: number, radius: number): [number, number] {
  const rad = (Math.PI / 180) * angleDeg;
  return [CX + radius * Math.cos(rad), CY - radius * Math.sin(rad)];
}

function arcPath(fromDeg: number, toDeg: number, radius: number): string {
  const [x0, y0] = polar(fromDeg, radius);
  const [x1, y1] = polar(toDeg, radius);
  const large = Math.abs(fromDeg - toDeg) > 180 ? 1 : 0;
  return `M ${x0.toFixed(2)} ${y0.toFixed(2)} A ${radius} ${radius} 0 ${large} 1 ${x1.toFixed(
    2,
  )} ${y1.toFixed(2)}`;
}

function bandColor(probability: number): string {
  if (probability < 0.1) return "#2e7d32";
  if (probability < 0.3) return "#f9a825";
  return "#c62828";
}

/** Gauge sweeping 180deg (left = 0, right = 1) with a needle at the risk. */
export function renderGauge(label: string, probability: number): string {
  const p = Math.min(Math.max(probability, 0), 1);
  const needleDeg = 180 - 180 * p;
  const [nx, ny] = polar(needleDeg, RADIUS - 14);
  const pct = (100 * p).toFixed(1);
  const parts = [
    `<svg class="gauge" viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img" aria-label="${label}: ${pct}%">`,
    `<path d="${arcPath(180, 0, RADIUS)}" fill="none" stroke="#e0e0e0" stroke-width="14"/>`,
    p > 0
      ? `<path d="${arcPath(180, needleDeg, RADIUS)}" fill="none" stroke="${bandColor(
          p,
        )}" stroke-width="14"/>`
      : "",
    `<line x1="${CX}" y1="${CY}" x2="${nx.toFixed(2)}" y2="${ny.toFixed(
      2,
    )}" stroke="#37474f" stroke-width="3"/>`,
    `<circle cx="${CX}" cy="${CY}" r="5" fill="#37474f"/>`,
    `<text x="${CX}" y="${CY - 28}" text-anchor="middle" class="gauge-value">${pct}%</text>`,
    `<text x="${CX}" y="${CY + 16}" text-anchor="middle" class="gauge-label">${label}</text>`,
    `</svg>`,
  ];
  return parts.filter((s) => s.length > 0).join("");
}
