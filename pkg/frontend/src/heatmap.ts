// Diverging color scale for the theta heatmap. Updates are +/- alpha, so the
// scale is symmetric around zero: sign picks the hue, magnitude the strength.

export interface Rgb {
  r: number;
  g: number;
  b: number;
}

const NEGATIVE: Rgb = { r: 178, g: 24, b: 43 };
const POSITIVE: Rgb = { r: 33, g: 102, b: 172 };
const NEUTRAL: Rgb = { r: 247, g: 247, b: 247 };

function mix(a: Rgb, b: Rgb, t: number): Rgb {
  return {
    r: Math.round(a.r + (b.r - a.r) * t),
    g: Math.round(a.g + (b.g - a.g) * t),
    b: Math.round(a.b + (b.b - a.b) * t),
  };
}

/** Symmetric scale: value 0 maps to neutral regardless of the data range. */
export function divergingColor(value: number, maxAbs: number): Rgb {
  if (maxAbs <= 0 || value === 0) return NEUTRAL;
  const t = Math.min(Math.abs(value) / maxAbs, 1);
  return mix(NEUTRAL, value > 0 ? POSITIVE : NEGATIVE, t);
}

export function cssColor(c: Rgb): string {
  return `rgb(${c.r}, ${c.g}, ${c.b})`;
}

export function maxAbsValue(theta: number[][]): number {
  let m = 0;
  for (const row of theta) {
    for (const v of row) m = Math.max(m, Math.abs(v));
  }
  return m;
}

/** Per-cell opacity for the proposal distribution overlay. */
export function probabilityOpacity(p: number): number {
  return Math.max(0.08, Math.min(1, p));
}
