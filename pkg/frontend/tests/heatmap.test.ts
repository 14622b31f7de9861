import { describe, expect, it } from 'vitest';

import { cssColor, divergingColor, maxAbsValue, probabilityOpacity } from '../src/heatmap';

describe('diverging scale', () => {
  it('zero maps to neutral', () => {
    expect(divergingColor(0, 10)).toEqual({ r: 247, g: 247, b: 247 });
  });

  it('is symmetric in mixing fraction around zero', () => {
    const pos = divergingColor(5, 10);
    const neg = divergingColor(-5, 10);
    expect(pos).not.toEqual(neg);
    // equal |value| blends both hues toward neutral by the same fraction
    const d = (c: { r: number; g: number; b: number }) =>
      Math.abs(247 - c.r) + Math.abs(247 - c.g) + Math.abs(247 - c.b);
    const fracPos = d(pos) / d(divergingColor(10, 10));
    const fracNeg = d(neg) / d(divergingColor(-10, 10));
    expect(Math.abs(fracPos - fracNeg)).toBeLessThan(0.01);
  });

  it('saturates at the max magnitude', () => {
    expect(divergingColor(99, 10)).toEqual(divergingColor(10, 10));
  });

  it('handles an all-zero heatmap', () => {
    expect(maxAbsValue([[0, 0]])).toBe(0);
    expect(divergingColor(0, 0)).toEqual({ r: 247, g: 247, b: 247 });
  });
});

describe('helpers', () => {
  it('formats css colors', () => {
    expect(cssColor({ r: 1, g: 2, b: 3 })).toBe('rgb(1, 2, 3)');
  });

  it('clamps probability opacity into a visible range', () => {
    expect(probabilityOpacity(0)).toBeCloseTo(0.08);
    expect(probabilityOpacity(2)).toBe(1);
    expect(probabilityOpacity(0.5)).toBe(0.5);
  });
});
