// Pure pixel math for the traversability overlay; kept DOM-free for testing.

export interface OverlayOptions {
  showPooled: boolean;
  showUncertainty: boolean;
  pooledAlpha: number; // 0..1 blend strength for the signed colormap
}

export const DEFAULT_OVERLAY: OverlayOptions = {
  showPooled: true,
  showUncertainty: false,
  pooledAlpha: 0.45,
};

// Signed colormap: negative evidence is red, positive is green, zero is dark.
export function pooledColor(value: number): [number, number, number] {
  const v = Math.max(-1, Math.min(1, value));
  if (v >= 0) {
    return [0, Math.round(255 * v), 0];
  }
  return [Math.round(255 * -v), 0, 0];
}

// Uncertainty renders as warm heat whose opacity tracks the value.
export function uncertaintyAlpha(value: number): number {
  const u = Math.max(0, Math.min(1, value));
  return Math.round(255 * u);
}

export function composeOverlay(
  base: Uint8ClampedArray,
  width: number,
  height: number,
  pooled: Float32Array | null,
  uncertainty: Float32Array | null,
  options: OverlayOptions,
): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(base); // never mutate the input
  const pixels = width * height;
  for (let i = 0; i < pixels; i++) {
    const o = i * 4;
    if (options.showPooled && pooled !== null) {
      const [r, g, b] = pooledColor(pooled[i]);
      const a = options.pooledAlpha;
      out[o] = Math.round(out[o] * (1 - a) + r * a);
      out[o + 1] = Math.round(out[o + 1] * (1 - a) + g * a);
      out[o + 2] = Math.round(out[o + 2] * (1 - a) + b * a);
    }
    if (options.showUncertainty && uncertainty !== null) {
      const heat = uncertaintyAlpha(uncertainty[i]) / 255;
      out[o] = Math.round(out[o] * (1 - heat) + 255 * heat);
      out[o + 1] = Math.round(out[o + 1] * (1 - heat) + 80 * heat);
      out[o + 2] = Math.round(out[o + 2] * (1 - heat) + 180 * heat);
    }
    out[o + 3] = 255;
  }
  return out;
}

// ROI bounding box in pixel coordinates for the given canvas size.
export function roiBounds(
  polygon: [number, number][],
  width: number,
  height: number,
): { x: number; y: number; w: number; h: number } {
  const xs = polygon.map((p) => p[0] * width);
  const ys = polygon.map((p) => p[1] * height);
  const x = Math.max(0, Math.floor(Math.min(...xs)));
  const y = Math.max(0, Math.floor(Math.min(...ys)));
  const x2 = Math.min(width, Math.ceil(Math.max(...xs)));
  const y2 = Math.min(height, Math.ceil(Math.max(...ys)));
  return { x, y, w: Math.max(1, x2 - x), h: Math.max(1, y2 - y) };
}
