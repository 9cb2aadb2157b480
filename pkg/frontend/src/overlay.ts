import type { Instance } from "./types.js";

/**
 * Aspect-preserving mapping from response image coordinates to canvas
 * coordinates (letterboxed contain fit). Kept pure so the coordinate math is
 * pixel-testable without a real canvas.
 */
export interface FitTransform {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export function fitContain(
  imageW: number,
  imageH: number,
  canvasW: number,
  canvasH: number,
): FitTransform {
  const scale = Math.min(canvasW / imageW, canvasH / imageH);
  return {
    scale,
    offsetX: (canvasW - imageW * scale) / 2,
    offsetY: (canvasH - imageH * scale) / 2,
  };
}

export function toCanvas(t: FitTransform, x: number, y: number): [number, number] {
  return [t.offsetX + x * t.scale, t.offsetY + y * t.scale];
}

/** The slice of CanvasRenderingContext2D the overlay uses (fakeable in tests). */
export interface OverlayContext {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
  clearRect(x: number, y: number, w: number, h: number): void;
}

export function drawOverlay(
  ctx: OverlayContext,
  canvasW: number,
  canvasH: number,
  imageW: number,
  imageH: number,
  instances: Instance[],
): void {
  ctx.clearRect(0, 0, canvasW, canvasH);
  const t = fitContain(imageW, imageH, canvasW, canvasH);
  ctx.lineWidth = 2;
  ctx.strokeStyle = "#27c93f";
  ctx.fillStyle = "#27c93f";
  ctx.font = "12px sans-serif";
  for (const inst of instances) {
    if (inst.polygon.length === 0) continue;
    ctx.beginPath();
    const [x0, y0] = toCanvas(t, inst.polygon[0][0], inst.polygon[0][1]);
    ctx.moveTo(x0, y0);
    for (const [px, py] of inst.polygon.slice(1)) {
      const [cx, cy] = toCanvas(t, px, py);
      ctx.lineTo(cx, cy);
    }
    ctx.closePath();
    ctx.stroke();
    const [bx, by] = toCanvas(t, inst.bbox[0], inst.bbox[1]);
    ctx.fillText(inst.score.toFixed(2), bx, Math.max(10, by - 4));
  }
}
