import { describe, expect, it } from "vitest";

import { drawOverlay, fitContain, toCanvas, type OverlayContext } from "../src/overlay.js";
import type { Instance } from "../src/types.js";

class RecordingContext implements OverlayContext {
  strokeStyle: string | CanvasGradient | CanvasPattern = "";
  fillStyle: string | CanvasGradient | CanvasPattern = "";
  lineWidth = 0;
  font = "";
  calls: Array<[string, ...number[]]> = [];
  beginPath() { this.calls.push(["beginPath"]); }
  moveTo(x: number, y: number) { this.calls.push(["moveTo", x, y]); }
  lineTo(x: number, y: number) { this.calls.push(["lineTo", x, y]); }
  closePath() { this.calls.push(["closePath"]); }
  stroke() { this.calls.push(["stroke"]); }
  fillText(_t: string, x: number, y: number) { this.calls.push(["fillText", x, y]); }
  clearRect(x: number, y: number, w: number, h: number) {
    this.calls.push(["clearRect", x, y, w, h]);
  }
}

describe("fitContain", () => {
  it("halves coordinates for a 2:1 downscale with matching aspect", () => {
    const t = fitContain(640, 480, 320, 240);
    expect(t.scale).toBeCloseTo(0.5, 12);
    expect(t.offsetX).toBe(0);
    expect(t.offsetY).toBe(0);
    expect(toCanvas(t, 40, 40)).toEqual([20, 20]);
  });

  it("letterboxes when the canvas is taller than the image aspect", () => {
    const t = fitContain(640, 480, 400, 400);
    expect(t.scale).toBeCloseTo(0.625, 12);
    expect(t.offsetX).toBe(0);
    expect(t.offsetY).toBeCloseTo(50, 12); // (400 - 480*0.625) / 2
    expect(toCanvas(t, 0, 0)).toEqual([0, 50]);
    expect(toCanvas(t, 640, 480)).toEqual([400, 350]);
  });

  it("pillarboxes when the canvas is wider than the image aspect", () => {
    const t = fitContain(100, 200, 300, 200);
    expect(t.scale).toBe(1);
    expect(t.offsetX).toBe(100);
    expect(t.offsetY).toBe(0);
  });
});

describe("drawOverlay pixel mapping", () => {
  it("draws a known box at exactly the scaled coordinates", () => {
    // image 640x480 on a 320x240 canvas: every coordinate exactly halves
    const ctx = new RecordingContext();
    const box: Instance = {
      polygon: [
        [40, 40],
        [240, 40],
        [240, 64],
        [40, 64],
      ],
      bbox: [40, 40, 200, 24],
      score: 0.87,
      text: "INVOICE",
    };
    drawOverlay(ctx, 320, 240, 640, 480, [box]);
    expect(ctx.calls[0]).toEqual(["clearRect", 0, 0, 320, 240]);
    expect(ctx.calls).toContainEqual(["moveTo", 20, 20]);
    expect(ctx.calls).toContainEqual(["lineTo", 120, 20]);
    expect(ctx.calls).toContainEqual(["lineTo", 120, 32]);
    expect(ctx.calls).toContainEqual(["lineTo", 20, 32]);
    const strokes = ctx.calls.filter(([name]) => name === "stroke");
    expect(strokes).toHaveLength(1);
  });

  it("applies letterbox offsets to polygon vertices", () => {
    const ctx = new RecordingContext();
    const box: Instance = {
      polygon: [
        [0, 0],
        [640, 0],
        [640, 480],
        [0, 480],
      ],
      bbox: [0, 0, 640, 480],
      score: 1,
      text: "",
    };
    drawOverlay(ctx, 400, 400, 640, 480, [box]);
    expect(ctx.calls).toContainEqual(["moveTo", 0, 50]);
    expect(ctx.calls).toContainEqual(["lineTo", 400, 50]);
    expect(ctx.calls).toContainEqual(["lineTo", 400, 350]);
    expect(ctx.calls).toContainEqual(["lineTo", 0, 350]);
  });

  it("clears and draws nothing for an empty instance list", () => {
    const ctx = new RecordingContext();
    drawOverlay(ctx, 100, 100, 50, 50, []);
    expect(ctx.calls).toEqual([["clearRect", 0, 0, 100, 100]]);
  });
});
