import type { TriageApi } from "./api.js";
import type { SessionResult } from "./types.js";
import { drawOverlay } from "./overlay.js";

export interface LiveOptions {
  /** frame posts per second, client-side cap */
  frameRate?: number;
  /** result poll interval in ms */
  pollIntervalMs?: number;
  /** capture one frame; defaults to grabbing the webcam preview */
  capture?: () => Promise<Blob | null>;
  /** acquire the camera; defaults to getUserMedia */
  openCamera?: (video: HTMLVideoElement) => Promise<void>;
  /** observer invoked after each overlay repaint (tests hook this) */
  onOverlay?: (result: SessionResult) => void;
}

interface LiveElements {
  video: HTMLVideoElement;
  canvas: HTMLCanvasElement;
  status: HTMLElement;
  banner: HTMLElement;
  threshSlider: HTMLInputElement;
  clipSlider: HTMLInputElement;
  startBtn: HTMLButtonElement;
  stopBtn: HTMLButtonElement;
  summary: HTMLElement;
}

function build(root: HTMLElement): LiveElements {
  root.replaceChildren();
  const video = document.createElement("video");
  video.autoplay = true;
  video.muted = true;
  const canvas = document.createElement("canvas");
  canvas.className = "overlay";
  canvas.width = 640;
  canvas.height = 480;

  const stage = document.createElement("div");
  stage.className = "live-stage";
  stage.appendChild(video);
  stage.appendChild(canvas);

  const banner = document.createElement("div");
  banner.className = "banner hidden";
  const status = document.createElement("div");
  status.className = "live-status";
  status.textContent = "idle";

  const controls = document.createElement("div");
  controls.className = "live-controls";
  const threshSlider = slider(controls, "threshold", "0", "1", "0.01", "0.25");
  const clipSlider = slider(controls, "clahe clip", "1", "16", "0.5", "8");
  const startBtn = button(controls, "Start");
  const stopBtn = button(controls, "Stop");
  stopBtn.disabled = true;

  const summary = document.createElement("div");
  summary.className = "summary";

  root.append(banner, stage, status, controls, summary);
  return { video, canvas, status, banner, threshSlider, clipSlider, startBtn, stopBtn, summary };
}

function slider(
  parent: HTMLElement,
  label: string,
  min: string,
  max: string,
  step: string,
  value: string,
): HTMLInputElement {
  const wrap = document.createElement("label");
  wrap.className = "slider";
  wrap.textContent = label;
  const input = document.createElement("input");
  input.type = "range";
  input.min = min;
  input.max = max;
  input.step = step;
  input.value = value;
  wrap.appendChild(input);
  parent.appendChild(wrap);
  return input;
}

function button(parent: HTMLElement, label: string): HTMLButtonElement {
  const btn = document.createElement("button");
  btn.textContent = label;
  parent.appendChild(btn);
  return btn;
}

async function defaultOpenCamera(video: HTMLVideoElement): Promise<void> {
  const stream = await navigator.mediaDevices.getUserMedia({ video: true });
  video.srcObject = stream;
  await video.play();
}

function defaultCapture(video: HTMLVideoElement): () => Promise<Blob | null> {
  const scratch = document.createElement("canvas");
  return () =>
    new Promise((resolve) => {
      const w = video.videoWidth;
      const h = video.videoHeight;
      if (!w || !h) return resolve(null);
      scratch.width = w;
      scratch.height = h;
      const ctx = scratch.getContext("2d");
      if (!ctx) return resolve(null);
      ctx.drawImage(video, 0, 0, w, h);
      scratch.toBlob((blob) => resolve(blob), "image/png");
    });
}

/** Live mode controller; timers drive frame posting and result polling. */
export class LiveView {
  private sessionId: string | null = null;
  private frameTimer: ReturnType<typeof setInterval> | null = null;
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private inFlight = false;
  private paused = false;
  private lastSeq = 0;
  private readonly els: LiveElements;
  private readonly frameRate: number;
  private readonly pollIntervalMs: number;

  constructor(
    root: HTMLElement,
    private readonly api: TriageApi,
    private readonly opts: LiveOptions = {},
  ) {
    this.els = build(root);
    this.frameRate = opts.frameRate ?? 4;
    this.pollIntervalMs = opts.pollIntervalMs ?? 250;
    this.els.startBtn.addEventListener("click", () => void this.start());
    this.els.stopBtn.addEventListener("click", () => void this.stop());
    this.els.threshSlider.addEventListener("change", () => {
      void this.patch({ "detect.global_thresh": Number(this.els.threshSlider.value) });
    });
    this.els.clipSlider.addEventListener("change", () => {
      void this.patch({ "clahe.clip_factor": Number(this.els.clipSlider.value) });
    });
  }

  async start(): Promise<void> {
    try {
      const open = this.opts.openCamera ?? defaultOpenCamera;
      await open(this.els.video);
    } catch {
      this.els.status.textContent = "camera unavailable — grant permission and retry";
      this.els.summary.textContent = "";
      return;
    }
    this.sessionId = await this.api.createSession();
    this.lastSeq = 0;
    this.els.startBtn.disabled = true;
    this.els.stopBtn.disabled = false;
    this.els.status.textContent = "live";
    const capture = this.opts.capture ?? defaultCapture(this.els.video);
    this.frameTimer = setInterval(() => void this.pushFrame(capture), 1000 / this.frameRate);
    this.pollTimer = setInterval(() => void this.poll(), this.pollIntervalMs);
  }

  private async pushFrame(capture: () => Promise<Blob | null>): Promise<void> {
    if (!this.sessionId || this.inFlight || this.paused) return;
    const blob = await capture();
    if (!blob) return;
    this.inFlight = true;
    try {
      await this.api.postFrame(this.sessionId, blob);
      this.setConnected(true);
    } catch {
      this.setConnected(false);
    } finally {
      this.inFlight = false;
    }
  }

  private async poll(): Promise<void> {
    if (!this.sessionId) return;
    let result: SessionResult | null;
    try {
      result = await this.api.getResult(this.sessionId);
      this.setConnected(true);
    } catch {
      this.setConnected(false);
      return;
    }
    if (!result || result.seq === this.lastSeq) return;
    this.lastSeq = result.seq;
    const ctx = this.els.canvas.getContext("2d");
    if (ctx) {
      drawOverlay(
        ctx,
        this.els.canvas.width,
        this.els.canvas.height,
        this.els.video.videoWidth || this.els.canvas.width,
        this.els.video.videoHeight || this.els.canvas.height,
        result.instances,
      );
    }
    const c = result.counters;
    const latency = result.timings_ms.total ?? 0;
    this.els.status.textContent =
      `#${result.seq} ${result.label} · ${result.instances.length} regions · ` +
      `${latency.toFixed(0)} ms · received ${c.received} processed ${c.processed} ` +
      `dropped ${c.dropped}`;
    this.els.canvas.dataset.seq = String(result.seq);
    this.els.canvas.dataset.regions = String(result.instances.length);
    this.opts.onOverlay?.(result);
  }

  private async patch(overrides: Record<string, unknown>): Promise<void> {
    if (!this.sessionId) return;
    try {
      await this.api.patchConfig(this.sessionId, overrides);
      this.setConnected(true);
    } catch {
      this.setConnected(false);
    }
  }

  private setConnected(ok: boolean): void {
    this.paused = !ok;
    this.els.banner.classList.toggle("hidden", ok);
    this.els.banner.textContent = ok ? "" : "connection lost — retrying";
  }

  async stop(): Promise<void> {
    if (this.frameTimer) clearInterval(this.frameTimer);
    if (this.pollTimer) clearInterval(this.pollTimer);
    this.frameTimer = this.pollTimer = null;
    if (!this.sessionId) return;
    const summary = await this.api.closeSession(this.sessionId);
    this.sessionId = null;
    this.els.startBtn.disabled = false;
    this.els.stopBtn.disabled = true;
    this.els.status.textContent = "stopped";
    this.els.summary.textContent =
      `session ${summary.session_id}: received ${summary.received}, ` +
      `processed ${summary.processed}, dropped ${summary.dropped}, ` +
      `mean latency ${summary.mean_latency_ms.toFixed(1)} ms`;
    const stream = this.els.video.srcObject;
    if (typeof MediaStream !== "undefined" && stream instanceof MediaStream) {
      stream.getTracks().forEach((t) => t.stop());
      this.els.video.srcObject = null;
    }
  }
}

export function initLive(root: HTMLElement, api: TriageApi, opts?: LiveOptions): LiveView {
  return new LiveView(root, api, opts);
}
