import type { TriageApi } from "./api.js";
import type { DocumentResult } from "./types.js";
import { drawOverlay } from "./overlay.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function probabilityBars(probs: Record<string, number>): HTMLElement {
  const wrap = el("div", "prob-bars");
  for (const [label, p] of Object.entries(probs)) {
    const row = el("div", "prob-row");
    row.appendChild(el("span", "prob-label", label));
    const track = el("div", "prob-track");
    const fill = el("div", "prob-fill");
    fill.style.width = `${(p * 100).toFixed(1)}%`;
    track.appendChild(fill);
    row.appendChild(track);
    row.appendChild(el("span", "prob-value", `${(p * 100).toFixed(1)}%`));
    wrap.appendChild(row);
  }
  return wrap;
}

function timingsLine(timings: Record<string, number>): HTMLElement {
  const parts = Object.entries(timings).map(([k, v]) => `${k} ${v.toFixed(1)}ms`);
  return el("div", "timings", parts.join(" · "));
}

export function renderResultCard(
  card: HTMLElement,
  result: DocumentResult,
  image: { width: number; height: number; src: string },
): void {
  card.replaceChildren();
  card.classList.add("result-card");

  const badge = el("span", "badge", result.label);
  const header = el("div", "card-header");
  header.appendChild(badge);
  header.appendChild(el("span", "regions", `${result.instances.length} regions`));
  card.appendChild(header);

  const frame = el("div", "card-canvas");
  const img = el("img");
  img.src = image.src;
  frame.appendChild(img);
  const canvas = el("canvas", "overlay");
  canvas.width = 320;
  canvas.height = Math.max(1, Math.round((320 * image.height) / image.width));
  const ctx = canvas.getContext("2d");
  if (ctx) {
    drawOverlay(ctx, canvas.width, canvas.height, image.width, image.height, result.instances);
  }
  frame.appendChild(canvas);
  card.appendChild(frame);

  card.appendChild(probabilityBars(result.label_probs));
  card.appendChild(timingsLine(result.timings_ms));
}

function renderErrorChip(card: HTMLElement, name: string, message: string): void {
  card.replaceChildren();
  card.classList.add("result-card");
  const chip = el("span", "error-chip", `${name}: ${message}`);
  card.appendChild(chip);
}

export type DimsResolver = (
  blob: Blob,
) => Promise<{ width: number; height: number; src: string }>;

async function imageDims(blob: Blob): Promise<{ width: number; height: number; src: string }> {
  const src = URL.createObjectURL(blob);
  return new Promise((resolve) => {
    const probe = new Image();
    probe.onload = () => resolve({ width: probe.naturalWidth, height: probe.naturalHeight, src });
    probe.onerror = () => resolve({ width: 1, height: 1, src });
    probe.src = src;
  });
}

/** Gallery mode: pick local files, classify each, render cards in selection order. */
export function initGallery(root: HTMLElement, api: TriageApi): void {
  root.replaceChildren();
  const picker = el("input") as HTMLInputElement;
  picker.type = "file";
  picker.accept = "image/png,image/jpeg";
  picker.multiple = true;
  const cards = el("div", "cards");
  root.appendChild(picker);
  root.appendChild(cards);

  picker.addEventListener("change", () => {
    const files = Array.from(picker.files ?? []);
    void processFiles(files, cards, api);
  });
}

export async function processFiles(
  files: File[],
  cards: HTMLElement,
  api: TriageApi,
  resolveDims: DimsResolver = imageDims,
): Promise<void> {
  // one placeholder per file up front, so cards keep selection order even
  // though responses may interleave
  const slots = files.map((file) => {
    const card = document.createElement("div");
    card.className = "result-card pending";
    card.textContent = `processing ${file.name}…`;
    cards.appendChild(card);
    return card;
  });
  await Promise.all(
    files.map(async (file, i) => {
      try {
        const result = await api.classifyDocument(file);
        const dims = await resolveDims(file);
        renderResultCard(slots[i], result, dims);
      } catch (err) {
        renderErrorChip(slots[i], file.name, err instanceof Error ? err.message : String(err));
      }
    }),
  );
}
