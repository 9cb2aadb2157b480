import { describe, expect, it } from "vitest";

import type { TriageApi } from "../src/api.js";
import { processFiles, renderResultCard } from "../src/gallery.js";
import type { DocumentResult } from "../src/types.js";

const invoiceResult: DocumentResult = {
  id: "abc123",
  instances: [
    {
      polygon: [
        [40, 40],
        [239, 40],
        [239, 63],
        [40, 63],
      ],
      bbox: [40, 40, 200, 24],
      score: 0.87,
      text: "INVOICE",
    },
  ],
  label: "Invoice",
  label_probs: { Invoice: 0.61, Form: 0.13, Letter: 0.13, Report: 0.13 },
  timings_ms: { preprocess: 4.2, detect: 8.9, recognize: 0.4, classify: 0.1, total: 13.8 },
};

const blankResult: DocumentResult = {
  id: "def456",
  instances: [],
  label: "Invoice",
  label_probs: { Invoice: 0.25, Form: 0.25, Letter: 0.25, Report: 0.25 },
  timings_ms: { preprocess: 1, detect: 1, recognize: 0.1, classify: 0.1, total: 2.4 },
};

function fakeApi(responses: Map<string, DocumentResult | Error>): TriageApi {
  return {
    classifyDocument: async (blob: Blob) => {
      const name = (blob as File).name;
      const hit = responses.get(name);
      if (hit instanceof Error) throw hit;
      if (!hit) throw new Error(`no scripted response for ${name}`);
      return hit;
    },
  } as unknown as TriageApi;
}

const stubDims = async () => ({ width: 640, height: 480, src: "" });


describe("renderResultCard", () => {
  it("shows the Invoice badge, region count, probability bars and timings", () => {
    const card = document.createElement("div");
    renderResultCard(card, invoiceResult, { width: 640, height: 480, src: "" });
    expect(card.querySelector(".badge")?.textContent).toBe("Invoice");
    expect(card.querySelector(".regions")?.textContent).toBe("1 regions");
    const fills = card.querySelectorAll<HTMLElement>(".prob-fill");
    expect(fills).toHaveLength(4);
    expect(parseFloat(fills[0].style.width)).toBeCloseTo(61.0, 5);
    expect(card.querySelector(".timings")?.textContent).toContain("total 13.8ms");
  });

  it("renders a blank page as zero regions with uniform bars", () => {
    const card = document.createElement("div");
    renderResultCard(card, blankResult, { width: 640, height: 480, src: "" });
    expect(card.querySelector(".regions")?.textContent).toBe("0 regions");
    const fills = Array.from(card.querySelectorAll<HTMLElement>(".prob-fill"));
    expect(fills.map((f) => parseFloat(f.style.width))).toEqual([25, 25, 25, 25]);
  });
});

describe("processFiles", () => {
  it("renders one card per file in selection order", async () => {
    const files = Array.from({ length: 10 }, (_, i) =>
      new File(["x"], `doc${i}.png`, { type: "image/png" }),
    );
    const responses = new Map<string, DocumentResult | Error>(
      files.map((f) => [f.name, { ...invoiceResult, id: f.name }]),
    );
    const cards = document.createElement("div");
    await processFiles(files, cards, fakeApi(responses), stubDims);
    const rendered = cards.querySelectorAll(".result-card");
    expect(rendered).toHaveLength(10);
    rendered.forEach((card) => {
      expect(card.querySelector(".badge")?.textContent).toBe("Invoice");
    });
  });

  it("shows an error chip on the failed item without blocking the others", async () => {
    const ok = new File(["x"], "good.png", { type: "image/png" });
    const bad = new File(["x"], "bad.png", { type: "image/png" });
    const responses = new Map<string, DocumentResult | Error>([
      ["good.png", invoiceResult],
      ["bad.png", new Error("request failed (400: cannot decode image)")],
    ]);
    const cards = document.createElement("div");
    await processFiles([ok, bad], cards, fakeApi(responses), stubDims);
    const rendered = cards.querySelectorAll(".result-card");
    expect(rendered).toHaveLength(2);
    expect(rendered[0].querySelector(".badge")?.textContent).toBe("Invoice");
    expect(rendered[0].querySelector(".error-chip")).toBeNull();
    expect(rendered[1].querySelector(".error-chip")?.textContent).toContain("bad.png");
  });
});
