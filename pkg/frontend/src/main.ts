import { TriageApi } from "./api.js";
import { initGallery } from "./gallery.js";
import { initLive } from "./live.js";

function mount(): void {
  const api = new TriageApi("");
  const tabs = document.getElementById("tabs")!;
  const galleryRoot = document.getElementById("gallery")!;
  const liveRoot = document.getElementById("live")!;

  initGallery(galleryRoot, api);
  initLive(liveRoot, api);

  const buttons = tabs.querySelectorAll<HTMLButtonElement>("button[data-view]");
  buttons.forEach((btn) =>
    btn.addEventListener("click", () => {
      buttons.forEach((b) => b.classList.toggle("active", b === btn));
      galleryRoot.classList.toggle("hidden", btn.dataset.view !== "gallery");
      liveRoot.classList.toggle("hidden", btn.dataset.view !== "live");
    }),
  );
}

document.addEventListener("DOMContentLoaded", mount);
