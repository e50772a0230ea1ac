// Page controller: wires the toolbar, the two panes, and the legend panel to
// the labeling API. All clustering happens server-side; after every mutation
// the legend shown here is the one the server acknowledged.

import { LabelApi, LabelPatch } from "./api.js";
import { MutationQueue } from "./queue.js";
import {
  CLASS_NAMES,
  SessionState,
  applyLegend,
  canCluster,
  canExport,
  currentImage,
  enabledIndices,
  initialState,
  markLabeled,
  nextImage,
  recordInteraction,
  setImages,
} from "./state.js";

const api = new LabelApi();
const queue = new MutationQueue();
const state: SessionState = initialState();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const imageSelect = el<HTMLSelectElement>("image-select");
const colorspaceSelect = el<HTMLSelectElement>("colorspace");
const kSlider = el<HTMLInputElement>("k-slider");
const kValue = el<HTMLSpanElement>("k-value");
const clusterButton = el<HTMLButtonElement>("cluster-button");
const exportButton = el<HTMLButtonElement>("export-button");
const nextButton = el<HTMLButtonElement>("next-button");
const originalPane = el<HTMLImageElement>("original-pane");
const quantizedPane = el<HTMLImageElement>("quantized-pane");
const legendBody = el<HTMLTableSectionElement>("legend-body");
const banner = el<HTMLDivElement>("banner");

function render(): void {
  const img = currentImage(state);
  imageSelect.innerHTML = "";
  state.images.forEach((info, idx) => {
    const opt = document.createElement("option");
    opt.value = String(idx);
    opt.textContent = info.labeled ? `${info.id} (labeled)` : info.id;
    opt.selected = idx === state.current;
    imageSelect.appendChild(opt);
  });

  kValue.textContent = kSlider.value;
  clusterButton.disabled = !canCluster(state);
  exportButton.disabled = !canExport(state);
  nextButton.disabled = state.busy || state.images.length === 0;

  if (img) {
    originalPane.src = state.legend
      ? api.overlayUrl(img.id, enabledIndices(state), state.rev)
      : api.imageUrl(img.id);
    quantizedPane.src = state.legend ? api.quantizedUrl(img.id, state.rev) : "";
    quantizedPane.style.visibility = state.legend ? "visible" : "hidden";
  }

  if (state.error) {
    banner.textContent = state.error;
    banner.className = "banner error";
  } else if (state.lastMaskPath) {
    banner.textContent = `exported ${state.lastMaskPath}`;
    banner.className = "banner ok";
  } else {
    banner.textContent = state.busy ? "working..." : "";
    banner.className = "banner";
  }

  legendBody.innerHTML = "";
  for (const entry of state.legend ?? []) {
    const row = document.createElement("tr");

    const swatch = document.createElement("td");
    const box = document.createElement("span");
    box.className = "swatch";
    const [r, g, b] = entry.centroid_rgb;
    box.style.backgroundColor = `rgb(${r},${g},${b})`;
    swatch.appendChild(box);
    row.appendChild(swatch);

    const count = document.createElement("td");
    count.textContent = entry.pixel_count.toLocaleString();
    row.appendChild(count);

    const toggleCell = document.createElement("td");
    const toggle = document.createElement("input");
    toggle.type = "checkbox";
    toggle.checked = entry.enabled;
    toggle.addEventListener("change", () => {
      void mutateLabels({ [String(entry.index)]: { enabled: toggle.checked, class_name: entry.class_name } });
    });
    toggleCell.appendChild(toggle);
    row.appendChild(toggleCell);

    const classCell = document.createElement("td");
    const select = document.createElement("select");
    const blank = document.createElement("option");
    blank.value = "";
    blank.textContent = "-";
    select.appendChild(blank);
    for (const name of CLASS_NAMES) {
      const opt = document.createElement("option");
      opt.value = name;
      opt.textContent = name;
      opt.selected = entry.class_name === name;
      select.appendChild(opt);
    }
    select.addEventListener("change", () => {
      void mutateLabels({ [String(entry.index)]: { class_name: select.value || null, enabled: entry.enabled } });
    });
    classCell.appendChild(select);
    row.appendChild(classCell);

    legendBody.appendChild(row);
  }
}

async function withBusy(task: () => Promise<void>): Promise<void> {
  state.busy = true;
  state.error = null;
  render();
  try {
    await queue.run(task);
  } catch (err) {
    state.error = err instanceof Error ? err.message : String(err);
  } finally {
    state.busy = false;
    render();
  }
}

async function mutateLabels(patch: LabelPatch): Promise<void> {
  const img = currentImage(state);
  if (!img) return;
  recordInteraction(state);
  await withBusy(async () => {
    applyLegend(state, await api.setLabels(img.id, patch));
  });
}

clusterButton.addEventListener("click", () => {
  const img = currentImage(state);
  if (!img) return;
  recordInteraction(state);
  void withBusy(async () => {
    state.rev += 1;
    applyLegend(state, await api.cluster(img.id, Number(kSlider.value), state.colorspace, state.seed));
  });
});

exportButton.addEventListener("click", () => {
  const img = currentImage(state);
  if (!img) return;
  recordInteraction(state);
  void withBusy(async () => {
    markLabeled(state, await api.exportMask(img.id));
  });
});

nextButton.addEventListener("click", () => {
  recordInteraction(state);
  nextImage(state);
  render();
});

imageSelect.addEventListener("change", () => {
  recordInteraction(state);
  state.current = Number(imageSelect.value);
  state.legend = null;
  state.lastMaskPath = null;
  render();
});

colorspaceSelect.addEventListener("change", () => {
  recordInteraction(state);
  state.colorspace = colorspaceSelect.value === "rgb" ? "rgb" : "lab";
});

kSlider.addEventListener("input", () => {
  kValue.textContent = kSlider.value;
});
kSlider.addEventListener("change", () => {
  recordInteraction(state);
  state.k = Number(kSlider.value);
});

void (async () => {
  try {
    setImages(state, await api.listImages());
  } catch (err) {
    state.error = err instanceof Error ? err.message : String(err);
  }
  render();
})();
