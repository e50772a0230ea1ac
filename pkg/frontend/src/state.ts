// Session state for the labeling page. Pure data + transition helpers so the
// logic is testable without a DOM; the server legend is the source of truth
// and is mirrored here verbatim after every acknowledged mutation.

import type { Colorspace, ImageInfo, LegendEntry } from "./api.js";

export const CLASS_NAMES = ["sea", "cage", "fish", "blurry"] as const;

export interface SessionState {
  images: ImageInfo[];
  current: number; // index into images, -1 before load
  k: number;
  colorspace: Colorspace;
  seed: number;
  legend: LegendEntry[] | null;
  rev: number; // bumped per re-cluster, busts pane caches
  busy: boolean;
  error: string | null;
  lastMaskPath: string | null;
  interactions: number; // user actions spent on the current image
}

export function initialState(): SessionState {
  return {
    images: [],
    current: -1,
    k: 8,
    colorspace: "lab",
    seed: 0,
    legend: null,
    rev: 0,
    busy: false,
    error: null,
    lastMaskPath: null,
    interactions: 0,
  };
}

export function currentImage(state: SessionState): ImageInfo | null {
  return state.current >= 0 && state.current < state.images.length ? state.images[state.current] : null;
}

export function setImages(state: SessionState, images: ImageInfo[]): void {
  state.images = images;
  if (images.length > 0 && state.current < 0) selectImage(state, 0);
}

export function selectImage(state: SessionState, index: number): void {
  state.current = index;
  state.legend = null;
  state.lastMaskPath = null;
  state.error = null;
  state.interactions = 0;
}

export function nextImage(state: SessionState): void {
  if (state.images.length === 0) return;
  selectImage(state, (state.current + 1) % state.images.length);
}

export function applyLegend(state: SessionState, legend: LegendEntry[]): void {
  state.legend = legend;
}

export function enabledIndices(state: SessionState): number[] {
  return (state.legend ?? []).filter((e) => e.enabled).map((e) => e.index);
}

// export stays disabled until at least one enabled cluster carries a class
export function canExport(state: SessionState): boolean {
  return !state.busy && (state.legend ?? []).some((e) => e.enabled && e.class_name !== null);
}

export function canCluster(state: SessionState): boolean {
  return !state.busy && currentImage(state) !== null;
}

export function recordInteraction(state: SessionState): void {
  state.interactions += 1;
}

export function markLabeled(state: SessionState, maskPath: string): void {
  state.lastMaskPath = maskPath;
  const img = currentImage(state);
  if (img) img.labeled = true;
}
