import { describe, expect, it } from "vitest";

import type { LegendEntry } from "../src/api.js";
import {
  applyLegend,
  canExport,
  currentImage,
  enabledIndices,
  initialState,
  markLabeled,
  nextImage,
  recordInteraction,
  selectImage,
  setImages,
} from "../src/state.js";

function legend(partial: Partial<LegendEntry>[]): LegendEntry[] {
  return partial.map((p, i) => ({
    index: i,
    centroid_rgb: [0, 0, 0],
    pixel_count: 10,
    enabled: true,
    class_name: null,
    ...p,
  }));
}

describe("session state", () => {
  it("selects the first image on load", () => {
    const s = initialState();
    setImages(s, [
      { id: "a", labeled: false },
      { id: "b", labeled: true },
    ]);
    expect(currentImage(s)?.id).toBe("a");
  });

  it("export stays disabled until an enabled cluster has a class", () => {
    const s = initialState();
    setImages(s, [{ id: "a", labeled: false }]);
    expect(canExport(s)).toBe(false);
    applyLegend(s, legend([{}, {}]));
    expect(canExport(s)).toBe(false); // clustered but nothing assigned
    applyLegend(s, legend([{ class_name: "cage", enabled: false }, {}]));
    expect(canExport(s)).toBe(false); // assigned cluster is toggled off
    applyLegend(s, legend([{ class_name: "cage" }, {}]));
    expect(canExport(s)).toBe(true);
  });

  it("export disabled while a request is in flight", () => {
    const s = initialState();
    setImages(s, [{ id: "a", labeled: false }]);
    applyLegend(s, legend([{ class_name: "sea" }]));
    s.busy = true;
    expect(canExport(s)).toBe(false);
  });

  it("enabled indices follow the server legend", () => {
    const s = initialState();
    applyLegend(s, legend([{}, { enabled: false }, {}]));
    expect(enabledIndices(s)).toEqual([0, 2]);
  });

  it("next image wraps and resets the per-image session", () => {
    const s = initialState();
    setImages(s, [
      { id: "a", labeled: false },
      { id: "b", labeled: false },
    ]);
    applyLegend(s, legend([{ class_name: "sea" }]));
    recordInteraction(s);
    nextImage(s);
    expect(currentImage(s)?.id).toBe("b");
    expect(s.legend).toBeNull();
    expect(s.interactions).toBe(0);
    nextImage(s);
    expect(currentImage(s)?.id).toBe("a");
  });

  it("export marks the image labeled", () => {
    const s = initialState();
    setImages(s, [{ id: "a", labeled: false }]);
    markLabeled(s, "masks/a.png");
    expect(s.images[0].labeled).toBe(true);
    expect(s.lastMaskPath).toBe("masks/a.png");
  });

  it("selectImage clears stale error and mask path", () => {
    const s = initialState();
    setImages(s, [
      { id: "a", labeled: false },
      { id: "b", labeled: false },
    ]);
    s.error = "boom";
    s.lastMaskPath = "masks/a.png";
    selectImage(s, 1);
    expect(s.error).toBeNull();
    expect(s.lastMaskPath).toBeNull();
  });
});
