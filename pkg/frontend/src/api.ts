// Typed client for the labeling service. The browser never computes masks or
// clusters itself: every mutation round-trips through these endpoints.

export interface ImageInfo {
  id: string;
  labeled: boolean;
}

export interface LegendEntry {
  index: number;
  centroid_rgb: [number, number, number];
  pixel_count: number;
  enabled: boolean;
  class_name: string | null;
}

export type Colorspace = "rgb" | "lab";

export type LabelPatch = Record<string, string | { class_name?: string | null; enabled?: boolean }>;

async function asError(resp: Response): Promise<Error> {
  let detail = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body: keep the status line
  }
  return new Error(detail);
}

export class LabelApi {
  constructor(private readonly base: string = "") {}

  private url(path: string): string {
    return `${this.base}${path}`;
  }

  async listImages(): Promise<ImageInfo[]> {
    const resp = await fetch(this.url("/api/images"));
    if (!resp.ok) throw await asError(resp);
    return (await resp.json()) as ImageInfo[];
  }

  imageUrl(id: string): string {
    return this.url(`/api/images/${encodeURIComponent(id)}`);
  }

  // rev busts the browser cache after each re-cluster
  quantizedUrl(id: string, rev: number): string {
    return this.url(`/api/images/${encodeURIComponent(id)}/quantized?rev=${rev}`);
  }

  overlayUrl(id: string, enabled: number[], rev: number): string {
    const on = enabled.join(",");
    return this.url(`/api/images/${encodeURIComponent(id)}/overlay?enabled=${on}&rev=${rev}`);
  }

  async cluster(id: string, k: number, colorspace: Colorspace, seed: number): Promise<LegendEntry[]> {
    const resp = await fetch(this.url(`/api/images/${encodeURIComponent(id)}/cluster`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ k, colorspace, seed }),
    });
    if (!resp.ok) throw await asError(resp);
    return ((await resp.json()) as { legend: LegendEntry[] }).legend;
  }

  async setLabels(id: string, patch: LabelPatch): Promise<LegendEntry[]> {
    const resp = await fetch(this.url(`/api/images/${encodeURIComponent(id)}/labels`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(patch),
    });
    if (!resp.ok) throw await asError(resp);
    return ((await resp.json()) as { legend: LegendEntry[] }).legend;
  }

  async exportMask(id: string): Promise<string> {
    const resp = await fetch(this.url(`/api/images/${encodeURIComponent(id)}/export`), { method: "POST" });
    if (!resp.ok) throw await asError(resp);
    return ((await resp.json()) as { mask_path: string }).mask_path;
  }
}
