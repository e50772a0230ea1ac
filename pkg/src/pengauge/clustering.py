"""K-means color clustering: the engine behind the image labeling workflow.

Pixels are grouped by color (RGB or CIELAB), the operator assigns whole
clusters to classes, and the result is exported as a labeled training example.
"""

from dataclasses import dataclass, field

import numpy as np

from . import dataset as ds
from .errors import PengaugeError
from .imaging import (
    CLASS_UNLABELED,
    Image,
    LabeledMask,
    LabImage,
    lab_to_rgb,
    write_image,
    write_labeled_mask,
)

MAX_K = 64
CONVERGENCE_TOL = 1e-4  # max centroid movement, in color units
MAX_ITERATIONS = 100
_CHUNK = 1 << 18  # pixels per distance-matrix block, bounds memory at large k


@dataclass(frozen=True, eq=False)
class ClusterModel:
    k: int
    colorspace: str  # "rgb" | "lab"
    centroids: np.ndarray  # (k, 3) float64, in the clustering colorspace
    assignment: np.ndarray  # (h, w) int32 centroid index per pixel
    objective: float  # final sum of squared residuals
    objective_history: list[float] = field(default_factory=list)

    @property
    def width(self) -> int:
        return self.assignment.shape[1]

    @property
    def height(self) -> int:
        return self.assignment.shape[0]

    def centroids_rgb(self) -> np.ndarray:
        """Centroid colors as displayable uint8 RGB."""
        if self.colorspace == "lab":
            return lab_to_rgb(self.centroids)
        return np.clip(np.rint(self.centroids), 0, 255).astype(np.uint8)


@dataclass
class LegendEntry:
    index: int
    centroid_rgb: tuple[int, int, int]
    pixel_count: int
    enabled: bool = True
    class_id: int | None = None  # one of imaging.CLASS_*, None = unassigned


@dataclass
class ClusterLegend:
    entries: list[LegendEntry]

    def set_class(self, index: int, class_id: int | None) -> None:
        self.entries[index].class_id = class_id

    def set_enabled(self, index: int, enabled: bool) -> None:
        self.entries[index].enabled = enabled


def _features(img) -> np.ndarray:
    if isinstance(img, Image):
        return img.pixels.reshape(-1, 3).astype(np.float64)
    if isinstance(img, LabImage):
        return img.pixels.reshape(-1, 3).astype(np.float64)
    raise PengaugeError("bad-image", f"cannot cluster {type(img).__name__}")


def _nearest(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index of the nearest centroid and squared distance to it, chunked."""
    n = points.shape[0]
    assign = np.empty(n, dtype=np.int32)
    dist2 = np.empty(n, dtype=np.float64)
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        d2 = ((points[lo:hi, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        assign[lo:hi] = np.argmin(d2, axis=1)
        dist2[lo:hi] = d2[np.arange(hi - lo), assign[lo:hi]]
    return assign, dist2


def _seed_plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: spread initial centroids by squared-distance sampling."""
    n = points.shape[0]
    centroids = np.empty((k, 3), dtype=np.float64)
    centroids[0] = points[rng.integers(n)]
    dist2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = dist2.sum()
        if total <= 0.0:
            centroids[j:] = centroids[0]  # degenerate: fewer distinct colors than k
            return centroids
        r = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(dist2), r))
        idx = min(idx, n - 1)
        centroids[j] = points[idx]
        dist2 = np.minimum(dist2, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def kmeans(img, k: int, seed: int) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding; deterministic for fixed inputs.

    Iterates until the largest centroid movement drops below CONVERGENCE_TOL
    or MAX_ITERATIONS is hit. Empty clusters are re-seeded from the point
    farthest from its assigned centroid.
    """
    if k < 1:
        raise PengaugeError("bad-k", f"k must be >= 1, got {k}")
    if k > MAX_K:
        raise PengaugeError("bad-k", f"k must be <= {MAX_K}, got {k}")
    points = _features(img)
    shape = (img.height, img.width)
    rng = np.random.default_rng(seed)
    centroids = _seed_plus_plus(points, k, rng)

    history: list[float] = []
    assign, dist2 = _nearest(points, centroids)
    for _ in range(MAX_ITERATIONS):
        # re-seed empty clusters before the update so k centroids survive
        counts = np.bincount(assign, minlength=k)
        for j in np.flatnonzero(counts == 0):
            far = int(np.argmax(dist2))
            centroids[j] = points[far]
            dist2[far] = 0.0
            assign[far] = j
            counts = np.bincount(assign, minlength=k)

        history.append(float(dist2.sum()))
        sums = np.zeros((k, 3), dtype=np.float64)
        np.add.at(sums, assign, points)
        # duplicate-color degenerate case can leave a cluster empty even after
        # reseeding; keep its old centroid rather than dividing by zero
        new_centroids = np.where(counts[:, None] > 0, sums / np.maximum(counts[:, None], 1), centroids)
        movement = float(np.abs(new_centroids - centroids).max())
        centroids = new_centroids
        assign, dist2 = _nearest(points, centroids)
        if movement < CONVERGENCE_TOL:
            break

    objective = float(dist2.sum())
    history.append(objective)
    return ClusterModel(
        k=k,
        colorspace="lab" if isinstance(img, LabImage) else "rgb",
        centroids=centroids,
        assignment=assign.reshape(shape),
        objective=objective,
        objective_history=history,
    )


def quantize(img, model: ClusterModel) -> Image:
    """Replace every pixel with its assigned centroid color (as displayable RGB)."""
    if (img.height, img.width) != (model.height, model.width):
        raise PengaugeError(
            "dimension-mismatch",
            f"model built for {model.width}x{model.height}, image is {img.width}x{img.height}",
        )
    palette = model.centroids_rgb()
    return Image(palette[model.assignment])


def legend_from_model(model: ClusterModel) -> ClusterLegend:
    """Fresh legend for a model: every cluster enabled, nothing assigned yet."""
    counts = np.bincount(model.assignment.ravel(), minlength=model.k)
    palette = model.centroids_rgb()
    entries = [
        LegendEntry(index=j, centroid_rgb=tuple(int(v) for v in palette[j]), pixel_count=int(counts[j]))
        for j in range(model.k)
    ]
    return ClusterLegend(entries)


def legend_to_mask(model: ClusterModel, legend: ClusterLegend) -> LabeledMask:
    """Pixel class = class of its cluster; disabled or unassigned clusters stay 0."""
    lut = np.full(model.k, CLASS_UNLABELED, dtype=np.uint8)
    for e in legend.entries:
        if e.enabled and e.class_id is not None:
            lut[e.index] = e.class_id
    return LabeledMask(lut[model.assignment])


def export_example(
    img: Image,
    mask: LabeledMask,
    dataset_dir,
    entry_id: str,
    year: int = 0,
    location: str = "synthetic",
    crop: str = "0,0,0,0",
) -> ds.DatasetEntry:
    """Write a (frame, labeled mask) pair plus one index record.

    The mask must carry at least one labeled pixel; the id must be new.
    """
    labeled = int((mask.classes != CLASS_UNLABELED).sum())
    if labeled == 0:
        raise PengaugeError("empty-mask", "refusing to export an all-unlabeled mask")
    if (img.height, img.width) != (mask.height, mask.width):
        raise PengaugeError("dimension-mismatch", "frame and mask dimensions differ")
    entry = ds.DatasetEntry(entry_id, year, location, crop, labeled)
    ds.append_index(dataset_dir, entry)  # raises on duplicates before any file write
    write_image(img, ds.frame_path(dataset_dir, entry_id))
    write_labeled_mask(mask, ds.mask_path(dataset_dir, entry_id))
    return entry


__all__ = [
    "ClusterModel",
    "ClusterLegend",
    "LegendEntry",
    "kmeans",
    "quantize",
    "legend_from_model",
    "legend_to_mask",
    "export_example",
]
