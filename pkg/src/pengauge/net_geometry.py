"""Mesh geometry: opening centers, pixel pitch, pinhole distance, ideal-net masks.

Opening centers survive fouling buildup (openings shrink around a fixed
center), which makes them the anchor features for both distance estimation
and aligning the rendered clean net to the observed one.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import PengaugeError
from .imaging import BinaryMask

MIN_RENDER_PITCH_PX = 2.0
_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=np.int32)  # 4-connectivity


@dataclass(frozen=True)
class CameraModel:
    focal_length: float  # mm
    sensor_width: float  # mm
    sensor_height: float  # mm
    image_width: int  # px
    image_height: int  # px

    def __post_init__(self):
        vals = (self.focal_length, self.sensor_width, self.sensor_height, self.image_width, self.image_height)
        if any(v <= 0 for v in vals):
            raise PengaugeError("bad-camera", f"all camera parameters must be positive: {vals}")

    @property
    def focal_px(self) -> float:
        return self.focal_length * self.image_width / self.sensor_width


@dataclass(frozen=True)
class NetSpec:
    pitch: float = 0.025  # m, center-to-center mesh spacing
    twine: float = 0.002  # m, thread thickness

    def __post_init__(self):
        if not 0.0 < self.twine < self.pitch:
            raise PengaugeError("bad-net", f"need 0 < twine < pitch, got twine={self.twine} pitch={self.pitch}")


# Working-scale defaults: 960x540 frames, focal_px = 1200 (0.80 m x 0.45 m
# view at 1 m standoff; 30 px mesh pitch, 2 px twine).
DEFAULT_CAMERA = CameraModel(
    focal_length=6.0, sensor_width=4.8, sensor_height=2.7, image_width=960, image_height=540
)
DEFAULT_NET = NetSpec()


@dataclass(frozen=True)
class MeshDetection:
    centers: np.ndarray  # (n, 2) of (x, y) px
    pitch_px: float
    phase: tuple[float, float]


def _component_stats(labels: np.ndarray, n: int):
    """Pixel count and centroid (x, y) per label, vectorized."""
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=n + 1)
    h, w = labels.shape
    ys, xs = np.divmod(np.arange(h * w), w)
    sum_x = np.bincount(flat, weights=xs, minlength=n + 1)
    sum_y = np.bincount(flat, weights=ys, minlength=n + 1)
    return counts, sum_x, sum_y


def detect_mesh_centers(mask: BinaryMask, expected_pitch_px: float | None = None) -> np.ndarray:
    """Area centroids of interior mesh openings, as an (n, 2) array of (x, y).

    Openings are 4-connected 0-components. Components touching the image
    border are clipped and excluded. Small components are dropped below the
    pinhole floor (0.2 * pitch)^2; when the pitch is unknown it is
    bootstrapped from the area-weighted median component area, which genuine
    openings dominate even under speckle noise.
    """
    # hairline breaks in segmented twine would fuse every opening into one
    # border-touching component; a single closing pass bridges them and is the
    # identity on cleanly rendered grids
    solid = ndimage.binary_closing(mask.bits, structure=_CROSS.astype(bool), border_value=1)
    open_px = ~solid
    labels, n = ndimage.label(open_px, structure=_CROSS)
    if n == 0:
        return np.empty((0, 2))
    border = np.unique(
        np.concatenate([labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]])
    )
    counts, sum_x, sum_y = _component_stats(labels, n)
    keep = np.ones(n + 1, dtype=bool)
    keep[0] = False
    keep[border] = False

    areas = counts[1:][keep[1:]]
    if areas.size == 0:
        return np.empty((0, 2))
    if expected_pitch_px is not None:
        min_area = (0.2 * expected_pitch_px) ** 2
    else:
        order = np.argsort(areas)
        cum = np.cumsum(areas[order])
        median_area = float(areas[order][np.searchsorted(cum, cum[-1] / 2.0)])
        min_area = 0.05 * median_area
    keep[1:] &= counts[1:] >= min_area

    idx = np.flatnonzero(keep)
    centers = np.stack([sum_x[idx] / counts[idx], sum_y[idx] / counts[idx]], axis=1)
    return centers


def estimate_pitch_px(centers: np.ndarray) -> float:
    """Median nearest-neighbor distance between opening centers."""
    if len(centers) < 2:
        raise PengaugeError("too-few-centers", f"need >= 2 centers, got {len(centers)}")
    dists, _ = cKDTree(centers).query(centers, k=2)
    return float(np.median(dists[:, 1]))


def estimate_distance(pitch_px: float, net: NetSpec, cam: CameraModel) -> float:
    """Similar-triangles pinhole relation: distance = focal_px * pitch / pitch_px."""
    if pitch_px <= 0:
        raise PengaugeError("bad-pitch", f"pitch_px must be positive, got {pitch_px}")
    return cam.focal_px * net.pitch / pitch_px


def fit_phase(centers: np.ndarray, pitch_px: float) -> tuple[float, float]:
    """Grid offset of the opening centers: circular mean of coordinates mod pitch."""
    if len(centers) < 1:
        raise PengaugeError("too-few-centers", "need >= 1 center to fit a phase")
    out = []
    for axis in range(2):
        theta = centers[:, axis] * (2.0 * np.pi / pitch_px)
        angle = np.arctan2(np.sin(theta).mean(), np.cos(theta).mean())
        out.append(float(angle * pitch_px / (2.0 * np.pi)) % pitch_px)
    return out[0], out[1]


def refine_grid(centers: np.ndarray, pitch0: float) -> tuple[float, tuple[float, float]]:
    """Sharpen a coarse pitch estimate by snapping center rows/columns to integer periods.

    Median nearest-neighbor pitch is accurate to a fraction of a pixel, which
    still lets the ideal grid drift against the observed one across a frame.
    Clustering center coordinates into grid columns and dividing total span by
    total period count brings the error down by roughly the column count.
    """
    pitches = []
    for axis in range(2):
        coords = np.sort(centers[:, axis])
        if len(coords) < 2:
            continue
        gaps = np.diff(coords)
        cuts = np.flatnonzero(gaps > pitch0 / 2.0)
        cols = [float(c.mean()) for c in np.split(coords, cuts + 1)]
        if len(cols) < 2:
            continue
        col_gaps = np.diff(cols)
        periods = np.maximum(1, np.rint(col_gaps / pitch0))
        pitches.append(col_gaps.sum() / periods.sum())
    pitch = float(np.mean(pitches)) if pitches else float(pitch0)
    return pitch, fit_phase(centers, pitch)


def render_ideal_net(distance: float, net: NetSpec, cam: CameraModel, phase: tuple[float, float] = (0.0, 0.0)) -> BinaryMask:
    """Axis-aligned clean-net mask at a filming distance; 1 = twine, 0 = opening.

    Opening centers sit at phase + k * pitch_px per axis; twine lines of width
    max(1, round(focal_px * twine / distance)) run midway between them.
    """
    if distance <= 0:
        raise PengaugeError("bad-distance", f"distance must be positive, got {distance}")
    s = cam.focal_px * net.pitch / distance
    if s < MIN_RENDER_PITCH_PX:
        raise PengaugeError(
            "unresolvable", f"mesh pitch {s:.2f} px at {distance} m is below {MIN_RENDER_PITCH_PX} px"
        )
    w = max(1.0, np.rint(cam.focal_px * net.twine / distance))
    dx, dy = phase

    def twine_1d(size: int, offset: float) -> np.ndarray:
        # half-open band so a w-px line always covers exactly ~w integer columns
        u = np.mod(np.arange(size) - offset, s) - s / 2.0
        return (u >= -w / 2.0) & (u < w / 2.0)

    tx = twine_1d(cam.image_width, dx)
    ty = twine_1d(cam.image_height, dy)
    return BinaryMask(tx[None, :] | ty[:, None])
