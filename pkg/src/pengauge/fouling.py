"""Biofouling quantification: per-frame coverage, footage filters, mission means.

A frame's fouling fraction is the share of ideal open mesh area that the
observed mask occludes. The ideal net is re-rendered per frame at the
estimated (or configured) filming distance and aligned by grid phase.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from skimage.measure import label as sk_label
from skimage.measure import regionprops

from .errors import PengaugeError
from .imaging import BinaryMask, Image
from .net_geometry import (
    CameraModel,
    NetSpec,
    detect_mesh_centers,
    estimate_distance,
    estimate_pitch_px,
    fit_phase,
    refine_grid,
    render_ideal_net,
)
from .segmentation import PixelClassifier, predict_mask

SPECKLE_FACTOR = 0.1  # 1-components below (0.1 * pitch)^2 px are sensor/classifier noise
PINHOLE_FACTOR = 0.2  # 0-components below (0.2 * pitch)^2 px are holes in solid material
MIN_SOLIDITY = 0.2  # thin streak artifacts fall far below this
SOLIDITY_MAX_AREA_FACTOR = 2.0  # solidity test only applies below (2 * pitch)^2:
#   the connected twine lattice itself is huge and low-solidity by nature

SPEED_FLOOR = 0.05  # m/s
SPEED_CEIL = 0.30  # m/s
SPEED_MEDIAN_BAND = 0.05  # m/s around the mission median


def frame_coverage(ideal: BinaryMask, actual: BinaryMask) -> float:
    """Share of ideal open area that the observed mask occludes."""
    if ideal.bits.shape != actual.bits.shape:
        raise PengaugeError("dimension-mismatch", f"{ideal.bits.shape} vs {actual.bits.shape}")
    open_px = ~ideal.bits
    total = int(open_px.sum())
    if total == 0:
        raise PengaugeError("no-openings", "ideal mask has no open area")
    return int((open_px & actual.bits).sum()) / total


def contour_filter(mask: BinaryMask, expected_pitch_px: float) -> BinaryMask:
    """Size/shape cleanup scaled to the mesh pitch.

    Removes speckle 1-components, fills pinhole 0-components, and drops thin
    low-solidity streaks (only below a size cap: the twine lattice is one big
    low-solidity component and must survive).
    """
    if expected_pitch_px <= 0:
        raise PengaugeError("bad-pitch", f"expected_pitch_px must be positive, got {expected_pitch_px}")
    speckle_area = (SPECKLE_FACTOR * expected_pitch_px) ** 2
    pinhole_area = (PINHOLE_FACTOR * expected_pitch_px) ** 2
    solidity_cap = (SOLIDITY_MAX_AREA_FACTOR * expected_pitch_px) ** 2

    bits = mask.bits.copy()
    labels = sk_label(bits, connectivity=1)
    for rp in regionprops(labels):
        if rp.area < speckle_area or (rp.area <= solidity_cap and rp.solidity < MIN_SOLIDITY):
            bits[labels == rp.label] = False

    holes, n = ndimage.label(~bits, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]))
    if n:
        areas = np.bincount(holes.ravel(), minlength=n + 1)
        border = np.unique(np.concatenate([holes[0, :], holes[-1, :], holes[:, 0], holes[:, -1]]))
        small = areas < pinhole_area
        small[0] = False
        small[border] = False  # border slivers are clipped openings, not pinholes
        bits[small[holes]] = True
    return BinaryMask(bits)


def frame_speeds(times: np.ndarray, positions: np.ndarray, frame_times: np.ndarray) -> np.ndarray:
    """Speed at each frame time by central differences over a 1 s baseline.

    Positions are interpolated from the trajectory log; first/last frames fall
    back to one-sided differences.
    """
    if len(times) < 3:
        raise PengaugeError("too-few-samples", "need >= 3 trajectory samples")

    def pos_at(t):
        t = np.clip(t, times[0], times[-1])
        return np.stack([np.interp(t, times, positions[:, k]) for k in range(3)], axis=-1)

    ft = np.asarray(frame_times, dtype=np.float64)
    speeds = np.empty(len(ft))
    for i, t in enumerate(ft):
        lo, hi = t - 1.0, t + 1.0
        if lo < times[0]:
            lo, hi = t, t + 1.0
        elif hi > times[-1]:
            lo, hi = t - 1.0, t
        span = hi - lo
        speeds[i] = float(np.linalg.norm(pos_at(hi) - pos_at(lo)) / span) if span > 0 else 0.0
    return speeds


def movement_filter(times: np.ndarray, positions: np.ndarray, frame_times: np.ndarray) -> np.ndarray:
    """Boolean accept flag per frame: speed in the uniform-motion band.

    A frame passes when its speed is inside [SPEED_FLOOR, SPEED_CEIL] m/s and
    within SPEED_MEDIAN_BAND of the mission's median frame speed.
    """
    speeds = frame_speeds(times, positions, frame_times)
    median = float(np.median(speeds))
    in_band = (speeds >= SPEED_FLOOR) & (speeds <= SPEED_CEIL)
    near_median = np.abs(speeds - median) <= SPEED_MEDIAN_BAND
    return in_band & near_median


@dataclass(frozen=True)
class FrameEstimate:
    frame_id: str
    t: float
    fouling_fraction: float | None
    distance_est: float | None
    accepted: bool
    reason: str = ""  # rejection reason when not accepted


@dataclass(frozen=True)
class MissionReport:
    frames: list[FrameEstimate]
    mean_fouling: float
    frames_total: int
    frames_accepted: int
    config: dict

    def to_dict(self) -> dict:
        return {
            "summary": {
                "mean_fouling": self.mean_fouling,
                "frames_total": self.frames_total,
                "frames_accepted": self.frames_accepted,
                "config": self.config,
            },
            "frames": [
                {
                    "id": f.frame_id,
                    "t": f.t,
                    "fouling_fraction": f.fouling_fraction,
                    "distance_m": f.distance_est,
                    "accepted": f.accepted,
                    "reason": f.reason,
                }
                for f in self.frames
            ],
        }

    def to_table(self) -> str:
        lines = [f"{'frame':10s} {'t[s]':>8s} {'fouling':>8s} {'dist[m]':>8s} {'ok':>3s} reason"]
        for f in self.frames:
            frac = "-" if f.fouling_fraction is None else f"{f.fouling_fraction:.4f}"
            dist = "-" if f.distance_est is None else f"{f.distance_est:.3f}"
            lines.append(f"{f.frame_id:10s} {f.t:8.2f} {frac:>8s} {dist:>8s} {'y' if f.accepted else 'n':>3s} {f.reason}")
        lines.append(
            f"mean fouling {self.mean_fouling:.4f} over {self.frames_accepted}/{self.frames_total} accepted frames"
        )
        return "\n".join(lines)


@dataclass(frozen=True)
class FrameInput:
    frame_id: str
    t: float
    image: Image | None = None  # for classifier segmentation
    mask: BinaryMask | None = None  # pre-made (external/oracle) segmentation


@dataclass
class EstimateConfig:
    net: NetSpec = field(default_factory=NetSpec)
    cam: CameraModel | None = None  # None: taken per-frame from mask dimensions is not possible; must be set
    classifier: PixelClassifier | None = None
    use_contour_filter: bool = True
    use_movement_filter: bool = True
    fixed_distance: float | None = None
    mask_source: str = "classifier"  # "classifier" | "external"

    def echo(self) -> dict:
        return {
            "contour_filter": self.use_contour_filter,
            "movement_filter": self.use_movement_filter,
            "fixed_distance": self.fixed_distance,
            "mask_source": self.mask_source,
            "net_pitch_m": self.net.pitch,
            "net_twine_m": self.net.twine,
        }


def _segment(frame: FrameInput, cfg: EstimateConfig) -> BinaryMask:
    if frame.mask is not None:
        return frame.mask
    if cfg.classifier is None:
        raise PengaugeError("no-classifier", f"frame {frame.frame_id} has no mask and no classifier is configured")
    return predict_mask(cfg.classifier, frame.image)


def estimate_frame(frame: FrameInput, cfg: EstimateConfig) -> FrameEstimate:
    """Segment -> contour-filter -> centers -> pitch -> distance -> ideal -> coverage."""
    cam = cfg.cam
    mask = _segment(frame, cfg)

    if cfg.use_contour_filter:
        if cfg.fixed_distance is not None:
            pitch_hint = cam.focal_px * cfg.net.pitch / cfg.fixed_distance
        else:
            bootstrap = detect_mesh_centers(mask)
            try:
                pitch_hint = estimate_pitch_px(bootstrap)
            except PengaugeError:
                pitch_hint = None
        if pitch_hint is not None:
            mask = contour_filter(mask, pitch_hint)

    centers = detect_mesh_centers(mask)
    distance = cfg.fixed_distance
    phase = None
    if len(centers) >= 2:
        pitch0 = estimate_pitch_px(centers)
        pitch, phase = refine_grid(centers, pitch0)
        if distance is None:
            distance = estimate_distance(pitch, cfg.net, cam)
    elif distance is not None and len(centers) == 1:
        pitch = cam.focal_px * cfg.net.pitch / distance
        phase = fit_phase(centers, pitch)
    if distance is None:
        return FrameEstimate(frame.frame_id, frame.t, None, None, False, "mesh-not-detected")
    if phase is None:
        phase = (0.0, 0.0)  # fully fouled view: coverage is ~1 regardless of alignment

    try:
        ideal = render_ideal_net(distance, cfg.net, cam, phase=phase)
    except PengaugeError:
        return FrameEstimate(frame.frame_id, frame.t, None, distance, False, "ideal-unresolvable")
    fraction = frame_coverage(ideal, mask)
    return FrameEstimate(frame.frame_id, frame.t, fraction, distance, True)


def estimate_mission(
    frames: list[FrameInput],
    cfg: EstimateConfig,
    trajectory: tuple[np.ndarray, np.ndarray] | None = None,
) -> MissionReport:
    """Full-mission estimate: filter footage, estimate per frame, average.

    trajectory is (times, positions[n, 3]); required when the movement filter
    is enabled. Raises when no frame survives filtering.
    """
    if cfg.cam is None:
        raise PengaugeError("no-camera", "EstimateConfig.cam must be set")
    if cfg.use_movement_filter:
        if trajectory is None:
            raise PengaugeError("trajectory-missing", "movement filter needs a trajectory log")
        accept = movement_filter(trajectory[0], trajectory[1], np.array([f.t for f in frames]))
    else:
        accept = np.ones(len(frames), dtype=bool)

    estimates: list[FrameEstimate] = []
    for frame, ok in zip(frames, accept):
        if not ok:
            estimates.append(FrameEstimate(frame.frame_id, frame.t, None, None, False, "movement"))
            continue
        estimates.append(estimate_frame(frame, cfg))

    accepted = [e.fouling_fraction for e in estimates if e.accepted]
    if not accepted:
        raise PengaugeError("no-accepted-frames", "every frame was filtered out or failed")
    mean = float(np.mean(accepted))
    if math.isnan(mean):
        raise PengaugeError("no-accepted-frames", "mean over accepted frames is undefined")
    return MissionReport(
        frames=estimates,
        mean_fouling=mean,
        frames_total=len(frames),
        frames_accepted=len(accepted),
        config=cfg.echo(),
    )
