"""Raster primitives: RGB frames, CIELAB conversion, crops, sharpening, PNG I/O.

Everything downstream (clustering, segmentation, geometry, rendering) moves
pixels through the four container types defined here. All containers wrap a
numpy array and are treated as immutable after construction.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

from .errors import PengaugeError

# Classes used by labeled masks. 0 is reserved for "unlabeled".
CLASS_UNLABELED = 0
CLASS_SEA = 1
CLASS_CAGE = 2
CLASS_FISH = 3
CLASS_BLURRY = 4

CLASS_NAMES = {
    CLASS_UNLABELED: "unlabeled",
    CLASS_SEA: "sea",
    CLASS_CAGE: "cage",
    CLASS_FISH: "fish",
    CLASS_BLURRY: "blurry",
}
CLASS_IDS = {name: cid for cid, name in CLASS_NAMES.items()}


@dataclass(frozen=True, eq=False)
class Image:
    """8-bit RGB frame, shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.uint8:
            raise PengaugeError("bad-image", f"expected (h, w, 3) uint8, got {p.shape} {p.dtype}")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise PengaugeError("bad-image", "image dimensions must be >= 1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class LabImage:
    """CIELAB frame, float64 (height, width, 3) with channels (L, a, b)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3:
            raise PengaugeError("bad-image", f"expected (h, w, 3) float, got {p.shape}")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Per-pixel net/background mask; True = net or fouling material."""

    bits: np.ndarray

    def __post_init__(self):
        b = self.bits
        if b.ndim != 2 or b.dtype != np.bool_:
            raise PengaugeError("bad-mask", f"expected 2-d bool array, got {b.shape} {b.dtype}")

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]


@dataclass(frozen=True, eq=False)
class LabeledMask:
    """Per-pixel class annotations, uint8 values in CLASS_NAMES."""

    classes: np.ndarray

    def __post_init__(self):
        c = self.classes
        if c.ndim != 2 or c.dtype != np.uint8:
            raise PengaugeError("bad-mask", f"expected 2-d uint8 array, got {c.shape} {c.dtype}")
        if c.size and c.max() > CLASS_BLURRY:
            raise PengaugeError("out-of-palette", f"class value {int(c.max())} > {CLASS_BLURRY}")

    @property
    def width(self) -> int:
        return self.classes.shape[1]

    @property
    def height(self) -> int:
        return self.classes.shape[0]


# sRGB -> XYZ under D65, row sums equal the white point exactly so that
# pure white maps to L=100, a=b=0 with no rounding slack.
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE_D65 = _RGB_TO_XYZ.sum(axis=1)


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(c: np.ndarray) -> np.ndarray:
    c = np.clip(c, 0.0, 1.0)
    return np.where(c <= 0.0031308, c * 12.92, 1.055 * c ** (1 / 2.4) - 0.055)


def _lab_f(t: np.ndarray) -> np.ndarray:
    delta = 6.0 / 29.0
    return np.where(t > delta**3, np.cbrt(t), t / (3 * delta**2) + 4.0 / 29.0)


def _lab_f_inv(f: np.ndarray) -> np.ndarray:
    delta = 6.0 / 29.0
    return np.where(f > delta, f**3, 3 * delta**2 * (f - 4.0 / 29.0))


def rgb_to_lab(img: Image) -> LabImage:
    """Convert to CIELAB (D65), removing the sRGB companding first.

    Gray inputs (r == g == b) land exactly on a = b = 0.
    """
    rgb = img.pixels.astype(np.float64) / 255.0
    linear = _srgb_to_linear(rgb)
    xyz = linear @ _RGB_TO_XYZ.T
    f = _lab_f(xyz / _WHITE_D65)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return LabImage(lab)


def lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    """Inverse of rgb_to_lab for display, rounding into uint8 and clipping gamut.

    Accepts any (..., 3) float array of (L, a, b) triples.
    """
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=-1) * _WHITE_D65
    linear = xyz @ np.linalg.inv(_RGB_TO_XYZ).T
    srgb = _linear_to_srgb(linear)
    return np.clip(np.rint(srgb * 255.0), 0, 255).astype(np.uint8)


def _crop_window(size: int, fraction: float) -> tuple[int, int]:
    out = int(size * fraction)
    if out < 1:
        raise PengaugeError("bad-crop", f"crop of {size} px at fraction {fraction} is empty")
    start = (size - out) // 2  # rounds the top-left corner down when odd
    return start, out


def center_crop(img: Image, fraction) -> Image:
    """Centered sub-rectangle; `fraction` is one ratio or an (fx, fy) pair in (0, 1]."""
    fx, fy = (fraction, fraction) if np.isscalar(fraction) else fraction
    for f in (fx, fy):
        if not 0.0 < f <= 1.0:
            raise PengaugeError("bad-crop", f"fraction {f} outside (0, 1]")
    if fx == 1.0 and fy == 1.0:
        return img
    x0, w = _crop_window(img.width, fx)
    y0, h = _crop_window(img.height, fy)
    return Image(np.ascontiguousarray(img.pixels[y0 : y0 + h, x0 : x0 + w]))


_SHARPEN_KERNEL = np.array([[0, -1, 0], [-1, 5, -1], [0, -1, 0]], dtype=np.int32)


def sharpen(img: Image) -> Image:
    """3x3 unsharp kernel (center 5, cross -1), replicated borders, clamped to [0, 255]."""
    out = np.empty_like(img.pixels)
    for c in range(3):
        acc = ndimage.convolve(img.pixels[..., c].astype(np.int32), _SHARPEN_KERNEL, mode="nearest")
        out[..., c] = np.clip(acc, 0, 255).astype(np.uint8)
    return Image(out)


def _load_png(path) -> np.ndarray:
    try:
        with PILImage.open(path) as f:
            f.load()
            return np.asarray(f)
    except FileNotFoundError:
        raise PengaugeError("missing-file", str(path))
    except Exception as exc:
        raise PengaugeError("corrupt-file", f"{path}: {exc}")


def read_image(path) -> Image:
    arr = _load_png(path)
    if arr.ndim == 3 and arr.shape[2] == 4:
        arr = arr[..., :3]
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise PengaugeError("corrupt-file", f"{path}: not an 8-bit RGB image")
    return Image(arr.copy())


def _save_png(pil_img: PILImage.Image, path) -> None:
    if isinstance(path, (str, Path)):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
    pil_img.save(path, format="PNG")


def write_image(img: Image, path) -> None:
    _save_png(PILImage.fromarray(img.pixels, mode="RGB"), path)


def read_binary_mask(path) -> BinaryMask:
    arr = _load_png(path)
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise PengaugeError("corrupt-file", f"{path}: not an 8-bit grayscale mask")
    values = np.unique(arr)
    if not np.isin(values, (0, 255)).all():
        bad = values[~np.isin(values, (0, 255))]
        raise PengaugeError("out-of-palette", f"{path}: mask holds value {int(bad[0])}, expected only 0/255")
    return BinaryMask(arr == 255)


def write_binary_mask(mask: BinaryMask, path) -> None:
    arr = np.where(mask.bits, 255, 0).astype(np.uint8)
    _save_png(PILImage.fromarray(arr, mode="L"), path)


def read_labeled_mask(path) -> LabeledMask:
    arr = _load_png(path)
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise PengaugeError("corrupt-file", f"{path}: not an 8-bit grayscale mask")
    if arr.size and arr.max() > CLASS_BLURRY:
        raise PengaugeError("out-of-palette", f"{path}: class value {int(arr.max())} > {CLASS_BLURRY}")
    return LabeledMask(arr.copy())


def write_labeled_mask(mask: LabeledMask, path) -> None:
    _save_png(PILImage.fromarray(mask.classes, mode="L"), path)
