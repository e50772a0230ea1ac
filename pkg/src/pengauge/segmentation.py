"""Per-pixel net-vs-background segmentation and its evaluation metric.

The in-repo classifier is a logistic regression on color alone (bias + three
channels), trained by full-batch gradient descent. It is deliberately minimal;
stronger external segmenters plug in through the binary-mask PNG contract.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PengaugeError
from .imaging import (
    CLASS_BLURRY,
    CLASS_CAGE,
    CLASS_UNLABELED,
    BinaryMask,
    Image,
    LabeledMask,
    read_binary_mask,
    rgb_to_lab,
)

TRAIN_PIXEL_CAP = 500_000  # full-batch gradient descent stays in memory
DEFAULT_EPOCHS = 400
DEFAULT_LEARNING_RATE = 3.0
DEFAULT_THRESHOLD = 0.45


@dataclass(frozen=True)
class PixelClassifier:
    weights: np.ndarray  # (4,) bias + 3 color channels
    colorspace: str  # "rgb" | "lab"
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if self.weights.shape != (4,) or not np.isfinite(self.weights).all():
            raise PengaugeError("bad-classifier", "weights must be 4 finite reals")
        if not 0.0 < self.threshold < 1.0:
            raise PengaugeError("bad-classifier", f"threshold {self.threshold} outside (0, 1)")


@dataclass(frozen=True)
class TrainReport:
    train_pixels: int
    test_pixels: int
    test_accuracy: float
    test_dice: float
    epochs: int
    final_loss: float
    loss_history: tuple[float, ...] = ()


def split_dataset(entries: list, ratio: float = 0.8, seed: int = 0) -> tuple[list, list]:
    """Deterministic shuffled split at the entry (image) level."""
    if len(entries) < 2:
        raise PengaugeError("too-few-entries", "need at least 2 entries to split")
    order = np.random.default_rng(seed).permutation(len(entries))
    n_train = int(len(entries) * ratio)
    n_train = max(1, min(len(entries) - 1, n_train))
    train = [entries[i] for i in order[:n_train]]
    test = [entries[i] for i in order[n_train:]]
    return train, test


def pixel_features(img: Image, colorspace: str) -> np.ndarray:
    """(n, 4) design matrix: bias column + channels normalized to [0, 1]."""
    if colorspace == "rgb":
        chans = img.pixels.reshape(-1, 3).astype(np.float64) / 255.0
    elif colorspace == "lab":
        lab = rgb_to_lab(img).pixels.reshape(-1, 3)
        chans = np.empty_like(lab)
        chans[:, 0] = lab[:, 0] / 100.0
        chans[:, 1] = (lab[:, 1] + 128.0) / 255.0
        chans[:, 2] = (lab[:, 2] + 128.0) / 255.0
    else:
        raise PengaugeError("bad-colorspace", f"unknown colorspace {colorspace!r}")
    return np.concatenate([np.ones((chans.shape[0], 1)), chans], axis=1)


def _labels_from_mask(mask: LabeledMask) -> tuple[np.ndarray, np.ndarray]:
    """Binary targets (cage = 1, sea/fish = 0) and the valid-pixel selector.

    Unlabeled and blurry pixels are excluded from training and scoring.
    """
    classes = mask.classes.ravel()
    valid = (classes != CLASS_UNLABELED) & (classes != CLASS_BLURRY)
    return (classes == CLASS_CAGE).astype(np.float64), valid


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log_loss(weights: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    """Mean negative log-likelihood, computed from logits for stability."""
    z = X @ weights
    # log(1 + exp(-|z|)) + max(z,0) - z*y  ==  -[y log p + (1-y) log(1-p)]
    loss = np.logaddexp(0.0, -np.abs(z)) + np.maximum(z, 0.0) - z * y
    return float(loss.mean())


def log_loss_gradient(weights: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    p = _sigmoid(X @ weights)
    return X.T @ (p - y) / X.shape[0]


def _collect_pixels(entries, colorspace):
    xs, ys = [], []
    for img, mask in entries:
        X = pixel_features(img, colorspace)
        y, valid = _labels_from_mask(mask)
        xs.append(X[valid])
        ys.append(y[valid])
    if not xs:
        return np.empty((0, 4)), np.empty(0)
    return np.concatenate(xs), np.concatenate(ys)


def train_pixel_classifier(
    train_entries: list[tuple[Image, LabeledMask]],
    test_entries: list[tuple[Image, LabeledMask]],
    colorspace: str = "lab",
    epochs: int = DEFAULT_EPOCHS,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    threshold: float = DEFAULT_THRESHOLD,
    seed: int = 0,
) -> tuple[PixelClassifier, TrainReport]:
    """Full-batch gradient descent on the mean log-loss; deterministic given seed.

    Training pixels above TRAIN_PIXEL_CAP are subsampled (seeded) to bound memory.
    """
    X, y = _collect_pixels(train_entries, colorspace)
    if X.shape[0] == 0:
        raise PengaugeError("no-labels", "training set has no labeled pixels")
    if y.min() == y.max():
        raise PengaugeError("single-class", "training set holds only one class")
    if X.shape[0] > TRAIN_PIXEL_CAP:
        keep = np.random.default_rng(seed).choice(X.shape[0], TRAIN_PIXEL_CAP, replace=False)
        keep.sort()
        X, y = X[keep], y[keep]

    w = np.zeros(4)
    history = []
    for _ in range(epochs):
        history.append(log_loss(w, X, y))
        w = w - learning_rate * log_loss_gradient(w, X, y)
    final = log_loss(w, X, y)
    history.append(final)

    clf = PixelClassifier(weights=w, colorspace=colorspace, threshold=threshold)
    Xt, yt = _collect_pixels(test_entries, colorspace)
    if Xt.shape[0]:
        pred = _sigmoid(Xt @ w) >= threshold
        truth = yt >= 0.5
        accuracy = float((pred == truth).mean())
        denom = int(pred.sum() + truth.sum())
        test_dice = 1.0 if denom == 0 else 2.0 * float((pred & truth).sum()) / denom
    else:
        accuracy, test_dice = float("nan"), float("nan")
    report = TrainReport(
        train_pixels=int(X.shape[0]),
        test_pixels=int(Xt.shape[0]),
        test_accuracy=accuracy,
        test_dice=test_dice,
        epochs=epochs,
        final_loss=final,
        loss_history=tuple(history),
    )
    return clf, report


def predict_mask(clf: PixelClassifier, img: Image) -> BinaryMask:
    """sigmoid(w.x) >= threshold -> net material. The boundary counts as net."""
    X = pixel_features(img, clf.colorspace)
    p = _sigmoid(X @ clf.weights)
    return BinaryMask((p >= clf.threshold).reshape(img.height, img.width))


def dice(a: BinaryMask, b: BinaryMask) -> float:
    """2|A.B| / (|A|+|B|); two empty masks score a perfect 1.0."""
    if a.bits.shape != b.bits.shape:
        raise PengaugeError("dimension-mismatch", f"{a.bits.shape} vs {b.bits.shape}")
    denom = int(a.bits.sum()) + int(b.bits.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int((a.bits & b.bits).sum()) / denom


def ingest_external_mask(path, expected_size: tuple[int, int]) -> BinaryMask:
    """Validate an externally produced mask file against the binary-PNG contract.

    expected_size is (width, height) of the frame the mask annotates.
    """
    mask = read_binary_mask(path)
    if (mask.width, mask.height) != tuple(expected_size):
        raise PengaugeError(
            "dimension-mismatch",
            f"{path}: mask is {mask.width}x{mask.height}, frame is {expected_size[0]}x{expected_size[1]}",
        )
    return mask


def save_classifier(clf: PixelClassifier, path) -> None:
    """Plain-text persistence: colorspace, threshold, then the 4 weights."""
    lines = [f"colorspace={clf.colorspace}", f"threshold={float(clf.threshold)!r}"]
    lines += [f"w{i}={float(clf.weights[i])!r}" for i in range(4)]
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_classifier(path) -> PixelClassifier:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise PengaugeError("missing-file", str(path))
    fields = {}
    for line in text.splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    try:
        weights = np.array([float(fields[f"w{i}"]) for i in range(4)])
        return PixelClassifier(weights=weights, colorspace=fields["colorspace"], threshold=float(fields["threshold"]))
    except (KeyError, ValueError) as exc:
        raise PengaugeError("corrupt-file", f"{path}: {exc}")
