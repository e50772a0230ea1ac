"""Dataset directory layout shared by the labeling tool, trainer, and renderer.

Layout:
    <dir>/frames/<id>.png   8-bit RGB frames
    <dir>/masks/<id>.png    grayscale masks (labeled classes, or binary for missions)
    <dir>/index.tsv         append-only export log: id, year, location, crop, labeled_pixels
"""

import os
from dataclasses import dataclass
from pathlib import Path

from filelock import FileLock

from .errors import PengaugeError

INDEX_NAME = "index.tsv"
INDEX_HEADER = "id\tyear\tlocation\tcrop\tlabeled_pixels"


@dataclass(frozen=True)
class DatasetEntry:
    entry_id: str
    year: int
    location: str
    crop: str  # "x0,y0,w,h" in source-frame pixels
    labeled_pixels: int


def frame_path(dataset_dir, entry_id: str) -> Path:
    return Path(dataset_dir) / "frames" / f"{entry_id}.png"


def mask_path(dataset_dir, entry_id: str) -> Path:
    return Path(dataset_dir) / "masks" / f"{entry_id}.png"


def list_frame_ids(dataset_dir) -> list[str]:
    """Ids of every frame present, labeled or not."""
    frames = Path(dataset_dir) / "frames"
    if not frames.is_dir():
        return []
    return sorted(p.stem for p in frames.glob("*.png"))


def read_index(dataset_dir) -> list[DatasetEntry]:
    index = Path(dataset_dir) / INDEX_NAME
    if not index.exists():
        return []
    lines = index.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != INDEX_HEADER:
        raise PengaugeError("corrupt-file", f"{index}: bad or missing header")
    entries = []
    for line in lines[1:]:
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise PengaugeError("corrupt-file", f"{index}: malformed line {line!r}")
        entries.append(DatasetEntry(parts[0], int(parts[1]), parts[2], parts[3], int(parts[4])))
    return entries


def append_index(dataset_dir, entry: DatasetEntry) -> None:
    """Append one export record; rejects duplicate ids. Lock keeps writers serial."""
    root = Path(dataset_dir)
    root.mkdir(parents=True, exist_ok=True)
    index = root / INDEX_NAME
    with FileLock(str(index) + ".lock"):
        existing = {e.entry_id for e in read_index(root)}
        if entry.entry_id in existing:
            raise PengaugeError("duplicate-entry", f"id {entry.entry_id!r} already exported")
        line = f"{entry.entry_id}\t{entry.year}\t{entry.location}\t{entry.crop}\t{entry.labeled_pixels}\n"
        new_file = not index.exists()
        with open(index, "a", encoding="utf-8") as f:
            if new_file:
                f.write(INDEX_HEADER + "\n")
            f.write(line)
            f.flush()
            os.fsync(f.fileno())
