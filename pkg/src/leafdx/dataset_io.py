"""Dataset loading and the CSV feature cache.

Datasets follow the class-per-directory layout::

    <root>/<class_name>/<image>.{png,jpg,jpeg}

Class indices are assigned in lexicographic order of directory names.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
FEATURE_NAMES = tuple(f"F{i}" for i in range(1, 14))
HEADER = (*FEATURE_NAMES, "label", "source_id")
# marks a rotated copy in source_id, e.g. "a/leaf.png#rot90"
AUGMENT_TAG = "#rot"


class DatasetError(Exception):
    """Raised for unreadable dataset roots or malformed feature tables."""


@dataclass(frozen=True)
class RgbImage:
    """8-bit RGB raster stored as a (height, width, 3) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) pixels, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if px.dtype != np.uint8:
            if np.any(px < 0) or np.any(px > 255):
                raise ValueError("channel values must lie in [0, 255]")
            px = px.astype(np.uint8)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class ClassLabel:
    index: int
    name: str


@dataclass
class LabeledSample:
    features: np.ndarray
    label: ClassLabel
    source_id: str

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if not np.all(np.isfinite(self.features)):
            raise ValueError(f"non-finite features for {self.source_id}")

    @property
    def is_augmented(self) -> bool:
        return AUGMENT_TAG in self.source_id

    @property
    def origin(self) -> str:
        """source_id of the original image this row was derived from."""
        return self.source_id.split(AUGMENT_TAG, 1)[0]


@dataclass
class LoadReport:
    """Images that could not be decoded, kept instead of aborting."""

    skipped: list[tuple[str, str]] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def read_image(path: str | Path) -> RgbImage:
    with Image.open(path) as im:
        return RgbImage(np.asarray(im.convert("RGB"), dtype=np.uint8))


def discover_classes(root: str | Path) -> list[ClassLabel]:
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root is not a readable directory: {root}")
    names = sorted(p.name for p in root.iterdir() if p.is_dir())
    return [ClassLabel(i, name) for i, name in enumerate(names)]


def iter_image_paths(root: str | Path) -> list[tuple[Path, ClassLabel]]:
    root = Path(root)
    out = []
    for label in discover_classes(root):
        for p in sorted((root / label.name).iterdir()):
            if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES:
                out.append((p, label))
    return out


def load_dataset(root: str | Path, report: LoadReport | None = None
                 ) -> list[tuple[RgbImage, ClassLabel]]:
    """Decode every image under ``root``.

    Undecodable files are skipped and recorded in ``report``; the load never
    aborts because of one bad file. Returns samples in sorted-path order.
    """
    report = report if report is not None else LoadReport()
    classes = discover_classes(root)
    if not classes:
        report.warnings.append("no classes found")
        log.warning("no classes found under %s", root)
        return []
    samples = []
    for path, label in iter_image_paths(root):
        try:
            samples.append((read_image(path), label))
        except (UnidentifiedImageError, OSError, ValueError) as exc:
            report.skipped.append((str(path), str(exc)))
            log.warning("skipping %s: %s", path, exc)
    return samples


def _fmt(x: float) -> str:
    # 17 significant digits round-trips every float64 exactly
    return format(float(x), ".17g")


def classes_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".classes.json")


def write_feature_table(samples: Sequence[LabeledSample], path: str | Path) -> None:
    """Write ``F1..F13,label,source_id`` CSV plus a sidecar with class names."""
    path = Path(path)
    for s in samples:
        if s.features.shape != (len(FEATURE_NAMES),):
            raise ValueError(f"{s.source_id}: expected 13 features, got {s.features.shape}")
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HEADER)
            for s in samples:
                w.writerow([*map(_fmt, s.features), s.label.index, s.source_id])
        names = {}
        for s in samples:
            names.setdefault(s.label.index, s.label.name)
        classes_path(path).write_text(
            json.dumps({str(k): v for k, v in sorted(names.items())}, indent=2) + "\n",
            encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot write feature table {path}: {exc}") from exc


def read_feature_table(path: str | Path) -> list[LabeledSample]:
    """Inverse of :func:`write_feature_table`.

    Raises DatasetError naming the offending row and column on bad input.
    """
    path = Path(path)
    names: dict[int, str] = {}
    side = classes_path(path)
    if side.exists():
        names = {int(k): v for k, v in json.loads(side.read_text(encoding="utf-8")).items()}
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read feature table {path}: {exc}") from exc
    with fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or tuple(header) != HEADER:
            raise DatasetError(f"{path}: header must be {','.join(HEADER)}")
        samples = []
        for lineno, row in enumerate(rows, start=2):
            if len(row) != len(HEADER):
                raise DatasetError(f"{path}:{lineno}: expected {len(HEADER)} columns, got {len(row)}")
            feats = []
            for col, cell in zip(FEATURE_NAMES, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DatasetError(f"{path}:{lineno}: column {col}: not a number: {cell!r}") from None
                if not math.isfinite(v):
                    raise DatasetError(f"{path}:{lineno}: column {col}: non-finite value")
                feats.append(v)
            try:
                idx = int(row[13])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: column label: not an integer: {row[13]!r}") from None
            if idx < 0:
                raise DatasetError(f"{path}:{lineno}: column label: negative class index")
            label = ClassLabel(idx, names.get(idx, f"class{idx}"))
            samples.append(LabeledSample(np.array(feats), label, row[14]))
    return samples


def class_names(samples: Iterable[LabeledSample]) -> list[str]:
    """Class names ordered by index; gaps get a placeholder name."""
    by_index: dict[int, str] = {}
    for s in samples:
        by_index.setdefault(s.label.index, s.label.name)
    if not by_index:
        return []
    return [by_index.get(i, f"class{i}") for i in range(max(by_index) + 1)]
