"""Image to feature-vector pipeline and its configuration.

RGB -> L*a*b* -> elbow k-means lesion mask -> 13 texture/statistics
features. Rotated copies reuse the original's lesion mask, rotated with it,
so an augmented row differs from its source only by the turn.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .augmentation import QUARTER_TURNS, rotate
from .colorspace import LabImage, srgb_to_lab
from .dataset_io import (AUGMENT_TAG, ClassLabel, DatasetError, LabeledSample, LoadReport,
                         RgbImage, discover_classes, iter_image_paths, read_image)
from .features import DEFAULT_LEVELS, DegenerateLesionError, extract_features
from .segmentation import DEFAULT_K_MAX, DEFAULT_SEED, SegmentationError, SegmentationResult, segment
from .trainers import TrainerConfig

log = logging.getLogger(__name__)

AUGMENT_MODES = ("none", "all")
HIDDEN_SIZES = (5, 10, 15, 20)


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    """Every setting a command needs; JSON round-trips through to_dict/from_dict."""

    dataset_root: str = "dataset"
    output_dir: str = "out"
    features_csv: str = ""          # empty: <output_dir>/features.csv
    glcm_levels: int = DEFAULT_LEVELS
    k_max: int = DEFAULT_K_MAX
    lesion: str | int = "auto"      # "auto" or a fixed cluster index
    segmentation_seed: int = DEFAULT_SEED
    augment: str = "none"
    max_side: int = 0               # 0 keeps rasters as decoded
    n_hidden: int = 20
    trials: int = 10
    ratio: float = 0.7
    base_seed: int = 0
    jobs: int = 1
    trainer: TrainerConfig = field(default_factory=TrainerConfig)

    def __post_init__(self):
        if isinstance(self.trainer, dict):
            self.trainer = TrainerConfig.from_dict(self.trainer)
        if self.augment not in AUGMENT_MODES:
            raise ConfigError(f"augment must be one of {AUGMENT_MODES}, got {self.augment!r}")
        if isinstance(self.lesion, str) and self.lesion != "auto":
            try:
                self.lesion = int(self.lesion)
            except ValueError:
                raise ConfigError(f"lesion must be 'auto' or a cluster index, got {self.lesion!r}") from None
        if isinstance(self.lesion, int) and self.lesion < 0:
            raise ConfigError("lesion index must be >= 0")
        if self.glcm_levels < 2:
            raise ConfigError("glcm_levels must be >= 2")
        if self.k_max < 2:
            raise ConfigError("k_max must be >= 2")
        for name in ("n_hidden", "trials", "jobs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.max_side < 0:
            raise ConfigError("max_side must be >= 0")
        if not 0 < self.ratio < 1:
            raise ConfigError("ratio must lie strictly between 0 and 1")

    @property
    def lesion_index(self) -> int | None:
        return None if self.lesion == "auto" else int(self.lesion)

    @property
    def features_path(self) -> Path:
        return Path(self.features_csv) if self.features_csv else Path(self.output_dir) / "features.csv"

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["trainer"] = self.trainer.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        return cls.from_dict(d)


def downscale(img: RgbImage, max_side: int) -> RgbImage:
    """Shrink so the longer side is at most ``max_side``; 0 disables."""
    if max_side <= 0 or max(img.height, img.width) <= max_side:
        return img
    s = max_side / max(img.height, img.width)
    size = (max(1, round(img.width * s)), max(1, round(img.height * s)))
    return RgbImage(np.asarray(Image.fromarray(img.pixels).resize(size, Image.BILINEAR)))


@dataclass
class ImageAnalysis:
    lab: LabImage
    segmentation: SegmentationResult
    features: np.ndarray

    def cluster_report(self) -> dict:
        m = self.segmentation.model
        return {"k": m.k, "centers": m.centers.tolist(),
                "lesion_cluster": self.segmentation.lesion_cluster, "wcss": m.wcss,
                "lesion_pixels": int(self.segmentation.lesion_mask.sum())}


def analyze_image(img: RgbImage, cfg: PipelineConfig) -> ImageAnalysis:
    """Segment and describe one image.

    Raises DegenerateLesionError when no usable lesion is found.
    """
    lab = srgb_to_lab(downscale(img, cfg.max_side))
    try:
        seg = segment(lab, cfg.k_max, cfg.segmentation_seed, cfg.lesion_index)
    except SegmentationError as exc:
        raise DegenerateLesionError(str(exc)) from exc
    feats = extract_features(lab, seg.lesion_mask, cfg.glcm_levels)
    return ImageAnalysis(lab, seg, feats)


def rotated_features(analysis: ImageAnalysis, levels: int) -> list[tuple[int, np.ndarray]]:
    """(degrees, features) for the 90, 180 and 270 degree copies."""
    out = []
    for k in QUARTER_TURNS:
        out.append((90 * k, extract_features(rotate(analysis.lab, k),
                                              rotate(analysis.segmentation.lesion_mask, k), levels)))
    return out


def _process(path: Path, label: ClassLabel, cfg: PipelineConfig, source_id: str
             ) -> tuple[list[LabeledSample], str | None]:
    try:
        img = read_image(path)
    except Exception as exc:  # Pillow raises a zoo of types on bad files
        return [], f"undecodable image: {exc}"
    try:
        a = analyze_image(img, cfg)
    except DegenerateLesionError as exc:
        return [], f"lesion segmentation failed: {exc}"
    rows = [LabeledSample(a.features, label, source_id)]
    if cfg.augment == "all":
        rows.extend(LabeledSample(f, label, f"{source_id}{AUGMENT_TAG}{deg}")
                    for deg, f in rotated_features(a, cfg.glcm_levels))
    return rows, None


def extract_dataset(cfg: PipelineConfig, report: LoadReport | None = None) -> list[LabeledSample]:
    """Feature rows for every image under ``cfg.dataset_root``, in sorted-path order.

    Failures are recorded in ``report`` and skipped. source_id is the path
    relative to the dataset root, so tables do not depend on where it lives.
    """
    report = report if report is not None else LoadReport()
    root = Path(cfg.dataset_root)
    if not discover_classes(root):
        report.warnings.append("no classes found")
        return []
    items = [(p, lab, cfg, p.relative_to(root).as_posix()) for p, lab in iter_image_paths(root)]
    if cfg.jobs > 1 and len(items) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(cfg.jobs) as ex:
            results = list(ex.map(_process, *zip(*items)))
    else:
        results = [_process(*it) for it in items]
    out = []
    for (path, *_), (rows, err) in zip(items, results):
        if err:
            report.skipped.append((str(path), err))
            log.warning("skipping %s: %s", path, err)
        out.extend(rows)
    return out


def check_samples(samples: Sequence[LabeledSample]) -> None:
    if not samples:
        raise DatasetError("feature table has no rows")
    counts: dict[int, int] = {}
    for s in samples:
        if not s.is_augmented:
            counts[s.label.index] = counts.get(s.label.index, 0) + 1
    if len(counts) < 2:
        raise DatasetError("need at least two classes")
