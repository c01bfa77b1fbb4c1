"""The thirteen lesion descriptors: first-order pixel statistics and GLCM texture.

Feature order (the F1..F13 CSV columns and the network input order)::

    contrast, correlation, energy, homogeneity, mean, std, kurtosis,
    skewness, variance, smoothness, idm, rms, entropy

Intensities are L*/100 of the lesion pixels. The co-occurrence matrix uses 8
gray levels, a single (0, +1) offset and symmetric accumulation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .colorspace import LabImage

DEFAULT_LEVELS = 8
FEATURE_ORDER = (
    "contrast", "correlation", "energy", "homogeneity", "mean", "std",
    "kurtosis", "skewness", "variance", "smoothness", "idm", "rms", "entropy",
)


class DegenerateLesionError(ValueError):
    """The lesion mask is too small to compute the descriptors."""


@dataclass(frozen=True)
class Glcm:
    q: np.ndarray

    @property
    def levels(self) -> int:
        return self.q.shape[0]


@dataclass(frozen=True)
class PixelStats:
    mean: float
    std: float
    variance: float
    skewness: float
    kurtosis: float
    smoothness: float
    rms: float


@dataclass(frozen=True)
class GlcmFeatures:
    contrast: float
    correlation: float
    energy: float
    homogeneity: float
    idm: float
    entropy: float


def quantize_gray(lab: LabImage, mask: np.ndarray, levels: int = DEFAULT_LEVELS
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Gray-level raster (-1 where masked out) and the lesion intensities.

    Intensities come back in ascending order so downstream moments do not
    depend on pixel traversal order.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != lab.pixels.shape[:2]:
        raise ValueError("mask shape does not match image")
    if mask.sum() < 2:
        raise DegenerateLesionError("degenerate lesion")
    intensity = lab.lightness / 100.0
    gray = np.minimum(np.floor(intensity * levels), levels - 1).astype(np.int64)
    gray = np.where(mask, gray, -1)
    return gray, np.sort(intensity[mask])


def compute_glcm(gray: np.ndarray, levels: int = DEFAULT_LEVELS) -> Glcm:
    """Symmetric, normalized co-occurrence of horizontal neighbours.

    ``gray`` holds levels in [0, levels) and -1 for absent pixels.
    """
    left, right = gray[:, :-1], gray[:, 1:]
    ok = (left >= 0) & (right >= 0)
    if not ok.any():
        raise DegenerateLesionError("no co-occurrence pairs")
    counts = np.zeros((levels, levels), dtype=np.int64)
    np.add.at(counts, (left[ok], right[ok]), 1)
    counts = counts + counts.T
    return Glcm(counts / counts.sum())


def glcm_features(g: Glcm) -> GlcmFeatures:
    q = g.q
    i, j = np.indices(q.shape)
    d = i - j
    contrast = float(np.sum(d ** 2 * q))
    px = q.sum(axis=1)
    py = q.sum(axis=0)
    lv = np.arange(q.shape[0])
    mu_x, mu_y = float(lv @ px), float(lv @ py)
    sd_x = float(np.sqrt(((lv - mu_x) ** 2) @ px))
    sd_y = float(np.sqrt(((lv - mu_y) ** 2) @ py))
    if sd_x * sd_y <= 1e-15:
        corr = 0.0
    else:
        corr = float(np.sum((i - mu_x) * (j - mu_y) * q) / (sd_x * sd_y))
        corr = min(1.0, max(-1.0, corr))
    nz = q[q > 0]
    return GlcmFeatures(
        contrast=contrast,
        correlation=corr,
        energy=float(np.sum(q ** 2)),
        homogeneity=float(np.sum(q / (1.0 + np.abs(d)))),
        idm=float(np.sum(q / (1.0 + d ** 2))),
        entropy=float(-np.sum(nz * np.log(nz))) + 0.0,
    )


def pixel_statistics(intensities) -> PixelStats:
    """Population moments of the lesion intensities.

    When the spread is zero, skewness and excess kurtosis are reported as 0.
    """
    v = np.asarray(intensities, dtype=np.float64)
    if v.size < 2:
        raise DegenerateLesionError("degenerate lesion")
    # identical values: take the mean exactly so the spread is exactly zero
    mu = float(v[0]) if np.all(v == v[0]) else float(v.mean())
    dev = v - mu
    var = float(np.mean(dev ** 2))
    sd = float(np.sqrt(var))
    if sd == 0.0:
        skew = kurt = 0.0
    else:
        z = dev / sd
        skew = float(np.mean(z ** 3))
        kurt = float(np.mean(z ** 4)) - 3.0
    return PixelStats(
        mean=mu, std=sd, variance=var, skewness=skew, kurtosis=kurt,
        smoothness=1.0 - 1.0 / (1.0 + var),
        rms=float(np.sqrt(np.mean(v ** 2))),
    )


def check_feature_ranges(f: np.ndarray, levels: int = DEFAULT_LEVELS) -> None:
    if f.shape != (13,) or not np.all(np.isfinite(f)):
        raise AssertionError(f"feature vector must be 13 finite values: {f}")
    contrast, corr, energy, homog = f[0], f[1], f[2], f[3]
    idm, entropy = f[10], f[12]
    if not (0 < energy <= 1 and 0 < homog <= 1 and 0 < idm <= 1):
        raise AssertionError(f"energy/homogeneity/idm out of (0, 1]: {f}")
    if not -1 <= corr <= 1:
        raise AssertionError(f"correlation out of [-1, 1]: {corr}")
    if not 0 <= entropy <= 2 * np.log(levels) + 1e-12:
        raise AssertionError(f"entropy out of range: {entropy}")
    if contrast < 0:
        raise AssertionError(f"negative contrast: {contrast}")


def extract_features(lab: LabImage, mask: np.ndarray, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """13-entry feature vector for the masked lesion, in FEATURE_ORDER."""
    gray, intensities = quantize_gray(lab, mask, levels)
    t = glcm_features(compute_glcm(gray, levels))
    s = pixel_statistics(intensities)
    f = np.array([
        t.contrast, t.correlation, t.energy, t.homogeneity,
        s.mean, s.std, s.kurtosis, s.skewness, s.variance, s.smoothness,
        t.idm, s.rms, t.entropy,
    ])
    check_feature_ranges(f, levels)
    return f
