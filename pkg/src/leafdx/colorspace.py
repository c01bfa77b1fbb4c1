"""sRGB (IEC 61966-2-1) to CIE L*a*b* under the D65 white point."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset_io import RgbImage

WHITE_D65 = np.array([0.95047, 1.0, 1.08883])

_PRIMARIES_XY = np.array([[0.64, 0.33], [0.30, 0.60], [0.15, 0.06]])


def _rgb_to_xyz_matrix(primaries_xy: np.ndarray, white: np.ndarray) -> np.ndarray:
    # columns are primary XYZ scaled so that RGB (1, 1, 1) lands exactly on white
    x, y = primaries_xy[:, 0], primaries_xy[:, 1]
    xyz = np.stack([x / y, np.ones(3), (1 - x - y) / y])
    scale = np.linalg.solve(xyz, white)
    return xyz * scale


SRGB_TO_XYZ = _rgb_to_xyz_matrix(_PRIMARIES_XY, WHITE_D65)

_DELTA = 6.0 / 29.0


@dataclass(frozen=True)
class LabImage:
    """(height, width, 3) float64 array of L*, a*, b*."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) pixels, got shape {px.shape}")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def lightness(self) -> np.ndarray:
        return self.pixels[..., 0]

    @property
    def chroma_ab(self) -> np.ndarray:
        return self.pixels[..., 1:]


def srgb_decode(v: np.ndarray) -> np.ndarray:
    """Undo the sRGB transfer curve; ``v`` in [0, 1]."""
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def _lab_f(t: np.ndarray) -> np.ndarray:
    return np.where(t > _DELTA ** 3, np.cbrt(t), t / (3 * _DELTA ** 2) + 4.0 / 29.0)


def rgb_array_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Vectorized conversion of an (..., 3) array of 0..255 values."""
    lin = srgb_decode(np.asarray(rgb, dtype=np.float64) / 255.0)
    xyz = lin @ SRGB_TO_XYZ.T
    f = _lab_f(xyz / WHITE_D65)
    L = np.clip(116.0 * f[..., 1] - 16.0, 0.0, 100.0)
    a = 500.0 * (f[..., 0] - f[..., 1])
    b = 200.0 * (f[..., 1] - f[..., 2])
    return np.stack([L, a, b], axis=-1)


def srgb_to_lab(img: RgbImage) -> LabImage:
    return LabImage(rgb_array_to_lab(img.pixels))
