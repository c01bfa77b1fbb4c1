"""Synthetic data with known answers: separable feature blobs and diseased leaves."""

from __future__ import annotations

import numpy as np

from .dataset_io import ClassLabel, LabeledSample, RgbImage


def gaussian_blobs(n: int = 200, n_classes: int = 5, n_features: int = 13,
                   separation: float = 8.0, sigma: float = 1.0, seed: int = 0
                   ) -> list[LabeledSample]:
    """Class c is N(separation * e_c, sigma^2 I).

    Any two class means sit separation*sqrt(2) apart, so each mean lies
    separation/sqrt(2) (5.66 sigma at the default) from the bisecting plane.
    Classes are balanced; the first n % n_classes classes get one extra.
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        c = i % n_classes
        mean = np.zeros(n_features)
        mean[c] = separation
        x = mean + sigma * rng.standard_normal(n_features)
        out.append(LabeledSample(x, ClassLabel(c, f"blob{c}"), f"synthetic/blob{c}/{i:04d}"))
    return out


LEAF_GREEN = (60, 140, 50)
LESION_BROWN = (140, 80, 30)
BACKGROUND = (245, 245, 245)


def leaf_image(size: int = 64, spot_center=(0.6, 0.4), spot_radius: float = 0.15,
               noise: float = 4.0, seed: int = 0, spot_color=LESION_BROWN,
               leaf_color=LEAF_GREEN, leaf_radius: float = 0.45) -> tuple[RgbImage, np.ndarray]:
    """A green disc with one brown circular spot; returns (image, true spot mask).

    A ``leaf_radius`` above 0.71 fills the frame, like a close-up crop.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1)
    leaf = (xx - 0.5) ** 2 + (yy - 0.5) ** 2 <= leaf_radius ** 2
    spot = leaf & ((xx - spot_center[0]) ** 2 + (yy - spot_center[1]) ** 2 <= spot_radius ** 2)
    img = np.empty((size, size, 3))
    img[:] = BACKGROUND
    img[leaf] = leaf_color
    img[spot] = spot_color
    img += noise * rng.standard_normal(img.shape)
    return RgbImage(np.clip(np.round(img), 0, 255).astype(np.uint8)), spot


# spot colours for the synthetic leaf corpus; lightness differs per class
LEAF_CLASS_SPOTS = {
    "dark_spot": (110, 50, 20),
    "brown_spot": (150, 85, 35),
    "rust_spot": (200, 110, 40),
}


def write_leaf_dataset(root, per_class: int = 4, size: int = 32, seed: int = 0,
                       spots: dict | None = None) -> list:
    """Write ``<root>/<class>/<i>.png`` synthetic leaves; returns the written paths."""
    from pathlib import Path

    from PIL import Image

    spots = spots or LEAF_CLASS_SPOTS
    rng = np.random.default_rng(seed)
    paths = []
    for name, color in sorted(spots.items()):
        d = Path(root) / name
        d.mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            center = tuple(rng.uniform(0.4, 0.6, 2))
            img, _ = leaf_image(size, center, rng.uniform(0.12, 0.18),
                                seed=int(rng.integers(2**31)), spot_color=color,
                                leaf_radius=1.0)
            p = d / f"{i:03d}.png"
            Image.fromarray(img.pixels).save(p)
            paths.append(p)
    return paths
