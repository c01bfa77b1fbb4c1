"""Lossless quarter-turn rotations used to enlarge the training set."""

from __future__ import annotations

from typing import Sequence, TypeVar

import numpy as np

from .colorspace import LabImage
from .dataset_io import ClassLabel, RgbImage

R = TypeVar("R")

QUARTER_TURNS = (1, 2, 3)


def rotate_array(a: np.ndarray, quarter_turns: int) -> np.ndarray:
    """Rotate the first two axes clockwise by ``quarter_turns`` x 90 degrees.

    One turn sends pixel (r, c) of an H x W array to (c, H - 1 - r) of the
    W x H result.
    """
    if quarter_turns not in QUARTER_TURNS:
        raise ValueError(f"quarter_turns must be one of {QUARTER_TURNS}, got {quarter_turns!r}")
    a = np.asarray(a)
    for _ in range(quarter_turns):
        h = a.shape[0]
        out = np.empty((a.shape[1], h) + a.shape[2:], dtype=a.dtype)
        rows, cols = np.indices(a.shape[:2])
        out[cols, h - 1 - rows] = a[rows, cols]
        a = out
    return a


def rotate(img: R, quarter_turns: int) -> R:
    """Rotate an RgbImage, LabImage or plain array."""
    if isinstance(img, RgbImage):
        return RgbImage(rotate_array(img.pixels, quarter_turns))
    if isinstance(img, LabImage):
        return LabImage(rotate_array(img.pixels, quarter_turns))
    return rotate_array(img, quarter_turns)


def augment_training_set(samples: Sequence[tuple[R, ClassLabel]]) -> list[tuple[R, ClassLabel]]:
    """Each sample followed by its 90, 180 and 270 degree rotations.

    Only ever call this on the training side of a split.
    """
    out = []
    for raster, label in samples:
        out.append((raster, label))
        out.extend((rotate(raster, k), label) for k in QUARTER_TURNS)
    return out
