"""k-means lesion segmentation in the (a*, b*) plane with elbow-selected k."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .colorspace import LabImage

DEFAULT_SEED = 42
DEFAULT_K_MAX = 8
MAX_ITER = 300
ELBOW_RESTARTS = 3


class SegmentationError(ValueError):
    pass


@dataclass(frozen=True)
class ClusterModel:
    k: int
    centers: np.ndarray      # (k, 2)
    assignment: np.ndarray   # (n,) int
    wcss: float
    n_iter: int = 0


@dataclass(frozen=True)
class SegmentationResult:
    model: ClusterModel
    lesion_mask: np.ndarray  # (H, W) bool
    lesion_cluster: int


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # explicit differences: the expanded |x|^2 - 2xc + |c|^2 form loses
    # exact zeros, which breaks the k == distinct-points case
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _wcss(points, centers, assignment) -> float:
    diff = points - centers[assignment]
    return float(np.sum(diff * diff))


def _kmeanspp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centers = [points[rng.integers(n)]]
    d2 = _sq_dists(points, centers[0][None])[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        # cumulative-sum inversion keeps the draw reproducible across numpy versions
        idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
        idx = min(idx, n - 1)
        while d2[idx] == 0.0:  # float edge at the top of the cumsum
            idx -= 1
        centers.append(points[idx])
        d2 = np.minimum(d2, _sq_dists(points, points[idx][None])[:, 0])
    return np.array(centers, dtype=np.float64)


def kmeans(points, k: int, seed: int = DEFAULT_SEED, *, max_iter: int = MAX_ITER,
           check_descent: bool = False) -> ClusterModel:
    """Lloyd's algorithm from a seeded k-means++ start.

    Stops when the assignment no longer changes or after ``max_iter``
    iterations. Ties go to the lowest center index. A center left empty by an
    update is moved onto the point farthest from its own center.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) == 0:
        raise SegmentationError("points must be a non-empty (n, d) array")
    if k < 1:
        raise SegmentationError("k must be >= 1")
    if k > len(np.unique(points, axis=0)):
        raise SegmentationError("k exceeds distinct points")
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(points, k, rng)
    assignment = None
    prev_obj = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(points, centers)
        new = np.argmin(d2, axis=1)
        obj = float(d2[np.arange(len(points)), new].sum())
        if check_descent and obj > prev_obj * (1 + 1e-12) + 1e-300:
            raise AssertionError(f"k-means objective increased: {prev_obj} -> {obj}")
        prev_obj = obj
        if assignment is not None and np.array_equal(new, assignment):
            break
        assignment = new
        counts = np.bincount(assignment, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, assignment, points)
        for c in range(k):
            if counts[c]:
                centers[c] = sums[c] / counts[c]
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            resid = points - centers[assignment]
            order = np.argsort(-np.einsum("nd,nd->n", resid, resid), kind="stable")
            for c, far in zip(empty, order):
                centers[c] = points[far]
    else:
        assignment = np.argmin(_sq_dists(points, centers), axis=1)
    return ClusterModel(k=k, centers=centers, assignment=assignment,
                        wcss=_wcss(points, centers, assignment), n_iter=it)


def best_kmeans(points, k: int, seed: int = DEFAULT_SEED, restarts: int = ELBOW_RESTARTS) -> ClusterModel:
    """Lowest-wcss model over ``restarts`` consecutive seeds (first wins ties)."""
    best = None
    for r in range(restarts):
        m = kmeans(points, k, seed + r)
        if best is None or m.wcss < best.wcss:
            best = m
    return best


def elbow_curve(points, k_max: int, seed: int = DEFAULT_SEED) -> list[ClusterModel]:
    return [best_kmeans(points, k, seed) for k in range(1, k_max + 1)]


def elbow_index(wcss) -> int:
    """k (1-based) with the largest distance below the chord from k=1 to k=k_max."""
    w = np.asarray(wcss, dtype=np.float64)
    ks = np.arange(1, len(w) + 1, dtype=np.float64)
    x0, y0, x1, y1 = ks[0], w[0], ks[-1], w[-1]
    # perpendicular distance up to the constant chord length
    dist = np.abs((y1 - y0) * ks - (x1 - x0) * w + x1 * y0 - y1 * x0)
    dist[0] = dist[-1] = -np.inf
    return int(np.argmax(dist)) + 1


def elbow_select_k(points, k_max: int = DEFAULT_K_MAX, seed: int = DEFAULT_SEED) -> int:
    points = np.asarray(points, dtype=np.float64)
    if k_max < 2:
        raise SegmentationError("k_max must be >= 2")
    if k_max > len(np.unique(points, axis=0)):
        raise SegmentationError("k exceeds distinct points")
    if k_max == 2:
        return 2
    return elbow_index([m.wcss for m in elbow_curve(points, k_max, seed)])


def select_lesion_cluster(model: ClusterModel, lab: LabImage, override: int | None = None
                          ) -> SegmentationResult:
    """Pick the lesion cluster: the centroid with the largest a* unless overridden."""
    h, w = lab.height, lab.width
    if model.assignment.shape != (h * w,):
        raise SegmentationError("cluster model does not match image size")
    if override is not None:
        if not 0 <= override < model.k:
            raise SegmentationError(f"lesion cluster {override} outside 0..{model.k - 1}")
        chosen = override
    else:
        counts = np.bincount(model.assignment, minlength=model.k)
        a_star = np.where(counts > 0, model.centers[:, 0], -np.inf)
        chosen = int(np.argmax(a_star))
    mask = (model.assignment == chosen).reshape(h, w)
    if not mask.any():
        raise SegmentationError(f"lesion cluster {chosen} is empty")
    return SegmentationResult(model=model, lesion_mask=mask, lesion_cluster=chosen)


def segment(lab: LabImage, k_max: int = DEFAULT_K_MAX, seed: int = DEFAULT_SEED,
            lesion_index: int | None = None, k: int | None = None) -> SegmentationResult:
    """Elbow-selected k-means over (a*, b*), then lesion selection."""
    points = lab.chroma_ab.reshape(-1, 2)
    distinct = len(np.unique(points, axis=0))
    if k is None:
        k_max = min(k_max, distinct)
        if k_max < 2:
            k = 1
        else:
            curve = elbow_curve(points, k_max, seed)
            k = 2 if k_max == 2 else elbow_index([m.wcss for m in curve])
            return select_lesion_cluster(curve[k - 1], lab, lesion_index)
    return select_lesion_cluster(best_kmeans(points, k, seed), lab, lesion_index)
