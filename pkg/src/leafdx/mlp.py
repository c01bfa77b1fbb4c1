"""One-hidden-layer perceptron: sigmoid hidden units, linear outputs, MSE loss.

Flat parameter layout (used by every trainer)::

    [W1 (N x n_in, row-major), b1 (N), W2 (C x N, row-major), b2 (C)]
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

N_FEATURES = 13


@dataclass
class MlpParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @property
    def n_in(self) -> int:
        return self.W1.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.W1.shape[0]

    @property
    def n_out(self) -> int:
        return self.W2.shape[0]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.n_in, self.n_hidden, self.n_out

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.W2.ravel(), self.b2])

    @classmethod
    def unflatten(cls, theta: np.ndarray, n_in: int, n_hidden: int, n_out: int) -> "MlpParams":
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (n_params(n_in, n_hidden, n_out),):
            raise ValueError(f"flat vector has shape {theta.shape}, expected "
                             f"({n_params(n_in, n_hidden, n_out)},)")
        i = 0

        def take(size, shape):
            nonlocal i
            out = theta[i:i + size].reshape(shape).copy()
            i += size
            return out

        W1 = take(n_hidden * n_in, (n_hidden, n_in))
        b1 = take(n_hidden, (n_hidden,))
        W2 = take(n_out * n_hidden, (n_out, n_hidden))
        b2 = take(n_out, (n_out,))
        return cls(W1, b1, W2, b2)


def n_params(n_in: int, n_hidden: int, n_out: int) -> int:
    return n_hidden * n_in + n_hidden + n_out * n_hidden + n_out


def init_params(n_in: int, n_hidden: int, n_out: int, seed: int) -> MlpParams:
    """Uniform in [-0.5, 0.5] scaled by 1/sqrt(fan-in), biases included."""
    rng = np.random.default_rng(seed)
    s1, s2 = 1.0 / np.sqrt(n_in), 1.0 / np.sqrt(n_hidden)
    return MlpParams(
        W1=rng.uniform(-0.5, 0.5, (n_hidden, n_in)) * s1,
        b1=rng.uniform(-0.5, 0.5, n_hidden) * s1,
        W2=rng.uniform(-0.5, 0.5, (n_out, n_hidden)) * s2,
        b2=rng.uniform(-0.5, 0.5, n_out) * s2,
    )


@dataclass
class TrainingSet:
    inputs: np.ndarray   # (n, n_in), already standardized
    targets: np.ndarray  # (n, C) one-hot

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        self.targets = np.atleast_2d(np.asarray(self.targets, dtype=np.float64))
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets differ in length")
        if len(self.inputs) == 0:
            raise ValueError("empty training set")

    @property
    def n(self) -> int:
        return len(self.inputs)

    @property
    def n_out(self) -> int:
        return self.targets.shape[1]


def one_hot(labels: Sequence[int], n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    t = np.zeros((len(labels), n_classes))
    t[np.arange(len(labels)), labels] = 1.0
    return t


def sigmoid(z):
    # split form avoids overflow in exp for large |z|
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def hidden(p: MlpParams, X: np.ndarray) -> np.ndarray:
    return sigmoid(X @ p.W1.T + p.b1)


def forward(p: MlpParams, x: np.ndarray) -> np.ndarray:
    """Network output for one input vector or a batch of row vectors."""
    x = np.asarray(x, dtype=np.float64)
    return hidden(p, x) @ p.W2.T + p.b2


def predict(p: MlpParams, X: np.ndarray) -> np.ndarray:
    """Class index per row; argmax picks the lowest index on ties."""
    return np.argmax(forward(p, np.atleast_2d(X)), axis=1)


def residuals(p: MlpParams, data: TrainingSet) -> np.ndarray:
    """Flattened y - t, ordered sample-major: row i*C + c."""
    return (forward(p, data.inputs) - data.targets).ravel()


def mse_loss(p: MlpParams, data: TrainingSet) -> float:
    r = residuals(p, data)
    return float(r @ r) / r.size


def gradient(p: MlpParams, data: TrainingSet) -> np.ndarray:
    """d mse / d theta by backpropagation, in flat layout."""
    X = data.inputs
    H = hidden(p, X)
    E = H @ p.W2.T + p.b2 - data.targets
    scale = 2.0 / E.size
    dY = scale * E                      # (n, C)
    gW2 = dY.T @ H
    gb2 = dY.sum(axis=0)
    dZ = (dY @ p.W2) * H * (1.0 - H)    # (n, N)
    gW1 = dZ.T @ X
    gb1 = dZ.sum(axis=0)
    return np.concatenate([gW1.ravel(), gb1, gW2.ravel(), gb2])


def jacobian(p: MlpParams, data: TrainingSet) -> np.ndarray:
    """(n*C, P) matrix of d r_ic / d theta with r = y - t unscaled."""
    X = data.inputs
    n, n_in = X.shape
    N, C = p.n_hidden, p.n_out
    H = hidden(p, X)
    D = H * (1.0 - H)                                   # (n, N)
    J = np.zeros((n, C, n_params(n_in, N, C)))
    o = 0
    # dy_c / dz_j = W2[c, j] * h_j (1 - h_j)
    dz = p.W2[None, :, :] * D[:, None, :]               # (n, C, N)
    J[:, :, o:o + N * n_in] = (dz[:, :, :, None] * X[:, None, None, :]).reshape(n, C, N * n_in)
    o += N * n_in
    J[:, :, o:o + N] = dz
    o += N
    idx = np.arange(C)
    block = np.zeros((n, C, C, N))
    block[:, idx, idx, :] = H[:, None, :]
    J[:, :, o:o + C * N] = block.reshape(n, C, C * N)
    o += C * N
    J[:, idx, o + idx] = 1.0
    return J.reshape(n * C, -1)


@dataclass
class Standardizer:
    """Per-column z-score fitted on training features only."""

    means: np.ndarray
    sigmas: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "Standardizer":
        F = np.asarray(features, dtype=np.float64)
        if F.ndim != 2 or len(F) < 2:
            raise ValueError("standardize needs at least 2 rows")
        means = F.mean(axis=0)
        sig = F.std(axis=0)
        return cls(means=means, sigmas=np.where(sig > 0, sig, 1.0))

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=np.float64) - self.means) / self.sigmas


def standardize(features: np.ndarray) -> tuple[np.ndarray, Standardizer]:
    st = Standardizer.fit(features)
    return st.transform(features), st


@dataclass
class Model:
    """Trained network plus what inference needs to reproduce preprocessing."""

    params: MlpParams
    standardizer: Standardizer
    class_names: list[str] = field(default_factory=list)

    def predict(self, features: np.ndarray) -> np.ndarray:
        return predict(self.params, self.standardizer.transform(np.atleast_2d(features)))

    def to_dict(self) -> dict:
        p = self.params
        return {
            "n_in": p.n_in, "n_hidden": p.n_hidden, "n_out": p.n_out,
            "W1": p.W1.tolist(), "b1": p.b1.tolist(),
            "W2": p.W2.tolist(), "b2": p.b2.tolist(),
            "feature_means": self.standardizer.means.tolist(),
            "feature_sigmas": self.standardizer.sigmas.tolist(),
            "class_names": list(self.class_names),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Model":
        p = MlpParams(np.array(d["W1"], dtype=np.float64).reshape(d["n_hidden"], d["n_in"]),
                      np.array(d["b1"], dtype=np.float64),
                      np.array(d["W2"], dtype=np.float64).reshape(d["n_out"], d["n_hidden"]),
                      np.array(d["b2"], dtype=np.float64))
        st = Standardizer(np.array(d["feature_means"], dtype=np.float64),
                          np.array(d["feature_sigmas"], dtype=np.float64))
        return cls(p, st, list(d.get("class_names", [])))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Model":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
