from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import mlp

ALGORITHMS = ("BR", "LM", "BFGS", "RPROP", "SCG", "CGB", "CGF", "CGP", "OSS", "GDX")

ALGORITHM_NAMES = {
    "BR": "Bayesian Regularization",
    "LM": "Levenberg-Marquardt",
    "BFGS": "BFGS Quasi-Newton",
    "RPROP": "Resilient Backpropagation",
    "SCG": "Scaled Conjugate Gradient",
    "CGB": "Conjugate Gradient with Powell/Beale Restarts",
    "CGF": "Fletcher-Powell Conjugate Gradient",
    "CGP": "Polak-Ribiere Conjugate Gradient",
    "OSS": "One Step Secant",
    "GDX": "Variable Learning Rate Backpropagation",
}

STOP_REASONS = ("goal", "max_epochs", "min_gradient", "mu_overflow", "internal")


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainerConfig:
    algorithm: str = "BR"
    max_epochs: int = 1000
    goal: float = 0.0
    min_gradient: float = 1e-7
    seed: int = 0
    # LM / BR damping
    mu: float = 1e-3
    mu_dec: float = 0.1
    mu_inc: float = 10.0
    mu_max: float = 1e10
    mu_min: float = 1e-13
    # BR evidence hyperparameters
    alpha0: float = 0.0
    beta0: float = 1.0
    br_initial_update: bool = False
    # Rprop
    delta0: float = 0.07
    delt_inc: float = 1.2
    delt_dec: float = 0.5
    deltamax: float = 50.0
    deltamin: float = 1e-9
    # SCG
    scg_sigma: float = 5e-5
    scg_lambda: float = 5e-7
    # Powell/Beale restart threshold
    beale_restart: float = 0.2
    # GDX
    lr: float = 0.01
    lr_inc: float = 1.05
    lr_dec: float = 0.7
    momentum: float = 0.9
    max_perf_inc: float = 1.04
    # shared line search
    ls_c1: float = 1e-4
    ls_c2_cg: float = 0.1
    ls_c2_qn: float = 0.9

    def __post_init__(self):
        self.algorithm = self.algorithm.upper()
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; valid: {', '.join(ALGORITHMS)}")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainerConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown trainer settings: {sorted(unknown)}")
        return cls(**d)


class Objective:
    """Scalar objective over a flat parameter vector.

    Least-squares objectives also provide ``residuals`` and ``jacobian`` and
    satisfy ``loss = r.r / denom``.
    """

    denom: float = 1.0

    def loss_grad(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        raise NotImplementedError

    def loss(self, theta: np.ndarray) -> float:
        return self.loss_grad(theta)[0]

    def residuals(self, theta: np.ndarray) -> np.ndarray:
        raise TypeError(f"{type(self).__name__} is not a least-squares objective")

    def jacobian(self, theta: np.ndarray) -> np.ndarray:
        raise TypeError(f"{type(self).__name__} is not a least-squares objective")


class FunctionObjective(Objective):
    def __init__(self, fun: Callable, grad: Callable):
        self.fun, self.grad = fun, grad

    def loss_grad(self, theta):
        return float(self.fun(theta)), np.asarray(self.grad(theta), dtype=np.float64)


class LeastSquaresObjective(Objective):
    """loss = |r(theta)|^2 / denom."""

    def __init__(self, residual_fn: Callable, jacobian_fn: Callable, denom: float = 1.0):
        self.residual_fn, self.jacobian_fn, self.denom = residual_fn, jacobian_fn, float(denom)

    def residuals(self, theta):
        return np.asarray(self.residual_fn(theta), dtype=np.float64)

    def jacobian(self, theta):
        return np.asarray(self.jacobian_fn(theta), dtype=np.float64)

    def loss(self, theta):
        r = self.residuals(theta)
        return float(r @ r) / self.denom

    def loss_grad(self, theta):
        r = self.residuals(theta)
        return float(r @ r) / self.denom, 2.0 * (self.jacobian(theta).T @ r) / self.denom


class MlpObjective(Objective):
    """MSE of the network over a training set, as a function of flat params."""

    def __init__(self, data: mlp.TrainingSet, shape: tuple[int, int, int]):
        self.data = data
        self.shape = shape
        self.denom = float(data.n * data.n_out)

    def params(self, theta) -> mlp.MlpParams:
        return mlp.MlpParams.unflatten(theta, *self.shape)

    def loss(self, theta):
        return mlp.mse_loss(self.params(theta), self.data)

    def loss_grad(self, theta):
        p = self.params(theta)
        return mlp.mse_loss(p, self.data), mlp.gradient(p, self.data)

    def residuals(self, theta):
        return mlp.residuals(self.params(theta), self.data)

    def jacobian(self, theta):
        return mlp.jacobian(self.params(theta), self.data)


@dataclass
class OptimizeResult:
    theta: np.ndarray
    epochs_run: int
    loss_history: list[float]
    stop_reason: str
    initial_loss: float
    extras: dict = field(default_factory=dict)


class Method:
    """One optimization algorithm; ``step`` performs a single epoch.

    ``f`` is the recorded loss and ``g`` the gradient used for the
    min-gradient stop. ``step`` returns a stop reason when the epoch could not
    be completed, else None.
    """

    def __init__(self, obj: Objective, theta: np.ndarray, cfg: TrainerConfig):
        self.obj, self.cfg = obj, cfg
        self.theta = np.array(theta, dtype=np.float64)
        self.f, self.g = obj.loss_grad(self.theta)

    def step(self) -> str | None:
        raise NotImplementedError

    def extras(self) -> dict:
        return {}
