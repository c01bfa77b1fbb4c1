"""Ten interchangeable full-batch trainers over a flat parameter vector.

``minimize`` runs any algorithm on an arbitrary :class:`Objective`; ``train``
wraps it for the MLP. Every run is deterministic for fixed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import mlp
from .base import (ALGORITHM_NAMES, ALGORITHMS, STOP_REASONS, FunctionObjective,
                   LeastSquaresObjective, Method, MlpObjective, Objective,
                   OptimizeResult, TrainerConfig, TrainingError)
from .conjugate import FletcherReeves, PolakRibiere, PowellBeale, ScaledConjugateGradient
from .first_order import Gdx, Rprop
from .levenberg import BayesianRegularization, LevenbergMarquardt, br_hyperparameter_update
from .linesearch import wolfe_search
from .quasi_newton import BFGS, OneStepSecant

METHODS: dict[str, type[Method]] = {
    "BR": BayesianRegularization,
    "LM": LevenbergMarquardt,
    "BFGS": BFGS,
    "RPROP": Rprop,
    "SCG": ScaledConjugateGradient,
    "CGB": PowellBeale,
    "CGF": FletcherReeves,
    "CGP": PolakRibiere,
    "OSS": OneStepSecant,
    "GDX": Gdx,
}


def minimize(obj: Objective, theta0, cfg: TrainerConfig) -> OptimizeResult:
    """Run ``cfg.algorithm`` from ``theta0`` until a stop condition.

    Stops, checked before every epoch: loss <= goal, gradient norm below
    ``min_gradient``, ``max_epochs`` reached; methods may also stop with
    ``mu_overflow`` or ``internal``.
    """
    theta0 = np.asarray(theta0, dtype=np.float64)
    if not np.all(np.isfinite(theta0)):
        raise TrainingError("initial parameters are not finite")
    method = METHODS[cfg.algorithm](obj, theta0, cfg)
    if not (np.isfinite(method.f) and np.all(np.isfinite(method.g))):
        raise TrainingError("loss or gradient is not finite at the initial parameters")
    initial = method.f
    history: list[float] = []
    while True:
        if method.f <= cfg.goal:
            reason = "goal"
        elif float(np.linalg.norm(method.g)) < cfg.min_gradient:
            reason = "min_gradient"
        elif len(history) >= cfg.max_epochs:
            reason = "max_epochs"
        else:
            reason = method.step()
            if reason is None:
                history.append(float(method.f))
                continue
        break
    return OptimizeResult(theta=method.theta, epochs_run=len(history), loss_history=history,
                          stop_reason=reason, initial_loss=float(initial), extras=method.extras())


@dataclass
class TrainReport:
    final_params: mlp.MlpParams
    epochs_run: int
    loss_history: list[float]
    stop_reason: str
    algorithm: str
    initial_loss: float
    gamma: float | None = None
    alpha: float | None = None
    beta: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "algorithm": self.algorithm,
            "epochs_run": self.epochs_run,
            "stop_reason": self.stop_reason,
            "initial_loss": self.initial_loss,
            "final_loss": self.loss_history[-1] if self.loss_history else self.initial_loss,
            "loss_history": self.loss_history,
        }
        if self.algorithm == "BR":
            out.update(effective_parameters=self.gamma, alpha=self.alpha, beta=self.beta)
        return out


def train(p0: mlp.MlpParams, data: mlp.TrainingSet, cfg: TrainerConfig) -> TrainReport:
    obj = MlpObjective(data, p0.shape)
    res = minimize(obj, p0.flatten(), cfg)
    ex = dict(res.extras)
    return TrainReport(
        final_params=mlp.MlpParams.unflatten(res.theta, *p0.shape),
        epochs_run=res.epochs_run,
        loss_history=res.loss_history,
        stop_reason=res.stop_reason,
        algorithm=cfg.algorithm,
        initial_loss=res.initial_loss,
        gamma=ex.pop("gamma", None),
        alpha=ex.pop("alpha", None),
        beta=ex.pop("beta", None),
        diagnostics=ex,
    )


__all__ = [
    "ALGORITHMS", "ALGORITHM_NAMES", "STOP_REASONS", "METHODS", "TrainerConfig",
    "TrainReport", "TrainingError", "Objective", "FunctionObjective",
    "LeastSquaresObjective", "MlpObjective", "OptimizeResult", "minimize", "train",
    "br_hyperparameter_update", "wolfe_search",
]
