"""Levenberg-Marquardt and Bayesian-regularized Levenberg-Marquardt."""

from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .base import Method


def _damped_solve(A: np.ndarray, rhs: np.ndarray, damping: float) -> np.ndarray | None:
    M = A + damping * np.eye(len(A))
    try:
        return cho_solve(cho_factor(M, check_finite=False), rhs, check_finite=False)
    except (LinAlgError, ValueError):
        return None


class LevenbergMarquardt(Method):
    """Solve (J'J + mu I) delta = -J'r; shrink mu on success, grow on failure."""

    def __init__(self, obj, theta, cfg):
        self.obj, self.cfg = obj, cfg
        self.theta = np.array(theta, dtype=np.float64)
        self.mu = cfg.mu
        self.mu_history = [self.mu]
        self._linearize()
        self.f = float(self.r @ self.r) / obj.denom

    def _linearize(self):
        self.r = self.obj.residuals(self.theta)
        J = self.obj.jacobian(self.theta)
        self.JJ = J.T @ J
        self.Jr = J.T @ self.r
        self.g = 2.0 * self.Jr / self.obj.denom

    def step(self):
        cfg = self.cfg
        while True:
            delta = _damped_solve(self.JJ, -self.Jr, self.mu)
            if delta is not None:
                cand = self.theta + delta
                f_new = self.obj.loss(cand)
                if np.isfinite(f_new) and f_new < self.f:
                    self.theta, self.f = cand, f_new
                    self.mu = max(self.mu * cfg.mu_dec, cfg.mu_min)
                    self.mu_history.append(self.mu)
                    self._linearize()
                    return None
            self.mu *= cfg.mu_inc
            if self.mu > cfg.mu_max:
                return "mu_overflow"
            self.mu_history.append(self.mu)

    def extras(self):
        return {"mu": self.mu, "mu_history": self.mu_history}


def br_hyperparameter_update(JJ: np.ndarray, sse: float, ssw: float, n_residuals: int,
                             alpha: float, beta: float) -> tuple[float, float, float]:
    """Evidence-framework re-estimate of (alpha, beta) and effective parameters.

    ``JJ`` is J'J of the unregularized residuals. Returns (alpha', beta',
    gamma) with gamma = P - 2 alpha tr(H^-1), H = 2 beta J'J + 2 alpha I.
    When gamma >= n_residuals the pair is returned unchanged, so a network
    with more parameters than residuals trains as plain LM.
    """
    if alpha < 0 or beta <= 0:
        raise ValueError("need alpha >= 0 and beta > 0")
    P = len(JJ)
    if alpha == 0.0:
        gamma = float(P)
    else:
        H = 2.0 * beta * JJ + 2.0 * alpha * np.eye(P)
        trace = None
        for jitter in (0.0, 1e-10):
            try:
                c = cho_factor(H + jitter * np.eye(P), check_finite=False)
                trace = float(np.trace(cho_solve(c, np.eye(P), check_finite=False)))
                break
            except (LinAlgError, ValueError):
                continue
        if trace is None:
            # 2 alpha I lost to rounding against a huge beta: use the spectrum
            lam = np.clip(np.linalg.eigvalsh(JJ), 0.0, None)
            trace = float(np.sum(1.0 / (2.0 * beta * lam + 2.0 * alpha)))
        gamma = P - 2.0 * alpha * trace
    gamma = min(max(gamma, 0.0), float(P))
    if n_residuals - gamma <= 0:
        # more effective parameters than residuals: the evidence estimates
        # are undefined, so keep (alpha, beta) until the data can fix them
        return alpha, beta, gamma
    new_alpha = gamma / (2.0 * ssw) if ssw > 0 else alpha
    new_beta = (n_residuals - gamma) / (2.0 * sse) if sse > 0 else beta
    return new_alpha, new_beta, gamma


class BayesianRegularization(LevenbergMarquardt):
    """LM on beta*SSE + alpha*SSW with evidence re-estimation after each step.

    ``f`` stays the plain MSE so histories are comparable with the other
    trainers; the regularized objective is tracked in ``objective_history``.
    """

    def __init__(self, obj, theta, cfg):
        self.alpha, self.beta = cfg.alpha0, cfg.beta0
        self.gamma = float(len(theta))
        super().__init__(obj, theta, cfg)
        # seed the hyperparameters from (alpha0, beta0) at the starting point
        # so the first step is already regularized
        if cfg.br_initial_update:
            self.alpha, self.beta, self.gamma = br_hyperparameter_update(
                self.JJ, float(self.r @ self.r), float(self.theta @ self.theta), len(self.r),
                self.alpha, self.beta)
        self._linearize()
        self.F = self._objective(self.r, self.theta)
        self.objective_history = []
        self.gamma_history = []

    def _objective(self, r, theta):
        return self.beta * float(r @ r) + self.alpha * float(theta @ theta)

    def _linearize(self):
        super()._linearize()
        # stop gradient: d/dtheta of (SSE + (alpha/beta) SSW) / denom
        self.g = 2.0 * (self.Jr + (self.alpha / self.beta) * self.theta) / self.obj.denom

    def step(self):
        cfg = self.cfg
        rhs = -(self.beta * self.Jr + self.alpha * self.theta)
        A = self.beta * self.JJ
        JJ_old = self.JJ
        while True:
            delta = _damped_solve(A, rhs, self.alpha + self.mu)
            if delta is not None:
                cand = self.theta + delta
                r = self.obj.residuals(cand)
                F_new = self._objective(r, cand)
                if np.isfinite(F_new) and F_new < self.F:
                    break
            self.mu *= cfg.mu_inc
            if self.mu > cfg.mu_max:
                return "mu_overflow"
            self.mu_history.append(self.mu)
        self.theta = cand
        self.mu = max(self.mu * cfg.mu_dec, cfg.mu_min)
        self.mu_history.append(self.mu)
        self.objective_history.append(F_new)
        sse = float(r @ r)
        self.alpha, self.beta, self.gamma = br_hyperparameter_update(
            JJ_old, sse, float(cand @ cand), len(r), self.alpha, self.beta)
        self.gamma_history.append(self.gamma)
        self._linearize()
        self.f = sse / self.obj.denom
        self.F = self._objective(self.r, self.theta)
        return None

    def extras(self):
        out = super().extras()
        out.update(gamma=self.gamma, alpha=self.alpha, beta=self.beta,
                   gamma_history=self.gamma_history,
                   objective_history=self.objective_history)
        return out
