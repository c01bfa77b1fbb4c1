"""Conjugate gradient trainers.

CGF (Fletcher-Reeves), CGP (Polak-Ribiere, clipped at zero) and CGB (Beale's
three-term recurrence with Powell's restart test) share the Wolfe line
search. SCG is Moller's scaled conjugate gradient, which replaces the line
search by a Levenberg-style scaled quadratic model.
"""

from __future__ import annotations

import numpy as np

from .base import Method
from .linesearch import wolfe_search


class _LineSearchCG(Method):
    def __init__(self, obj, theta, cfg):
        super().__init__(obj, theta, cfg)
        self.d = -self.g
        self.prev_alpha = None
        self.prev_gd = None
        self.since_restart = 0

    def _restart(self):
        self.d = -self.g
        self.since_restart = 0

    def _next_direction(self, g_old: np.ndarray) -> None:
        raise NotImplementedError

    def _initial_alpha(self, gd):
        if self.prev_alpha is None:
            return 1.0 / max(1.0, float(np.linalg.norm(self.g)))
        return min(1.0, 1.01 * 2 * self.prev_alpha * self.prev_gd / gd) \
            if self.prev_gd and gd else 1.0

    def step(self):
        gd = float(self.g @ self.d)
        if not gd < 0:
            self._restart()
            gd = float(self.g @ self.d)
        ls = wolfe_search(self.obj, self.theta, self.d, self.f, self.g,
                          max(self._initial_alpha(gd), 1e-12),
                          self.cfg.ls_c1, self.cfg.ls_c2_cg)
        if ls is None and self.since_restart > 0:
            self._restart()
            gd = float(self.g @ self.d)
            ls = wolfe_search(self.obj, self.theta, self.d, self.f, self.g,
                              1.0 / max(1.0, float(np.linalg.norm(self.g))),
                              self.cfg.ls_c1, self.cfg.ls_c2_cg)
        if ls is None:
            return "internal"
        self.prev_alpha, self.prev_gd = ls.alpha, gd
        self.step_vec = ls.alpha * self.d
        self.theta = self.theta + self.step_vec
        g_old = self.g
        self.f, self.g = ls.f, ls.g
        self.since_restart += 1
        if self.since_restart >= len(self.theta):
            self._restart()
        else:
            self._next_direction(g_old)
        return None


class FletcherReeves(_LineSearchCG):
    def _next_direction(self, g_old):
        beta = float(self.g @ self.g) / float(g_old @ g_old)
        self.d = -self.g + beta * self.d


class PolakRibiere(_LineSearchCG):
    def _next_direction(self, g_old):
        beta = float(self.g @ (self.g - g_old)) / float(g_old @ g_old)
        self.d = -self.g + max(beta, 0.0) * self.d


class PowellBeale(_LineSearchCG):
    """Beale three-term CG; restarts when successive gradients lose orthogonality.

    Restart test: |g_{k-1}' g_k| >= 0.2 |g_k|^2 (threshold ``beale_restart``).
    """

    def __init__(self, obj, theta, cfg):
        super().__init__(obj, theta, cfg)
        self.d_t = self.y_t = None

    def _restart(self):
        super()._restart()
        self.d_t = self.y_t = None

    def _next_direction(self, g_old):
        g = self.g
        if abs(float(g_old @ g)) >= self.cfg.beale_restart * float(g @ g):
            self._restart()
            return
        y = g - g_old
        dy = float(self.d @ y)
        if dy == 0.0:
            self._restart()
            return
        beta = float(g @ y) / dy
        if self.d_t is None:
            # first step after a restart defines the restart pair
            self.d_t, self.y_t = self.d.copy(), y
            self.d = -g + beta * self.d
            return
        gamma = float(g @ self.y_t) / float(self.d_t @ self.y_t)
        new = -g + beta * self.d + gamma * self.d_t
        gg = float(g @ g)
        # Powell's sufficient-descent window for the three-term direction
        if not -1.2 * gg <= float(g @ new) <= -0.8 * gg:
            self._restart()
            return
        self.d = new


class ScaledConjugateGradient(Method):
    """Moller (1993) scaled conjugate gradient."""

    def __init__(self, obj, theta, cfg):
        super().__init__(obj, theta, cfg)
        self.p = -self.g
        self.r = -self.g
        self.lam = cfg.scg_lambda
        self.lam_bar = 0.0
        self.success = True
        self.k = 0
        self.delta = 0.0

    def step(self):
        cfg = self.cfg
        P = len(self.theta)
        p, r = self.p, self.r
        p2 = float(p @ p)
        if p2 == 0.0:
            return "internal"
        if self.success:
            sigma_k = cfg.scg_sigma / np.sqrt(p2)
            _, g_sig = self.obj.loss_grad(self.theta + sigma_k * p)
            s = (g_sig - self.g) / sigma_k
            self.delta = float(p @ s)
        delta = self.delta + (self.lam - self.lam_bar) * p2
        if delta <= 0:
            self.lam_bar = 2.0 * (self.lam - delta / p2)
            delta = -delta + self.lam * p2
            self.lam = self.lam_bar
        mu = float(p @ r)
        if mu <= 0:
            self.p = self.r.copy()
            self.success = True
            self.lam_bar = 0.0
            return None
        alpha = mu / delta
        cand = self.theta + alpha * p
        f_new, g_new = self.obj.loss_grad(cand)
        Delta = 2.0 * delta * (self.f - f_new) / (mu * mu) if np.isfinite(f_new) else -np.inf
        self.k += 1
        if Delta >= 0:
            self.theta, self.f, self.g = cand, f_new, g_new
            r_new = -g_new
            self.lam_bar = 0.0
            self.success = True
            if self.k % P == 0:
                self.p = r_new
            else:
                beta = (float(r_new @ r_new) - float(r_new @ r)) / mu
                self.p = r_new + beta * p
            self.r = r_new
            if Delta >= 0.75:
                self.lam = self.lam / 4.0
        else:
            # keep the scaled curvature; the next epoch adds only the lambda increment
            self.lam_bar = self.lam
            self.delta = delta
            self.success = False
        if Delta < 0.25:
            if np.isfinite(Delta):
                self.lam = self.lam + delta * (1.0 - Delta) / p2
            else:
                self.lam = 4.0 * self.lam + 1e-12
        if not np.isfinite(self.lam) or self.lam > 1e100:
            return "internal"
        return None
