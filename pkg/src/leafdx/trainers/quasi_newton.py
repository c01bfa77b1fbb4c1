"""BFGS and one-step-secant, both on the shared Wolfe line search."""

from __future__ import annotations

import numpy as np

from .base import Method
from .linesearch import wolfe_search

CURVATURE_EPS = 1e-12


class BFGS(Method):
    def __init__(self, obj, theta, cfg):
        super().__init__(obj, theta, cfg)
        self.H = np.eye(len(self.theta))
        self.fresh = True

    def step(self):
        d = -self.H @ self.g
        if not self.g @ d < 0:
            self.H = np.eye(len(self.theta))
            self.fresh = True
            d = -self.g
        ls = wolfe_search(self.obj, self.theta, d, self.f, self.g, 1.0,
                          self.cfg.ls_c1, self.cfg.ls_c2_qn)
        if ls is None:
            if self.fresh:
                return "internal"
            self.H = np.eye(len(self.theta))
            self.fresh = True
            return self.step()
        s = ls.alpha * d
        y = ls.g - self.g
        sy = float(s @ y)
        if sy > CURVATURE_EPS:
            if self.fresh:
                self.H = (sy / float(y @ y)) * np.eye(len(s))
            rho = 1.0 / sy
            Hy = self.H @ y
            self.H += (rho * rho * float(y @ Hy) + rho) * np.outer(s, s) \
                - rho * (np.outer(Hy, s) + np.outer(s, Hy))
            self.fresh = False
        self.theta = self.theta + s
        self.f, self.g = ls.f, ls.g
        return None


class OneStepSecant(Method):
    """Memoryless BFGS: the direction uses only the last step and gradient change."""

    def __init__(self, obj, theta, cfg):
        super().__init__(obj, theta, cfg)
        self.s = self.y = None

    def _direction(self):
        g = self.g
        if self.s is None:
            return -g
        sy = float(self.s @ self.y)
        if sy <= CURVATURE_EPS:
            return -g
        sg, yg = float(self.s @ g), float(self.y @ g)
        A = -(1.0 + float(self.y @ self.y) / sy) * (sg / sy) + yg / sy
        B = sg / sy
        return -g + A * self.s + B * self.y

    def step(self):
        d = self._direction()
        restarted = self.s is None
        if not self.g @ d < 0:
            d, restarted = -self.g, True
        ls = wolfe_search(self.obj, self.theta, d, self.f, self.g, 1.0,
                          self.cfg.ls_c1, self.cfg.ls_c2_qn)
        if ls is None and not restarted:
            d = -self.g
            ls = wolfe_search(self.obj, self.theta, d, self.f, self.g, 1.0,
                              self.cfg.ls_c1, self.cfg.ls_c2_qn)
        if ls is None:
            return "internal"
        self.s = ls.alpha * d
        self.y = ls.g - self.g
        self.theta = self.theta + self.s
        self.f, self.g = ls.f, ls.g
        return None
