"""Resilient backpropagation and adaptive-rate gradient descent with momentum."""

from __future__ import annotations

import numpy as np

from .base import Method


class Rprop(Method):
    """Sign-based steps with per-parameter step sizes.

    A component whose gradient flips sign has its step shrunk and its
    gradient zeroed for that epoch. An epoch that would raise the loss is
    rejected: weights stay put, every step size shrinks and the sign memory
    is cleared.
    """

    def __init__(self, obj, theta, cfg):
        super().__init__(obj, theta, cfg)
        self.delta = np.full(len(self.theta), cfg.delta0)
        self.g_prev = np.zeros(len(self.theta))
        self.rejected = 0

    def step(self):
        cfg = self.cfg
        g = self.g.copy()
        prod = g * self.g_prev
        delta = np.where(prod > 0, np.minimum(self.delta * cfg.delt_inc, cfg.deltamax), self.delta)
        delta = np.where(prod < 0, np.maximum(delta * cfg.delt_dec, cfg.deltamin), delta)
        g[prod < 0] = 0.0
        cand = self.theta - np.sign(g) * delta
        f_new, g_new = self.obj.loss_grad(cand)
        if np.isfinite(f_new) and f_new <= self.f:
            self.theta, self.f, self.g = cand, f_new, g_new
            self.delta = delta
            self.g_prev = g
        else:
            self.rejected += 1
            self.delta = np.maximum(delta * cfg.delt_dec, cfg.deltamin)
            self.g_prev = np.zeros_like(g)
        return None

    def extras(self):
        return {"rejected_epochs": self.rejected}


class Gdx(Method):
    """Gradient descent with momentum and an adaptive learning rate.

    The rate grows by ``lr_inc`` after an improving epoch. A step raising the
    loss by more than ``max_perf_inc`` is discarded, the rate cut by
    ``lr_dec`` and the momentum cleared.
    """

    def __init__(self, obj, theta, cfg):
        super().__init__(obj, theta, cfg)
        self.lr = cfg.lr
        self.dX = np.zeros(len(self.theta))
        self.accepted = []

    def step(self):
        cfg = self.cfg
        dX = cfg.momentum * self.dX - (1.0 - cfg.momentum) * self.lr * self.g
        cand = self.theta + dX
        f_new, g_new = self.obj.loss_grad(cand)
        if not np.isfinite(f_new) or f_new > cfg.max_perf_inc * self.f:
            self.lr *= cfg.lr_dec
            self.dX = np.zeros_like(dX)
            self.accepted.append(False)
            return None
        if f_new < self.f:
            self.lr *= cfg.lr_inc
        self.theta, self.f, self.g, self.dX = cand, f_new, g_new, dX
        self.accepted.append(True)
        return None

    def extras(self):
        return {"lr": self.lr, "accepted": self.accepted}
