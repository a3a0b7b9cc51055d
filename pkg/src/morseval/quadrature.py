"""Gauss-Legendre helpers."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(order):
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1) / 2, w / 2


class CumulativeIntegral:
    """F(t) = integral of ``func`` from ``a`` to ``t`` for t in [a, b].

    Knot values come from composite Gauss-Legendre on equal panels; a point
    evaluation adds one Gauss-Legendre rule over the partial panel.  ``func``
    must be vectorized.
    """

    def __init__(self, func, a, b, panels=256, order=16):
        self.func = func
        self.a, self.b = float(a), float(b)
        self.panels = int(panels)
        self.order = int(order)
        self.h = (self.b - self.a) / self.panels
        self.knots = self.a + self.h * np.arange(self.panels + 1)
        x, w = gauss_legendre(self.order)
        nodes = self.knots[:-1, None] + self.h * x[None, :]
        per_panel = (func(nodes.ravel()).reshape(nodes.shape) * w).sum(axis=1) * self.h
        self.values = np.concatenate([[0.0], np.cumsum(per_panel)])

    @property
    def total(self):
        return self.values[-1]

    def __call__(self, t):
        t = np.clip(np.asarray(t, dtype=float), self.a, self.b)
        flat = t.ravel()
        j = np.clip(((flat - self.a) / self.h).astype(int), 0, self.panels - 1)
        left = self.knots[j]
        span = flat - left
        x, w = gauss_legendre(self.order)
        nodes = left[:, None] + span[:, None] * x[None, :]
        part = (self.func(nodes.ravel()).reshape(nodes.shape) * w).sum(axis=1) * span
        return (self.values[j] + part).reshape(t.shape)
