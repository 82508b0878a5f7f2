"""Composite Gauss-Legendre quadrature with oscillation-based panel counts."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

#: Panels per oscillation of the integrand.
KAPPA = 8
PANEL_ORDER = 10
MIN_PANELS = 8


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class PanelRule:
    order: int
    panels: int
    a: float
    b: float

    def __post_init__(self):
        if self.order < 2 or self.panels < 1 or not self.a < self.b:
            raise ValueError(f"invalid panel rule {self}")

    def refined(self, factor=2):
        return replace(self, panels=self.panels * factor)

    def nodes_weights(self):
        x, w = _gauss(self.order)
        edges = np.linspace(self.a, self.b, self.panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        nodes = (mid[:, None] + half[:, None] * x).ravel()
        weights = (half[:, None] * w).ravel()
        return nodes, weights


@lru_cache(maxsize=None)
def _gauss(order):
    return np.polynomial.legendre.leggauss(order)


def integrate_1d(f, rule):
    """Composite Gauss-Legendre integral of ``f`` over ``[rule.a, rule.b]``.

    ``f`` is called once with the array of all nodes. It may return extra
    leading axes (for instance one row per Legendre degree); the integral is
    taken over the last axis.
    """
    x, w = rule.nodes_weights()
    y = np.asarray(f(x))
    bad = ~np.isfinite(y)
    if bad.any():
        where = np.unravel_index(np.argmax(bad), y.shape)
        raise QuadratureError(f"non-finite integrand at x = {x[where[-1]]!r}")
    return y @ w


def integrate_with_error(f, rule):
    """Integral on the doubled rule plus ``|coarse - fine|`` as error estimate."""
    coarse = integrate_1d(f, rule)
    fine = integrate_1d(f, rule.refined())
    return fine, np.abs(fine - coarse)


@dataclass(frozen=True)
class OscillatorySpec:
    """Quadratic phase ``theta**2 / (2 t_phase)`` on ``[0, domain_cut]``."""

    t_phase: float
    domain_cut: float

    def __post_init__(self):
        if self.t_phase == 0:
            raise ValueError("t_phase must be non-zero")

    @property
    def phase_sweep(self):
        return self.domain_cut**2 / (2.0 * abs(self.t_phase))


def choose_panels(spec, l):
    """Panel rule resolving the quadratic phase plus ``P_l`` oscillations."""
    n = math.ceil(KAPPA * (spec.phase_sweep / (2.0 * math.pi) + l))
    return PanelRule(PANEL_ORDER, max(MIN_PANELS, n), 0.0, spec.domain_cut)
