"""Closed-form geometry on the unit sphere and the short-time kernel.

Everything here is a pure function of its arguments and accepts numpy
arrays wherever a real scalar is documented.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

#: Scalar curvature of the unit sphere.
SCALAR_CURVATURE = 2.0
#: DeWitt phase rate R/12.
DEWITT = SCALAR_CURVATURE / 12.0
#: Distance from the antipode inside which the Van Vleck factor is refused.
POLE_GUARD = 1e-6

_SERIES_CUTOFF = 1e-4
# d^2 - sin^2 d cancels catastrophically; switch to the series much earlier
_BRACKET_CUTOFF = 0.1
_BRACKET_SERIES = (1 / 3, 1 / 15, 2 / 189, 1 / 675, 2 / 10395, 1382 / 58046625)


class AntipodeError(ValueError):
    """Raised when a distance is too close to pi for the kernel to exist."""


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        n2 = self.x**2 + self.y**2 + self.z**2
        if abs(n2 - 1.0) > 1e-12:
            raise ValueError(f"not a unit vector (|p|^2 = {n2!r})")

    @classmethod
    def from_spherical(cls, theta, phi):
        st = np.sin(theta)
        return cls(float(st * np.cos(phi)), float(st * np.sin(phi)), float(np.cos(theta)))

    def as_array(self):
        return np.array([self.x, self.y, self.z])


def _as_xyz(p):
    return p.as_array() if isinstance(p, Point3) else np.asarray(p, dtype=float)


def geodesic_distance(p, q):
    """Great-circle distance ``arccos(p . q)`` with the dot product clamped.

    ``p`` and ``q`` are :class:`Point3` or arrays whose last axis has length 3.
    """
    dot = np.sum(_as_xyz(p) * _as_xyz(q), axis=-1)
    return np.arccos(np.clip(dot, -1.0, 1.0))


def spherical_distance(theta1, phi1, theta2, phi2):
    """Distance between two points given in polar/azimuthal coordinates."""
    c = np.sin(theta1) * np.sin(theta2) * np.cos(phi1 - phi2) + np.cos(theta1) * np.cos(theta2)
    return np.arccos(np.clip(c, -1.0, 1.0))


def _check_t(t):
    if np.any(np.asarray(t) == 0):
        raise ValueError("t must be non-zero")


def _check_pole(d, guard=POLE_GUARD):
    if np.any(np.asarray(d) >= np.pi - guard):
        raise AntipodeError(f"distance within {guard:g} of the antipode")


def action(t, d):
    """Free action along the shortest geodesic, ``d**2 / (2 t)``."""
    _check_t(t)
    return np.asarray(d) ** 2 / (2.0 * np.asarray(t))


def d_over_sin(d):
    """``d / sin d`` with the removable singularity at 0 filled in."""
    d = np.asarray(d, dtype=float)
    small = np.abs(d) < _SERIES_CUTOFF
    safe = np.where(small, 1.0, d)
    d2 = d * d
    return np.where(small, 1.0 + d2 / 6.0 + 7.0 * d2 * d2 / 360.0, safe / np.sin(safe))


def van_vleck(t, d, pole_guard=POLE_GUARD):
    """Van Vleck determinant ``d / (t**2 sin d)`` of the sphere."""
    _check_t(t)
    _check_pole(d, pole_guard)
    return d_over_sin(d) / np.asarray(t, dtype=float) ** 2


def van_vleck_numeric(t, theta1, phi1, theta2, phi2, h=1e-4):
    """Van Vleck determinant from finite differences of the action.

    Builds the 2x2 matrix of mixed partials of S with respect to
    (theta1, phi1) x (theta2, phi2) by central differences, takes its
    determinant and divides by the metric factor sin(theta1) sin(theta2).
    """
    _check_t(t)
    if min(np.sin(theta1), np.sin(theta2)) < 0.1:
        raise ValueError("points too close to a coordinate pole (need sin(theta) >= 0.1)")
    d = spherical_distance(theta1, phi1, theta2, phi2)
    if d < 1e-3 or d > np.pi - 1e-3:
        raise ValueError("coincident or antipodal points are degenerate")

    def s(a1, b1, a2, b2):
        return spherical_distance(a1, b1, a2, b2) ** 2 / (2.0 * t)

    x = np.array([theta1, phi1], dtype=float)
    y = np.array([theta2, phi2], dtype=float)
    hess = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            ei = np.eye(2)[i] * h
            ej = np.eye(2)[j] * h
            hess[i, j] = (
                s(*(x + ei), *(y + ej))
                - s(*(x + ei), *(y - ej))
                - s(*(x - ei), *(y + ej))
                + s(*(x - ei), *(y - ej))
            ) / (4.0 * h * h)
    return np.linalg.det(hess) / (np.sin(theta1) * np.sin(theta2))


@dataclass(frozen=True)
class KernelValue:
    amplitude: np.ndarray | float
    phase: np.ndarray | float

    @property
    def value(self):
        return self.amplitude * np.exp(1j * self.phase)


def kernel(t, d, dewitt=True, pole_guard=POLE_GUARD):
    """Short-time kernel ``(1/t) sqrt(d/sin d) exp(i d^2/2t + i t/6)``.

    The amplitude is kept positive; a negative ``t`` contributes ``pi`` to
    the phase. ``dewitt=False`` drops the curvature phase ``t/6``.
    """
    _check_t(t)
    _check_pole(d, pole_guard)
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    amp = np.sqrt(d_over_sin(d)) / np.abs(t)
    phase = d * d / (2.0 * t) + np.where(t < 0, np.pi, 0.0)
    if dewitt:
        phase = phase + DEWITT * t
    return KernelValue(amp, phase)


def kernel_value(t, d, dewitt=True):
    return kernel(t, d, dewitt=dewitt).value


def curvature_bracket(d):
    """``(d^2 - sin^2 d) / (8 d^2 sin^2 d)``; tends to 1/24 at d = 0."""
    d = np.asarray(d, dtype=float)
    small = np.abs(d) < _BRACKET_CUTOFF
    safe = np.where(small, 1.0, d)
    s2 = np.sin(safe) ** 2
    exact = (safe * safe - s2) / (8.0 * safe * safe * s2)
    series = np.polynomial.polynomial.polyval(d * d, _BRACKET_SERIES)
    return np.where(small, series / 8.0, exact)


def residual_bracket(d):
    """Bracket ``1/8 + (d^2 - sin^2 d)/(8 d^2 sin^2 d)`` of the naive kernel's residual."""
    return 0.125 + curvature_bracket(d)


def pde_residual_analytic(t, d):
    """Closed form of ``(i d/dt + Laplacian/2)`` applied to the kernel without DeWitt phase."""
    _check_t(t)
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    return np.sqrt(d_over_sin(d)) / t * residual_bracket(d) * np.exp(1j * d * d / (2.0 * t))


def corrected_residual_bracket(d):
    """Residual bracket after the DeWitt phase is added; vanishes at d = 0."""
    return curvature_bracket(d) - 1.0 / 24.0


def pde_residual_numeric(t, d, h=1e-4, dewitt=False):
    """Finite-difference ``(i d/dt + Laplacian/2)`` of the kernel at geodesic distance ``d``.

    The kernel is zonal, so the Laplacian reduces to its radial part
    ``f'' + cot(d) f'`` in polar coordinates centred at the source point.
    Central differences of step ``h`` in both ``t`` and ``d``.
    """

    def k(tt, dd):
        return np.sqrt(d_over_sin(dd)) / tt * np.exp(1j * (dd * dd / (2.0 * tt) + (DEWITT * tt if dewitt else 0.0)))

    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    dt = (k(t + h, d) - k(t - h, d)) / (2.0 * h)
    k0 = k(t, d)
    kp = k(t, d + h)
    km = k(t, d - h)
    dd1 = (kp - km) / (2.0 * h)
    dd2 = (kp - 2.0 * k0 + km) / (h * h)
    lap = dd2 + np.cos(d) / np.sin(d) * dd1
    return 1j * dt + 0.5 * lap


@dataclass(frozen=True)
class BumpProfile:
    """Smooth radial cutoff: 1 on ``[0, r_flat]``, 0 on ``[r_cut, inf)``.

    The bridge between is the logistic of ``1/(r_cut - d) - 1/(d - r_flat)``,
    which equals ``phi(r_cut - d) / (phi(r_cut - d) + phi(d - r_flat))`` with
    ``phi(s) = exp(-1/s)``.
    """

    r_flat: float = np.pi / 4
    r_cut: float = 3 * np.pi / 4

    def __post_init__(self):
        if not 0 < self.r_flat < self.r_cut < np.pi:
            raise ValueError("need 0 < r_flat < r_cut < pi")

    def _bridge(self, d):
        d = np.asarray(d, dtype=float)
        inside = (d > self.r_flat) & (d < self.r_cut)
        dd = np.where(inside, d, 0.5 * (self.r_flat + self.r_cut))
        u = dd - self.r_flat
        v = self.r_cut - dd
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            g = 1.0 / v - 1.0 / u
            g1 = 1.0 / (u * u) + 1.0 / (v * v)
            g2 = 2.0 / v**3 - 2.0 / u**3
        return d, inside, g, g1, g2

    def value(self, d):
        d, inside, g, _, _ = self._bridge(d)
        return np.where(d <= self.r_flat, 1.0, np.where(inside, expit(-g), 0.0))

    def deriv(self, d):
        d, inside, g, g1, _ = self._bridge(d)
        s = expit(-g) * expit(g)
        with np.errstate(invalid="ignore", over="ignore"):
            out = np.where(s > 0, -s * g1, 0.0)
        return np.where(inside, out, 0.0)

    def second_deriv(self, d):
        d, inside, g, g1, g2 = self._bridge(d)
        chi = expit(-g)
        s = chi * expit(g)
        with np.errstate(invalid="ignore", over="ignore"):
            out = np.where(s > 0, s * ((1.0 - 2.0 * chi) * g1 * g1 - g2), 0.0)
        return np.where(inside, out, 0.0)

    def laplacian(self, d):
        """Surface Laplacian of ``x -> chi(d(x, y))``: ``chi'' + cot(d) chi'``."""
        d = np.asarray(d, dtype=float)
        safe = np.where((d > 0) & (d < np.pi), d, 1.0)
        return self.second_deriv(d) + self.deriv(d) * np.cos(safe) / np.sin(safe)


def bump(profile, d):
    return profile.value(d)


def bump_deriv(profile, d):
    return profile.deriv(d)
