"""The shortest-path slice operator, its diagonal, and time-slicing products.

The slice operator at time step ``t`` has the zonal kernel

    (1 / 2 pi i) chi(d) (1/t) sqrt(d / sin d) exp(i d^2 / 2t + i t / 6),

so it is diagonal on spherical harmonics. Funk-Hecke turns each diagonal
entry into a 1D integral over the geodesic radius:

    alpha_l(t) = (1 / i t) int_0^r_cut chi sqrt(th / sin th) e^{i th^2/2t + i t/6}
                 P_l(cos th) sin th d th.

The direct 2D quadrature in :func:`apply_grid` is kept as an independent
check on that reduction.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import DEWITT, BumpProfile, curvature_bracket, d_over_sin
from .quadrature import OscillatorySpec, QuadratureError, choose_panels, integrate_1d
from .spectral import (
    GridFunction,
    legendre_p,
    projector_multipliers,
    propagator_multipliers,
)

#: Relative self-refinement tolerance every eigenvalue table must meet.
QUAD_TOL = 1e-8


class ResolutionError(ValueError):
    """The sphere grid cannot resolve the kernel phase at this time step."""


def worker_count():
    """Worker cap from ``SPHERE_FEYNMAN_THREADS`` (0 or unset means all CPUs)."""
    n = int(os.environ.get("SPHERE_FEYNMAN_THREADS", "0") or 0)
    return n if n > 0 else (os.cpu_count() or 1)


def _radial_amplitude(theta, bump):
    """``chi(th) sqrt(th / sin th) sin th``: everything but phase and P_l."""
    chi = bump.value(theta)
    return chi * np.sqrt(d_over_sin(theta)) * np.sin(theta)


def eigenvalue(l, t, bump=BumpProfile()):
    """Single diagonal entry ``alpha_l(t)`` by composite Gauss quadrature."""
    if t == 0:
        raise ValueError("t must be non-zero")
    rule = choose_panels(OscillatorySpec(t, bump.r_cut), l)

    def integrand(th):
        return _radial_amplitude(th, bump) * np.exp(0.5j * th * th / t) * legendre_p(l, np.cos(th))

    return np.exp(1j * DEWITT * t) / (1j * t) * integrate_1d(integrand, rule)


def _funk_hecke(radial, t, l_max, rule):
    """``int radial(th) P_l(cos th) dth`` for every ``l <= l_max`` on ``rule``."""
    x, w = rule.nodes_weights()
    base = radial(x)
    bad = ~np.isfinite(base)
    if bad.any():
        raise QuadratureError(f"non-finite integrand at theta = {x[np.argmax(bad)]!r}")
    bw = base * w
    c = np.cos(x)
    out = np.empty(l_max + 1, dtype=complex)
    p_prev, p = np.ones_like(c), c
    out[0] = bw.sum()
    if l_max >= 1:
        out[1] = p @ bw
    for k in range(2, l_max + 1):
        p_prev, p = p, ((2 * k - 1) * c * p - (k - 1) * p_prev) / k
        out[k] = p @ bw
    return out


def zonal_eigenvalues(radial, t, l_max, bump):
    """Diagonal of ``(1/2 pi i) int radial(d) K(t, x, y) f(y) dy`` on harmonics.

    ``radial(d)`` is the real or complex factor multiplying the full kernel
    (``chi`` for the slice operator itself). Returns ``(values, abs_error)``
    with the error from one panel doubling.
    """
    rule = choose_panels(OscillatorySpec(t, bump.r_cut), l_max)
    pref = np.exp(1j * DEWITT * t) / (1j * t)

    def full(th):
        return radial(th) * np.sqrt(d_over_sin(th)) * np.sin(th) * np.exp(0.5j * th * th / t)

    coarse = _funk_hecke(full, t, l_max, rule)
    fine = _funk_hecke(full, t, l_max, rule.refined())
    return pref * fine, np.abs(pref) * np.abs(fine - coarse)


@dataclass
class SliceEigenvalues:
    """Diagonal entries ``alpha_l(t)`` of the slice operator, ``0 <= l <= l_max``."""

    t: float
    l_max: int
    alpha: np.ndarray
    quad_error: np.ndarray

    def __post_init__(self):
        if len(self.alpha) != self.l_max + 1:
            raise ValueError("alpha must have l_max + 1 entries")

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["l", "re_alpha", "im_alpha", "abs_alpha", "quad_error"])
        for l, (a, e) in enumerate(zip(self.alpha, self.quad_error)):
            w.writerow([l, repr(float(a.real)), repr(float(a.imag)), repr(float(abs(a))), repr(float(e))])
        return buf.getvalue()


def slice_eigenvalues(t, l_max, bump=BumpProfile(), check=True):
    """All ``alpha_l(t)`` up to ``l_max`` with a self-refinement error per ``l``.

    ``quad_error`` is the absolute change under panel doubling; since
    ``|alpha_l| <= O(1)`` it is read against unit scale.
    """
    if t == 0:
        raise ValueError("t must be non-zero")
    alpha, err = zonal_eigenvalues(bump.value, t, l_max, bump)
    if check and err.max() > QUAD_TOL:
        l = int(np.argmax(err))
        raise QuadratureError(f"eigenvalue quadrature unresolved at l={l}, t={t}: error {err[l]:.2e}")
    return SliceEigenvalues(float(t), int(l_max), alpha, err)


def apply_spectral(s, ev):
    if s.l_max > ev.l_max:
        raise ValueError(f"state band {s.l_max} exceeds eigenvalue table {ev.l_max}")
    return s.apply_degree_multipliers(ev.alpha)


def min_lmax_for_energy(energy):
    """Smallest ``l`` with ``l(l+1) >= energy``."""
    if energy <= 0:
        return 0
    return max(0, math.ceil((-1.0 + math.sqrt(1.0 + 4.0 * energy)) / 2.0 - 1e-12))


@dataclass(frozen=True)
class SliceConfig:
    """``N``-fold slicing of total time ``t_total``, projected onto ``l(l+1) < E``.

    ``projector_energy = inf`` means no projection; ``l_max`` then sets the
    band on its own.
    """

    t_total: float
    n_slices: int
    projector_energy: float = math.inf
    l_max: int | None = None
    bump: BumpProfile = field(default_factory=BumpProfile)

    def __post_init__(self):
        if self.n_slices < 1:
            raise ValueError("n_slices must be >= 1")
        if self.t_total == 0:
            raise ValueError("t_total must be non-zero")
        if self.l_max is None:
            if math.isinf(self.projector_energy):
                raise ValueError("l_max is required without a finite projector energy")
            object.__setattr__(self, "l_max", min_lmax_for_energy(self.projector_energy))
        if math.isfinite(self.projector_energy) and self.l_max * (self.l_max + 1) < self.projector_energy:
            raise ValueError(
                f"l_max={self.l_max} does not cover projector energy {self.projector_energy}"
            )

    @property
    def dt(self):
        return self.t_total / self.n_slices


def time_slice(cfg, ev=None):
    """Degree multipliers of ``U(t/N)^N rho(E)``.

    ``ev`` may be a precomputed :class:`SliceEigenvalues` at ``t/N``.
    """
    if ev is None:
        ev = slice_eigenvalues(cfg.dt, cfg.l_max, cfg.bump)
    keep = projector_multipliers(cfg.l_max, cfg.projector_energy)
    return np.where(keep > 0, ev.alpha[: cfg.l_max + 1] ** cfg.n_slices, 0.0)


def error_norm(cfg, ev=None):
    """Operator norm of ``[U(t/N)^N - exp(i t Laplacian/2)] rho(E)``.

    Both operators are diagonal in the harmonic basis, so the norm is the
    largest multiplier gap over the retained degrees.
    """
    keep = projector_multipliers(cfg.l_max, cfg.projector_energy) > 0
    if not keep.any():
        return 0.0
    mu = time_slice(cfg, ev)
    exact = propagator_multipliers(cfg.l_max, cfg.t_total)
    return float(np.max(np.abs(mu - exact)[keep]))


# --- direct 2D quadrature -------------------------------------------------


def _check_resolution(grid, t, bump):
    need = bump.r_cut / abs(t)
    if grid.band_limit < need:
        raise ResolutionError(
            f"grid band limit {grid.band_limit} below kernel frequency {need:.1f} at t={t}"
        )


def _zonal_apply(values, grid, out_points, radial, t, bump, chunk=512):
    """``(1/2 pi i) sum_y radial(d) K(t, x, y) f(y) w_y`` for every output ``x``.

    ``values`` has shape ``(grid.size, k)``; returns ``(len(out_points), k)``.
    """
    ypts = grid.points
    wf = values * grid.weights.reshape(-1, 1)
    pref = np.exp(1j * DEWITT * t) / (2j * np.pi * t)
    out = np.empty((len(out_points), values.shape[1]), dtype=complex)

    def block(start):
        xs = out_points[start : start + chunk]
        c = np.clip(xs @ ypts.T, -1.0, 1.0)
        d = np.arccos(c)
        live = d < bump.r_cut
        ds = np.where(live, d, 0.0)
        k = np.where(live, radial(ds) * np.sqrt(d_over_sin(ds)) * np.exp(0.5j * ds * ds / t), 0.0)
        out[start : start + chunk] = pref * (k @ wf)

    with ThreadPoolExecutor(worker_count()) as pool:
        list(pool.map(block, range(0, len(out_points), chunk)))
    return out


def _as_batch(f):
    fs = [f] if isinstance(f, GridFunction) else list(f)
    grid = fs[0].grid
    if any(g.grid != grid for g in fs):
        raise ValueError("all inputs must share one grid")
    return fs, grid, np.stack([g.values.ravel() for g in fs], axis=1)


def _unbatch(f, out, out_grid):
    res = [GridFunction(out_grid, out[:, i]) for i in range(out.shape[1])]
    return res[0] if isinstance(f, GridFunction) else res


def apply_grid(f, t, bump=BumpProfile(), out_grid=None):
    """Apply the slice operator by brute-force quadrature over the sphere grid.

    ``f`` is one :class:`GridFunction` or a list sharing a grid. Output is
    sampled on ``out_grid`` (default: the input grid).
    """
    if t == 0:
        raise ValueError("t must be non-zero")
    fs, grid, vals = _as_batch(f)
    _check_resolution(grid, t, bump)
    out_grid = out_grid or grid
    out = _zonal_apply(vals, grid, out_grid.points, bump.value, t, bump)
    return _unbatch(f, out, out_grid)


def error_multiplier_1(d, bump):
    """Radial factor of the first error operator; vanishes at ``d = 0``."""
    d = np.asarray(d, dtype=float)
    chi_p = bump.deriv(d)
    safe = np.where(d > 1e-8, d, 1.0)
    drift = np.where(chi_p != 0, (np.sin(safe) - safe * np.cos(safe)) / (2.0 * safe * np.sin(safe)), 0.0)
    return bump.value(d) * (curvature_bracket(d) - 1.0 / 24.0) + 0.5 * bump.laplacian(d) + chi_p * drift


def error_multiplier_2(d, t, bump):
    """Radial factor ``i chi'(d) d / t`` of the second error operator."""
    d = np.asarray(d, dtype=float)
    return 1j * bump.deriv(d) * d / t


def error_operators(f, t, bump=BumpProfile(), out_grid=None):
    """Grid quadrature of both error integrals; returns ``(E1 f, E2 f)``."""
    if t == 0:
        raise ValueError("t must be non-zero")
    fs, grid, vals = _as_batch(f)
    _check_resolution(grid, t, bump)
    out_grid = out_grid or grid
    e1 = _zonal_apply(vals, grid, out_grid.points, lambda d: error_multiplier_1(d, bump), t, bump)
    e2 = _zonal_apply(vals, grid, out_grid.points, lambda d: error_multiplier_2(d, t, bump), t, bump)
    return _unbatch(f, e1, out_grid), _unbatch(f, e2, out_grid)


def error_eigenvalues(t, l_max, bump=BumpProfile()):
    """Diagonals of both error operators via the same Funk-Hecke reduction."""
    e1, _ = zonal_eigenvalues(lambda d: error_multiplier_1(d, bump), t, l_max, bump)
    e2, _ = zonal_eigenvalues(lambda d: error_multiplier_2(d, t, bump), t, l_max, bump)
    return e1, e2
