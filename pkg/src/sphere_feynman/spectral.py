"""Spherical harmonics, grid transforms and diagonal operators on S^2.

Harmonics are orthonormal in L^2(S^2) with the Condon-Shortley phase.
Coefficients are stored flat, ``l`` major and ``m`` running from ``-l`` to
``l``, so ``(l, m)`` lives at index ``l*l + l + m``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class GridTooCoarse(ValueError):
    pass


def lm_index(l, m):
    return l * l + l + m


def degrees(l_max):
    """Degree ``l`` of every flat coefficient slot up to ``l_max``."""
    return np.repeat(np.arange(l_max + 1), 2 * np.arange(l_max + 1) + 1)


def orders(l_max):
    return np.concatenate([np.arange(-l, l + 1) for l in range(l_max + 1)])


def legendre_p(l, x):
    """Legendre polynomial ``P_l(x)`` by the three-term recurrence."""
    if l < 0:
        raise ValueError("l must be >= 0")
    x = np.asarray(x, dtype=float)
    p_prev, p = np.ones_like(x), x.copy()
    if l == 0:
        return p_prev
    for k in range(2, l + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    return p


def legendre_table(l_max, x):
    """All ``P_0 .. P_lmax`` at ``x``; shape ``(l_max + 1,) + x.shape``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((l_max + 1,) + x.shape)
    out[0] = 1.0
    if l_max >= 1:
        out[1] = x
    for k in range(2, l_max + 1):
        out[k] = ((2 * k - 1) * x * out[k - 1] - (k - 1) * out[k - 2]) / k
    return out


def normalized_alf(l_max, theta):
    """Orthonormalised associated Legendre functions for ``m >= 0``.

    Returns ``P[m, l, ...]`` such that ``Y_lm = P[m, l] * exp(i m phi)``.
    Entries with ``l < m`` are zero. Uses the standard sectoral seed and
    the stable two-term upward recurrence in ``l``.
    """
    theta = np.asarray(theta, dtype=float)
    x, s = np.cos(theta), np.sin(theta)
    out = np.zeros((l_max + 1, l_max + 1) + theta.shape)
    pmm = np.full(theta.shape, 1.0 / np.sqrt(4.0 * np.pi))
    for m in range(l_max + 1):
        if m > 0:
            pmm = -np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * pmm
        out[m, m] = pmm
        if m + 1 > l_max:
            break
        out[m, m + 1] = np.sqrt(2.0 * m + 3.0) * x * pmm
        for l in range(m + 2, l_max + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            out[m, l] = a * (x * out[m, l - 1] - b * out[m, l - 2])
    return out


def sph_harm(l, m, theta, phi):
    """Orthonormal ``Y_{l,m}(theta, phi)``; theta is polar, phi azimuthal."""
    if l < 0 or abs(m) > l:
        raise ValueError(f"invalid (l, m) = ({l}, {m})")
    p = normalized_alf(l, theta)[abs(m), l]
    y = p * np.exp(1j * abs(m) * np.asarray(phi, dtype=float))
    if m < 0:
        y = (-1) ** abs(m) * np.conj(y)
    return y


@dataclass(frozen=True)
class SphereGrid:
    """Gauss-Legendre nodes in cos(theta) times uniform nodes in phi."""

    n_theta: int
    n_phi: int

    def __post_init__(self):
        if self.n_theta < 1 or self.n_phi < 1:
            raise ValueError("grid sizes must be positive")

    @classmethod
    def for_band_limit(cls, l_max, oversample=0):
        return cls(l_max + 1 + oversample, 2 * (l_max + oversample) + 2)

    @property
    def band_limit(self):
        """Largest degree transformed exactly on this grid."""
        return min(self.n_theta - 1, (self.n_phi - 1) // 2)

    @cached_property
    def _gauss(self):
        x, w = np.polynomial.legendre.leggauss(self.n_theta)
        # north pole first
        return x[::-1].copy(), w[::-1].copy()

    @property
    def theta(self):
        return np.arccos(self._gauss[0])

    @property
    def phi(self):
        return 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi

    @property
    def theta_weights(self):
        return self._gauss[1]

    @cached_property
    def weights(self):
        """Quadrature weight per node, shape ``(n_theta, n_phi)``; sums to 4 pi."""
        return np.outer(self.theta_weights, np.full(self.n_phi, 2.0 * np.pi / self.n_phi))

    @property
    def shape(self):
        return (self.n_theta, self.n_phi)

    @property
    def size(self):
        return self.n_theta * self.n_phi

    def mesh(self):
        return np.meshgrid(self.theta, self.phi, indexing="ij")

    @cached_property
    def points(self):
        """Cartesian unit vectors of the nodes, shape ``(size, 3)``."""
        th, ph = self.mesh()
        st = np.sin(th)
        return np.stack([st * np.cos(ph), st * np.sin(ph), np.cos(th)], axis=-1).reshape(-1, 3)

    @cached_property
    def alf(self):
        return normalized_alf(self.band_limit, self.theta)

    def sample(self, func):
        """Evaluate ``func(theta, phi)`` on the nodes."""
        th, ph = self.mesh()
        return GridFunction(self, np.asarray(func(th, ph), dtype=complex))


@dataclass(frozen=True)
class GridFunction:
    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {vals.size}")
        object.__setattr__(self, "values", vals.reshape(self.grid.shape))

    def l2_norm(self):
        return float(np.sqrt(np.sum(self.grid.weights * np.abs(self.values) ** 2)))

    def sup_norm(self):
        return float(np.max(np.abs(self.values)))

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - other.values)


@dataclass
class SpectralState:
    """Band-limited function on S^2 held as harmonic coefficients."""

    l_max: int
    coeffs: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.l_max < 0:
            raise ValueError("l_max must be >= 0")
        n = (self.l_max + 1) ** 2
        if self.coeffs is None:
            self.coeffs = np.zeros(n, dtype=complex)
        else:
            self.coeffs = np.asarray(self.coeffs, dtype=complex).ravel()
        if self.coeffs.size != n:
            raise ValueError(f"l_max={self.l_max} needs {n} coefficients, got {self.coeffs.size}")

    @classmethod
    def single(cls, l_max, l, m, value=1.0):
        s = cls(l_max)
        s.coeffs[lm_index(l, m)] = value
        return s

    @classmethod
    def zonal(cls, radial):
        """State with ``a_{l,0} = radial[l]`` and all other orders zero."""
        radial = np.asarray(radial, dtype=complex)
        s = cls(len(radial) - 1)
        s.coeffs[[lm_index(l, 0) for l in range(len(radial))]] = radial
        return s

    @classmethod
    def random(cls, l_max, rng):
        n = (l_max + 1) ** 2
        return cls(l_max, rng.standard_normal(n) + 1j * rng.standard_normal(n))

    def __getitem__(self, lm):
        l, m = lm
        return self.coeffs[lm_index(l, m)]

    def norm(self):
        return float(np.linalg.norm(self.coeffs))

    def copy(self):
        return SpectralState(self.l_max, self.coeffs.copy())

    def scaled(self, c):
        return SpectralState(self.l_max, self.coeffs * c)

    def __add__(self, other):
        _same_band(self, other)
        return SpectralState(self.l_max, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _same_band(self, other)
        return SpectralState(self.l_max, self.coeffs - other.coeffs)

    def apply_degree_multipliers(self, mult):
        """Multiply every ``a_{l,m}`` by ``mult[l]``."""
        mult = np.asarray(mult)
        if mult.shape[0] < self.l_max + 1:
            raise ValueError(f"need multipliers up to l={self.l_max}, got {mult.shape[0] - 1}")
        return SpectralState(self.l_max, self.coeffs * mult[degrees(self.l_max)])

    def to_json(self):
        return json.dumps(
            {"l_max": self.l_max, "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs]}
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text) if isinstance(text, str) else text
        pairs = np.asarray(obj["coeffs"], dtype=float).reshape(-1, 2)
        return cls(int(obj["l_max"]), pairs[:, 0] + 1j * pairs[:, 1])


def _same_band(a, b):
    if a.l_max != b.l_max:
        raise ValueError(f"band limits differ: {a.l_max} vs {b.l_max}")


def analyze(f, l_max=None):
    """Harmonic coefficients of a grid function (exact for band-limited data)."""
    grid = f.grid
    if l_max is None:
        l_max = grid.band_limit
    if l_max > grid.band_limit:
        raise GridTooCoarse(f"grid {grid.shape} resolves l <= {grid.band_limit}, asked for {l_max}")
    # ring Fourier coefficients F_m(theta) = (2 pi / n) sum_j f_j e^{-i m phi_j}
    ring = np.fft.fft(f.values, axis=1) * (2.0 * np.pi / grid.n_phi)
    wp = grid.alf[:, : l_max + 1] * grid.theta_weights  # (m, l, theta)
    out = SpectralState(l_max)
    for m in range(l_max + 1):
        pos = wp[m, m:] @ ring[:, m]
        ls = np.arange(m, l_max + 1)
        out.coeffs[lm_index(ls, m)] = pos
        if m:
            out.coeffs[lm_index(ls, -m)] = (-1) ** m * (wp[m, m:] @ ring[:, -m])
    return out


def synthesize(s, grid):
    """Sample a spectral state on ``grid``."""
    if s.l_max > grid.band_limit:
        raise GridTooCoarse(f"grid {grid.shape} resolves l <= {grid.band_limit}, state has l_max={s.l_max}")
    alf = grid.alf
    spec = np.zeros((grid.n_theta, grid.n_phi), dtype=complex)
    for m in range(s.l_max + 1):
        ls = np.arange(m, s.l_max + 1)
        p = alf[m, m : s.l_max + 1]  # (l, theta)
        spec[:, m] += s.coeffs[lm_index(ls, m)] @ p
        if m:
            spec[:, -m] += (-1) ** m * (s.coeffs[lm_index(ls, -m)] @ p)
    return GridFunction(grid, np.fft.ifft(spec, axis=1) * grid.n_phi)


def laplace_eigenvalues(l_max):
    """Eigenvalues ``l(l+1)`` of minus the Laplacian, one per degree."""
    l = np.arange(l_max + 1, dtype=float)
    return l * (l + 1.0)


def propagator_multipliers(l_max, t):
    """Degree multipliers ``exp(-i t l(l+1)/2)`` of ``exp(i t Laplacian / 2)``."""
    return np.exp(-0.5j * t * laplace_eigenvalues(l_max))


def exact_propagator(s, t):
    return s.apply_degree_multipliers(propagator_multipliers(s.l_max, t))


def projector_multipliers(l_max, energy):
    """Indicator of ``l(l+1) < energy``; ties are excluded."""
    return (laplace_eigenvalues(l_max) < energy).astype(float)


def projector(s, energy):
    if energy < 0:
        raise ValueError("energy must be >= 0")
    return s.apply_degree_multipliers(projector_multipliers(s.l_max, energy))


def sobolev_norm(s, k):
    """``||(-Laplacian + 1)^k f||`` in L^2."""
    if k < 0:
        raise ValueError("k must be >= 0")
    w = (laplace_eigenvalues(s.l_max) + 1.0) ** k
    return float(np.linalg.norm(s.coeffs * w[degrees(s.l_max)]))
