"""Desk-scale convergence experiments and closed-form verification runs.

Every ``run_*`` function takes an :class:`ExperimentConfig` and returns a
:class:`ResultTable`. Runs are deterministic given the config.
"""

from __future__ import annotations

import csv
import io
import json
import math
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import (
    BumpProfile,
    corrected_residual_bracket,
    kernel_value,
    pde_residual_analytic,
    pde_residual_numeric,
    spherical_distance,
    van_vleck,
    van_vleck_numeric,
)
from .propagator import (
    SliceConfig,
    apply_spectral,
    error_norm,
    min_lmax_for_energy,
    slice_eigenvalues,
    worker_count,
)
from .spectral import (
    SphereGrid,
    SpectralState,
    exact_propagator,
    sobolev_norm,
    synthesize,
)

PRESETS = ("lowband", "gauss", "delta-like")
PRESET_LMAX = {"lowband": 3, "gauss": 24, "delta-like": 32}


def preset_state(name, l_max=None):
    """Unit-norm named test states."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    l_max = PRESET_LMAX[name] if l_max is None else l_max
    if name == "lowband":
        s = SpectralState(l_max)
        n = (min(l_max, 3) + 1) ** 2
        s.coeffs[:n] = 1.0
    elif name == "gauss":
        l = np.arange(l_max + 1)
        s = SpectralState.zonal(np.exp(-(l**2) / 18.0))
    else:
        # point mass at the north pole, truncated: a_l0 = Y_l0(pole)
        l = np.arange(l_max + 1)
        s = SpectralState.zonal(np.sqrt((2 * l + 1) / (4 * np.pi)))
    return s.scaled(1.0 / s.norm())


@dataclass
class ExperimentConfig:
    name: str = "default"
    t_total: float = 1.0
    n_sweep: list = field(default_factory=lambda: [2**k for k in range(3, 13)])
    epsilon: float = 1.0 / 30.0
    bump: BumpProfile = field(default_factory=BumpProfile)
    l_max: int | None = None
    test_state: str | SpectralState = "lowband"
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.bump, dict):
            self.bump = BumpProfile(**self.bump)
        if isinstance(self.test_state, dict):
            self.test_state = SpectralState.from_json(self.test_state)
        self.n_sweep = [int(n) for n in self.n_sweep]
        if not self.n_sweep:
            raise ValueError("n_sweep: must not be empty")
        if any(n < 1 for n in self.n_sweep):
            raise ValueError("n_sweep: every N must be >= 1")
        if any(b <= a for a, b in zip(self.n_sweep, self.n_sweep[1:])):
            raise ValueError("n_sweep: must be strictly increasing")
        if self.t_total == 0:
            raise ValueError("t_total: must be non-zero")
        if not 0 <= self.epsilon <= 1.0 / 3.0:
            raise ValueError("epsilon: must lie in [0, 1/3]")
        if self.l_max is not None and self.l_max < 0:
            raise ValueError("l_max: must be >= 0")
        if isinstance(self.test_state, str) and self.test_state not in PRESETS:
            raise ValueError(f"test_state: unknown preset {self.test_state!r}")

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config field(s): {', '.join(sorted(extra))}")
        return cls(**data)

    def state(self):
        if isinstance(self.test_state, SpectralState):
            return self.test_state
        return preset_state(self.test_state, self.l_max)

    def to_dict(self):
        d = asdict(self)
        d["bump"] = {"r_flat": self.bump.r_flat, "r_cut": self.bump.r_cut}
        if isinstance(self.test_state, SpectralState):
            d["test_state"] = json.loads(self.test_state.to_json())
        return d


def version_string():
    """Package version plus ``git describe`` of the working tree when available."""
    try:
        desc = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=Path(__file__).resolve().parent,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        desc = ""
    return f"{__version__}+{desc}" if desc else __version__


@dataclass
class ResultTable:
    experiment: str
    columns: dict
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = {k: np.asarray(v) for k, v in self.columns.items()}
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"column lengths differ: {lengths}")

    def __len__(self):
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def __getitem__(self, key):
        return self.columns[key]

    def _flat_columns(self):
        out = {}
        for k, v in self.columns.items():
            if np.iscomplexobj(v):
                out[f"re_{k}"] = v.real
                out[f"im_{k}"] = v.imag
            else:
                out[k] = v
        return out

    def to_csv(self):
        cols = self._flat_columns()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(list(cols))
        for row in zip(*cols.values()):
            w.writerow([_cell(x) for x in row])
        return buf.getvalue()

    def to_json(self):
        cols = {k: [_json_cell(x) for x in v] for k, v in self._flat_columns().items()}
        return json.dumps({"metadata": self.metadata, "columns": cols}, indent=2)

    def write(self, out_dir):
        """Write ``<experiment>-<name>-<timestamp>.csv`` and a matching ``.json``."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        name = self.metadata.get("config", {}).get("name", "run")
        stamp = self.metadata.get("timestamp", time.strftime("%Y%m%dT%H%M%SZ", time.gmtime()))
        stem = out_dir / f"{self.experiment}-{name}-{stamp}"
        csv_path = stem.with_suffix(".csv")
        csv_path.write_text(self.to_csv(), newline="")
        stem.with_suffix(".json").write_text(self.to_json())
        return csv_path


def _cell(x):
    if isinstance(x, (np.bool_, bool)):
        return int(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return repr(float(x))
    return str(x)


def _json_cell(x):
    if isinstance(x, (np.bool_, bool, np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else None
    return str(x)


def _table(experiment, cfg, columns, **extra):
    meta = {
        "experiment": experiment,
        "config": cfg.to_dict(),
        "version": version_string(),
        "timestamp": time.strftime("%Y%m%dT%H%M%SZ", time.gmtime()),
    }
    meta.update(extra)
    return ResultTable(experiment, columns, meta)


def _map(fn, items):
    with ThreadPoolExecutor(worker_count()) as pool:
        return list(pool.map(fn, items))


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


# --- experiments ----------------------------------------------------------


def run_eigenvalues(cfg, t=None):
    """Diagonal of the slice operator at step ``t`` (default ``cfg.t_total``)."""
    t = cfg.t_total if t is None else t
    l_max = 20 if cfg.l_max is None else cfg.l_max
    ev = slice_eigenvalues(t, l_max, cfg.bump)
    return _table(
        "eigenvalues",
        cfg,
        {
            "l": np.arange(l_max + 1),
            "re_alpha": ev.alpha.real,
            "im_alpha": ev.alpha.imag,
            "abs_alpha": np.abs(ev.alpha),
            "quad_error": ev.quad_error,
        },
        t=t,
    )


def run_uniform_convergence(cfg):
    """Operator-norm error on the growing subspace ``l(l+1) < N^(1/3 - eps)``."""
    t = cfg.t_total
    power = 1.0 / 3.0 - cfg.epsilon

    def cell(n):
        energy = n**power
        sc = SliceConfig(t, n, energy, bump=cfg.bump)
        ev = slice_eigenvalues(sc.dt, sc.l_max, cfg.bump)
        return energy, sc.l_max, error_norm(sc, ev), float(ev.quad_error.max())

    rows = _map(cell, cfg.n_sweep)
    n = np.array(cfg.n_sweep)
    energy = np.array([r[0] for r in rows])
    err = np.array([r[2] for r in rows])
    shape = (energy + 1.0) ** 3 * t * t / n
    # smallest constant making the envelope an upper bound
    c = float(np.max(err / shape)) if len(n) else 0.0
    return _table(
        "converge",
        cfg,
        {
            "n": n,
            "energy": energy,
            "l_retained": np.array([_top_degree(e) for e in energy]),
            "error_norm": err,
            "envelope": c * shape,
            "quad_error": np.array([r[3] for r in rows]),
        },
        envelope_constant=c,
    )


def run_strong_convergence(cfg, projected=True):
    """``||U(t/N)^N rho(N) f - exp(i t Laplacian/2) f||`` over the sweep.

    With ``projected=False`` the projector is dropped, which is only
    meaningful because the test state is band-limited.
    """
    f = cfg.state()
    t = cfg.t_total
    exact = exact_propagator(f, t)

    def cell(n):
        if projected:
            energy = float(n)
            l_max = max(f.l_max, min_lmax_for_energy(energy))
        else:
            energy, l_max = math.inf, f.l_max
        sc = SliceConfig(t, n, energy, l_max=l_max, bump=cfg.bump)
        # degrees above the state's band carry nothing
        ev = slice_eigenvalues(sc.dt, f.l_max, cfg.bump)
        mu = _projected_mu(sc, ev, f.l_max)
        return (f.apply_degree_multipliers(mu) - exact).norm(), float(ev.quad_error.max())

    rows = _map(cell, cfg.n_sweep)
    return _table(
        "strong" if projected else "corollary",
        cfg,
        {
            "n": np.array(cfg.n_sweep),
            "error": np.array([r[0] for r in rows]),
            "quad_error": np.array([r[1] for r in rows]),
        },
        projected=projected,
        state_norm=f.norm(),
    )


def _top_degree(energy):
    """Largest ``l`` with ``l(l+1) < energy``, or -1 if none."""
    l = -1
    while (l + 1) * (l + 2) < energy:
        l += 1
    return l


def _projected_mu(sc, ev, band):
    """Slicing multipliers for degrees ``<= band`` under the projector of ``sc``."""
    keep = np.arange(band + 1) * (np.arange(band + 1) + 1) < sc.projector_energy
    return np.where(keep, ev.alpha[: band + 1] ** sc.n_slices, 0.0)


def scan_ceiling(n, t, bump):
    """Largest degree scanned for a small eigenvalue at step ``t/n``."""
    return max(int(4 * math.sqrt(n) + 64), int(math.ceil(bump.r_cut * n / abs(t))) + 64)


def run_counterexample(cfg):
    """Per ``N``, the first degree with ``|alpha_l(t/N)| < 1/2`` and what it certifies.

    Rows where no such degree exists below the ceiling are kept, with
    ``l_n = -1``, as findings.
    """
    t = cfg.t_total

    def cell(n):
        ceiling = cfg.l_max if cfg.l_max is not None else scan_ceiling(n, t, cfg.bump)
        ev = slice_eigenvalues(t / n, ceiling, cfg.bump)
        mags = np.abs(ev.alpha)
        below = np.nonzero(mags < 0.5)[0]
        parseval = float(np.sum((2 * np.arange(ceiling + 1) + 1) * mags**2))
        if len(below) == 0:
            return ceiling, -1, np.nan, np.nan, np.nan, False, parseval, float(ev.quad_error.max())
        l = int(below[0])
        a = ev.alpha[l]
        gap = abs(a**n - np.exp(-0.5j * t * l * (l + 1)))
        return ceiling, l, float(mags[l]), float(abs(a) ** n), float(gap), bool(gap > 0.5), parseval, float(ev.quad_error.max())

    rows = _map(cell, cfg.n_sweep)
    n = np.array(cfg.n_sweep)
    col = lambda i: np.array([r[i] for r in rows])  # noqa: E731
    parseval = col(6)
    return _table(
        "counterexample",
        cfg,
        {
            "n": n,
            "scan_ceiling": col(0),
            "l_n": col(1),
            "abs_alpha_ln": col(2),
            "abs_alpha_ln_pow_n": col(3),
            "norm_lower_bound": col(4),
            "certified": col(5),
            "parseval_sum": parseval,
            "parseval_ratio": parseval / (n / t) ** 2,
            "quad_error": col(7),
        },
    )


def random_pairs(rng, count, d_range=(0.2, 2.8), min_sin=0.1):
    """Point pairs in spherical coordinates away from the coordinate poles."""
    theta_lo = math.asin(min_sin)
    out = []
    while len(out) < count:
        th1, th2 = rng.uniform(theta_lo, math.pi - theta_lo, 2)
        ph1, ph2 = rng.uniform(0.0, 2.0 * math.pi, 2)
        d = spherical_distance(th1, ph1, th2, ph2)
        if d_range[0] <= d <= d_range[1]:
            out.append((th1, ph1, th2, ph2))
    return np.array(out)


def run_verification_suite(cfg, n_pairs=200, h=1e-4, lattice=20):
    """Finite-difference checks of the Van Vleck formula and the kernel residual."""
    rng = np.random.default_rng(cfg.seed)
    t_vv = rng.uniform(0.3, 3.0, n_pairs)
    vv_err = []
    for tt, (th1, ph1, th2, ph2) in zip(t_vv, random_pairs(rng, n_pairs)):
        exact = van_vleck(tt, spherical_distance(th1, ph1, th2, ph2))
        vv_err.append(abs(van_vleck_numeric(tt, th1, ph1, th2, ph2, h=h) / exact - 1.0))

    tg, dg = np.meshgrid(np.linspace(0.5, 2.0, lattice), np.linspace(0.2, 2.5, lattice))
    exact = pde_residual_analytic(tg, dg)
    pde_err = np.abs(pde_residual_numeric(tg, dg, h=h) - exact) / np.abs(exact)

    d0 = dg.min()
    t_row = tg[0]
    corrected = pde_residual_numeric(t_row, d0, h=h, dewitt=True) / kernel_value(t_row, d0)
    bracket_err = np.abs(corrected - corrected_residual_bracket(d0))

    checks = ["van_vleck", "pde_residual", "corrected_bracket"]
    errs = [max(vv_err), float(pde_err.max()), float(bracket_err.max())]
    tols = [1e-4, 1e-4, 1e-6]
    return _table(
        "verify",
        cfg,
        {
            "check": np.array(checks),
            "max_error": np.array(errs),
            "tolerance": np.array(tols),
            "passed": np.array([e < tol for e, tol in zip(errs, tols)]),
            "samples": np.array([n_pairs, lattice * lattice, lattice]),
        },
        step=h,
    )


def small_time_deviation(cfg, times=(0.4, 0.2, 0.1, 0.05), grid=None):
    """Sup-norm of ``U(t) f - f`` on a sphere grid for each step ``t``."""
    f = cfg.state()
    grid = grid or SphereGrid.for_band_limit(f.l_max, 8)
    rows = []
    for t in times:
        ev = slice_eigenvalues(t, f.l_max, cfg.bump)
        diff = apply_spectral(f, ev) - f
        rows.append((synthesize(diff, grid).sup_norm(), diff.norm(), float(ev.quad_error.max())))
    return _table(
        "small_time",
        cfg,
        {
            "t": np.array(times, dtype=float),
            "sup_deviation": np.array([r[0] for r in rows]),
            "l2_deviation": np.array([r[1] for r in rows]),
            "quad_error": np.array([r[2] for r in rows]),
        },
        sobolev_2=sobolev_norm(f, 2),
    )


EXPERIMENTS = {
    "converge": run_uniform_convergence,
    "strong": run_strong_convergence,
    "counterexample": run_counterexample,
    "verify": run_verification_suite,
}
