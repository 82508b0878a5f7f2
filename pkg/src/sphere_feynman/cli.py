"""Command-line entry point: ``sphere-feynman <subcommand> [flags]``.

Exit codes: 0 success, 1 configuration error (nothing written),
2 numerical failure (outputs already written are listed in a FAILED file).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from .experiments import (
    ExperimentConfig,
    run_counterexample,
    run_eigenvalues,
    run_strong_convergence,
    run_uniform_convergence,
    run_verification_suite,
)
from .quadrature import QuadratureError
from .propagator import ResolutionError

log = logging.getLogger("sphere_feynman")

SWEEP = [2**k for k in range(3, 13)]
COUNTER_SWEEP = [4, 8, 16, 32, 64]

DEFAULTS = {
    "t_total": 1.0,
    "epsilon": 1.0 / 30.0,
    "r_flat": math.pi / 4,
    "r_cut": 3 * math.pi / 4,
    "seed": 0,
    "test_state": "lowband",
}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _common(p, sweep=None, lmax_help=None, state=False):
    p.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields; flags win")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory (default: results)")
    p.add_argument("--name", help="run name used in file names (default: default)")
    p.add_argument("--t", dest="t_total", type=float, help=f"total time t (default: {DEFAULTS['t_total']})")
    p.add_argument("--r-flat", type=float, help=f"bump flat radius (default: pi/4 = {DEFAULTS['r_flat']:.6f})")
    p.add_argument("--r-cut", type=float, help=f"bump cutoff radius (default: 3pi/4 = {DEFAULTS['r_cut']:.6f})")
    p.add_argument("--seed", type=int, help=f"random seed (default: {DEFAULTS['seed']})")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config field; VALUE is parsed as JSON when possible",
    )
    if sweep is not None:
        p.add_argument(
            "--n", dest="n_sweep", type=_int_list, help=f"slice counts N (default: {','.join(map(str, sweep))})"
        )
    if lmax_help:
        p.add_argument("--lmax", dest="l_max", type=int, help=lmax_help)
    if state:
        p.add_argument("--state", dest="test_state", help="test state preset: lowband, gauss, delta-like (default: lowband)")


def build_parser():
    parser = _Parser(prog="sphere-feynman", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eigenvalues", help="diagonal alpha_l(t) of the slice operator")
    _common(p, lmax_help="largest degree (default: 20)")

    p = sub.add_parser("converge", help="operator-norm error on growing projected subspaces")
    _common(p, sweep=SWEEP)
    p.add_argument("--epsilon", type=float, help=f"projector exponent 1/3 - eps (default: 1/30 = {DEFAULTS['epsilon']:.6f})")

    p = sub.add_parser("strong", help="strong convergence on a test state")
    _common(p, sweep=SWEEP, lmax_help="band limit of the preset state (default: preset's own)", state=True)
    p.add_argument("--no-projector", action="store_true", help="drop rho(N); valid for band-limited states")

    p = sub.add_parser("counterexample", help="degrees with |alpha_l(t/N)| < 1/2")
    _common(p, sweep=COUNTER_SWEEP, lmax_help="scan ceiling (default: max(4 sqrt(N) + 64, r_cut N / t + 64))")

    p = sub.add_parser("verify", help="finite-difference checks of Van Vleck and the kernel residual")
    _common(p)
    p.add_argument("--pairs", type=int, default=200, help="random point pairs (default: 200)")
    p.add_argument("--h", type=float, default=1e-4, help="finite-difference step (default: 0.0001)")

    p = sub.add_parser("all", help="run every experiment with its defaults")
    _common(p)
    return parser


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def effective_config(args, default_sweep=None):
    """Merge defaults, config file and flags (in that order of precedence)."""
    data = {}
    if default_sweep is not None:
        data["n_sweep"] = list(default_sweep)
    if args.config is not None:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}")
        if not isinstance(loaded, dict):
            raise ConfigError("config: top level must be a JSON object")
        data.update(loaded)
    for item in args.overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set: expected KEY=VALUE, got {item!r}")
        data[key.strip()] = _parse_value(value)
    for key in ("name", "t_total", "seed", "n_sweep", "l_max", "test_state", "epsilon"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    bump = dict(data.get("bump") or {})
    if args.r_flat is not None:
        bump["r_flat"] = args.r_flat
    if args.r_cut is not None:
        bump["r_cut"] = args.r_cut
    if bump:
        data["bump"] = {"r_flat": DEFAULTS["r_flat"], "r_cut": DEFAULTS["r_cut"], **bump}
    try:
        return ExperimentConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))


def _jobs(args):
    """``(label, config, runner)`` triples for the chosen subcommand."""
    cmd = args.command
    if cmd == "eigenvalues":
        return [("eigenvalues", effective_config(args), run_eigenvalues)]
    if cmd == "converge":
        return [("converge", effective_config(args, SWEEP), run_uniform_convergence)]
    if cmd == "strong":
        projected = not args.no_projector
        return [("strong", effective_config(args, SWEEP), lambda c: run_strong_convergence(c, projected))]
    if cmd == "counterexample":
        return [("counterexample", effective_config(args, COUNTER_SWEEP), run_counterexample)]
    if cmd == "verify":
        if args.pairs < 1 or args.h <= 0:
            raise ConfigError("verify: --pairs must be >= 1 and --h > 0")
        return [("verify", effective_config(args), lambda c: run_verification_suite(c, args.pairs, args.h))]
    return [
        ("eigenvalues", effective_config(args), run_eigenvalues),
        ("converge", effective_config(args, SWEEP), run_uniform_convergence),
        ("strong", effective_config(args, SWEEP), run_strong_convergence),
        ("corollary", effective_config(args, SWEEP), lambda c: run_strong_convergence(c, False)),
        ("counterexample", effective_config(args, COUNTER_SWEEP), run_counterexample),
        ("verify", effective_config(args), run_verification_suite),
    ]


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        jobs = _jobs(args)
    except ConfigError as exc:
        print(f"sphere-feynman: config error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    written = []
    for label, cfg, runner in jobs:
        log.info("running %s", label)
        try:
            table = runner(cfg)
        except (QuadratureError, ResolutionError, FloatingPointError) as exc:
            print(f"sphere-feynman: numerical failure in {label}: {exc}", file=sys.stderr)
            args.out.mkdir(parents=True, exist_ok=True)
            marker = args.out / f"FAILED-{label}.txt"
            marker.write_text(
                f"{label} failed: {exc}\npartial outputs from this invocation:\n"
                + "".join(f"{p}\n" for p in written)
            )
            return 2
        path = table.write(args.out)
        written.append(path)
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
