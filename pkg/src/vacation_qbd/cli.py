"""Command-line front end.

Exit codes: 0 success, 2 invalid arguments, 3 unstable model where a
stable one is required, 4 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import analysis, verify
from .errors import ModelError, NoCrossover, Unstable
from .model import VacationModel, build_blocks
from .oracles import simulate
from .qbd import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    boundary_correction,
    expected_customers_exact,
    expected_customers_paper,
    solve_boundary,
    solve_rate_matrix,
)
from .stability import stability_polynomial_5ph, stability_profile, theorem2_report

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_UNSTABLE = 3
EXIT_VERIFY = 4

SCAN_HEADER = ["rho", "el_vacation", "el_mm1", "status_vacation", "status_mm1"]
SURFACE_HEADER = ["lambda", "mu", "el_vacation", "el_mm1", "status_vacation", "status_mm1"]


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


@dataclass
class RunConfig:
    subcommand: str
    lam: float | None = None
    mu: float = 100.0
    decay: tuple[float, ...] = (1.0, 0.99, 0.98, 0.1)
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    step: float = 1e-4
    upper: float = 0.15
    lambda_range: tuple[float, float, float] = (1, 200, 1)
    mu_range: tuple[float, float, float] = (1, 200, 1)
    refine: bool = False
    horizon: float | None = None
    warmup: float | None = None
    seed: int = 0
    replications: int = 20
    workers: int = 1
    samples: int = 500
    output: str | None = None
    format: str = "csv"

    @property
    def abc(self) -> tuple[float, float, float]:
        if len(self.decay) != 4:
            raise ModelError(f"this subcommand needs five phases (a, b, c), got decay {self.decay}")
        return self.decay[1], self.decay[2], self.decay[3]

    def model(self) -> VacationModel:
        if self.lam is None:
            raise ModelError("--lambda is required")
        return VacationModel(self.lam, self.mu, self.decay)


class Writer:
    """Rows to CSV or JSON lines, on stdout or a file."""

    def __init__(self, config: RunConfig, stream):
        self.format = config.format
        self.stream = stream
        self.header = None
        self._csv = csv.writer(stream, lineterminator="\n")

    def write_header(self, header):
        self.header = list(header)
        if self.format == "csv":
            self._csv.writerow(self.header)

    def write_row(self, row):
        if self.format == "csv":
            self._csv.writerow([fmt(v) for v in row])
        else:
            obj = {}
            for k, v in zip(self.header, row):
                if isinstance(v, (float, np.floating)):
                    v = float(fmt(v))
                elif isinstance(v, np.bool_):
                    v = bool(v)
                obj[k] = v
            self.stream.write(json.dumps(obj) + "\n")

    def write_pairs(self, pairs: list[tuple[str, Any]]):
        self.write_header(["quantity", "value"])
        for k, v in pairs:
            self.write_row([k, v])


def _analyze(cfg: RunConfig, out: Writer) -> int:
    model = cfg.model()
    profile = stability_profile(model)
    pairs: list[tuple[str, Any]] = [
        ("lambda", model.arrival_rate),
        ("mu", model.base_rate),
        ("phases", model.phase_count),
        ("mean_service_rate", profile.mean_service_rate),
        ("stable_drift", profile.stable),
    ]
    if model.phase_count == 5:
        poly = stability_polynomial_5ph(model)
        pairs += [("stability_polynomial", poly), ("stable_polynomial", poly < 0)]
    slowest = model.service_rates[-2]
    if model.arrival_rate < slowest:
        el_mm1, status_mm1 = analysis.mm1_expected_customers(model.arrival_rate, slowest), analysis.OK
    else:
        el_mm1, status_mm1 = None, analysis.UNSTABLE
    if not profile.stable:
        pairs += [("status_vacation", analysis.UNSTABLE), ("el_mm1", el_mm1), ("status_mm1", status_mm1)]
        out.write_pairs(pairs)
        return EXIT_UNSTABLE
    blocks = build_blocks(model)
    rate = solve_rate_matrix(blocks, cfg.tol, cfg.max_iter)
    sol = solve_boundary(blocks, rate)
    el_paper = expected_customers_paper(sol)
    el_exact = expected_customers_exact(sol)
    pairs += [
        ("spectral_radius_r", rate.spectral_radius),
        ("r_iterations", rate.iterations),
        ("r_residual", rate.residual),
        ("normalization_error", sol.normalization_error()),
        ("el_paper", el_paper),
        ("el_exact", el_exact),
        ("boundary_correction", boundary_correction(sol)),
        ("mm1_service_rate", slowest),
        ("el_mm1", el_mm1),
        ("status_mm1", status_mm1),
        ("vacation_better_paper", None if el_mm1 is None else el_paper < el_mm1),
        ("vacation_better_exact", None if el_mm1 is None else el_exact < el_mm1),
    ]
    out.write_pairs(pairs)
    return EXIT_OK


def _stability(cfg: RunConfig, out: Writer) -> int:
    pairs: list[tuple[str, Any]] = []
    if cfg.lam is not None:
        model = cfg.model()
        p = stability_profile(model)
        for i, (v, w) in enumerate(zip(p.total_rates, p.sojourn_weights), start=1):
            pairs += [(f"total_rate_{i}", v), (f"sojourn_weight_{i}", w)]
        pairs += [("mean_service_rate", p.mean_service_rate), ("stable", p.stable)]
        if model.phase_count == 5:
            pairs.append(("stability_polynomial", stability_polynomial_5ph(model)))
    a, b = cfg.decay[1], cfg.decay[2]
    rep = theorem2_report(a, b, cfg.mu)
    pairs += [(f"f_coefficient_{3 - i}", c) for i, c in enumerate(rep.f_coefficients)]
    pairs += [
        ("discriminant_a", rep.discriminant_a),
        ("case", rep.case.value),
        ("leading_term_3ab_2a_3b", rep.leading_positive_term),
    ]
    pairs += [(f"root_{i}", r) for i, r in enumerate(rep.roots, start=1)]
    pairs.append(("all_roots_negative", rep.all_roots_negative))
    out.write_pairs(pairs)
    return EXIT_OK


def _scan(cfg: RunConfig, out: Writer) -> int:
    a, b, c = cfg.abc
    records = analysis.sweep_rho(a, b, c, cfg.mu, analysis.default_rho_grid(cfg.step, cfg.upper),
                                 cfg.workers)
    out.write_header(SCAN_HEADER)
    for r in records:
        out.write_row([r.rho, r.el_vacation, r.el_mm1, r.status_vacation, r.status_mm1])
    return EXIT_OK


def _grid(triple):
    start, stop, step = triple
    n = int(round((stop - start) / step)) + 1
    return [start + i * step for i in range(n)]


def _surface(cfg: RunConfig, out: Writer) -> int:
    a, b, c = cfg.abc
    grid = analysis.sweep_surface(a, b, c, _grid(cfg.lambda_range), _grid(cfg.mu_range), cfg.workers)
    out.write_header(SURFACE_HEADER)
    for row in grid:
        for r in row:
            out.write_row([r.lam, r.mu, r.el_vacation, r.el_mm1, r.status_vacation, r.status_mm1])
    return EXIT_OK


def _crossover(cfg: RunConfig, out: Writer) -> int:
    a, b, c = cfg.abc
    try:
        res = analysis.find_crossover_k1(a, b, c, cfg.mu, cfg.step, cfg.refine, cfg.workers)
    except NoCrossover as exc:
        out.write_pairs([("k1", None), ("k2", c), ("note", str(exc))])
        return EXIT_OK
    (r0, d0), (r1, d1) = res.bracket
    pairs = [
        ("k1", res.k1),
        ("k2", res.k2),
        ("grid_step", res.grid_step),
        ("bracket_rho_low", r0), ("bracket_diff_low", d0),
        ("bracket_rho_high", r1), ("bracket_diff_high", d1),
        ("k1_refined", res.k1_refined),
        ("k1_exact", res.k1_exact),
    ]
    if res.bracket_exact is not None:
        (e0, f0), (e1, f1) = res.bracket_exact
        pairs += [("bracket_exact_rho_low", e0), ("bracket_exact_diff_low", f0),
                  ("bracket_exact_rho_high", e1), ("bracket_exact_diff_high", f1)]
    out.write_pairs(pairs)
    return EXIT_OK


def _simulate(cfg: RunConfig, out: Writer) -> int:
    est = simulate(cfg.model(), cfg.horizon, cfg.warmup, cfg.seed, cfg.replications, workers=cfg.workers)
    out.write_pairs([
        ("mean_customers", est.mean_customers),
        ("std_error", est.std_error),
        ("horizon", est.horizon),
        ("warmup", est.warmup),
        ("seed", est.seed),
        ("replications", est.replications),
        ("events", est.events),
        ("invariant_violations", est.invariant_violations),
        ("warning", est.warning),
    ])
    return EXIT_OK


def _verify(cfg: RunConfig, out: Writer) -> int:
    results = verify.run_all(cfg.samples, cfg.seed)
    out.write_header(["suite", "passed", "failed", "status"])
    for r in results:
        out.write_row([r.name, r.passed, r.failed, "pass" if r.ok else "fail"])
    return EXIT_OK if all(r.ok for r in results) else EXIT_VERIFY


COMMANDS = {
    "analyze": _analyze,
    "stability": _stability,
    "scan": _scan,
    "surface": _surface,
    "crossover": _crossover,
    "simulate": _simulate,
    "verify": _verify,
}


def run(config: RunConfig, stream=None) -> int:
    if config.output:
        with open(config.output, "w", newline="") as fh:
            return COMMANDS[config.subcommand](config, Writer(config, fh))
    return COMMANDS[config.subcommand](config, Writer(config, stream or sys.stdout))


def _positive(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vacation-qbd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mu", type=_positive, default=100.0, help="base (phase-1) service rate")
    common.add_argument("--a", type=float, default=0.99)
    common.add_argument("--b", type=float, default=0.98)
    common.add_argument("--c", type=float, default=0.1)
    common.add_argument("--phases", type=int, choices=[4, 5], default=5,
                        help="use (1, a, b) for 4 or (1, a, b, c) for 5 phases")
    common.add_argument("--decay", type=float, nargs="+",
                        help="explicit decay factors 1 > d2 > ... > 0; overrides --a/--b/--c/--phases")
    common.add_argument("--tol", type=_positive, default=DEFAULT_TOL)
    common.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--output", "-o")
    common.add_argument("--format", choices=["csv", "json-lines"], default="csv")

    def with_lambda(p, required):
        p.add_argument("--lambda", dest="lam", type=float, required=required, help="arrival rate")

    p = sub.add_parser("analyze", parents=[common], help="solve one model and compare with M/M/1")
    with_lambda(p, True)
    p = sub.add_parser("stability", parents=[common], help="drift profile and four-phase cubic analysis")
    with_lambda(p, False)
    p = sub.add_parser("scan", parents=[common], help="E(L) of both systems over a load grid")
    p.add_argument("--step", type=_positive, default=1e-4)
    p.add_argument("--upper", type=_positive, default=0.15)
    p = sub.add_parser("surface", parents=[common], help="E(L) of both systems over a (lambda, mu) grid")
    p.add_argument("--lambda-range", type=float, nargs=3, default=[1, 200, 1], metavar=("START", "STOP", "STEP"))
    p.add_argument("--mu-range", type=float, nargs=3, default=[1, 200, 1], metavar=("START", "STOP", "STEP"))
    p = sub.add_parser("crossover", parents=[common], help="load where the two systems tie")
    p.add_argument("--step", type=_positive, default=1e-4)
    p.add_argument("--refine", action="store_true")
    p = sub.add_parser("simulate", parents=[common], help="discrete-event estimate of E(L)")
    with_lambda(p, True)
    p.add_argument("--horizon", type=_positive)
    p.add_argument("--warmup", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replications", type=int, default=20)
    p = sub.add_parser("verify", parents=[common], help="seeded invariant checks")
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--seed", type=int, default=7)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.decay:
        decay = tuple(args.decay)
    elif args.phases == 4:
        decay = (1.0, args.a, args.b)
    else:
        decay = (1.0, args.a, args.b, args.c)
    VacationModel(0.0, args.mu, decay)  # parse-time validation of the decay vector
    cfg = RunConfig(subcommand=args.subcommand, mu=args.mu, decay=decay, tol=args.tol,
                    max_iter=args.max_iter, workers=args.workers, output=args.output,
                    format=args.format)
    for name in ("lam", "step", "upper", "refine", "horizon", "warmup", "seed", "replications", "samples"):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    if hasattr(args, "lambda_range"):
        cfg.lambda_range = tuple(args.lambda_range)
        cfg.mu_range = tuple(args.mu_range)
    if cfg.lam is not None and cfg.lam < 0:
        raise ModelError(f"--lambda must be nonnegative, got {cfg.lam}")
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ModelError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return run(cfg)
    except Unstable as exc:
        print(f"{parser.prog}: unstable: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except ModelError as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
