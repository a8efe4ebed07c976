"""Five-phase vacation queue against an M/M/1 queue served at the slowest rate ``c*mu``."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import NoCrossover, NonConvergence, Unstable
from .model import VacationModel, build_blocks
from .qbd import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    expected_customers_exact,
    expected_customers_paper,
    solve_boundary,
    solve_rate_matrix,
)
from .stability import stability_polynomial_5ph

OK = "ok"
UNSTABLE = "unstable"
NEAR_CRITICAL = "near-critical"
NEAR_CRITICAL_RADIUS = 0.999


def mm1_expected_customers(lam: float, service_rate: float) -> float:
    if lam >= service_rate:
        raise Unstable(f"M/M/1 with lam={lam} >= service rate {service_rate}")
    return lam / (service_rate - lam)


@dataclass(frozen=True)
class VacationPoint:
    status: str
    el_paper: float | None = None
    el_exact: float | None = None
    spectral_radius: float | None = None


def vacation_point(a: float, b: float, c: float, mu: float, lam: float,
                   tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> VacationPoint:
    """Both E(L) forms for one (lam, mu), or the reason there is none."""
    model = VacationModel.five_phase(lam, mu, a, b, c)
    if stability_polynomial_5ph(model) >= 0:
        return VacationPoint(UNSTABLE)
    blocks = build_blocks(model)
    try:
        rate = solve_rate_matrix(blocks, tol, max_iter)
    except NonConvergence:
        return VacationPoint(NEAR_CRITICAL)
    if rate.spectral_radius > NEAR_CRITICAL_RADIUS:
        return VacationPoint(NEAR_CRITICAL, spectral_radius=rate.spectral_radius)
    sol = solve_boundary(blocks, rate)
    return VacationPoint(OK, expected_customers_paper(sol), expected_customers_exact(sol),
                         rate.spectral_radius)


@dataclass(frozen=True)
class SweepRecord:
    lam: float
    mu: float
    el_vacation: float | None
    el_mm1: float | None
    status_vacation: str
    status_mm1: str
    el_vacation_exact: float | None = None

    @property
    def rho(self) -> float:
        return self.lam / self.mu

    @property
    def difference(self) -> float | None:
        if self.el_vacation is None or self.el_mm1 is None:
            return None
        return self.el_vacation - self.el_mm1


def _record(a, b, c, lam, mu) -> SweepRecord:
    point = vacation_point(a, b, c, mu, lam)
    if lam < c * mu:
        el_mm1, status_mm1 = mm1_expected_customers(lam, c * mu), OK
    else:
        el_mm1, status_mm1 = None, UNSTABLE
    return SweepRecord(lam, mu, point.el_paper, el_mm1, point.status, status_mm1, point.el_exact)


def _map(fn, items, workers):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def sweep_rho(a: float, b: float, c: float, mu: float, rho_grid: Iterable[float],
              workers: int = 1) -> list[SweepRecord]:
    VacationModel.five_phase(1.0, mu, a, b, c)  # validates the decay triple
    return _map(lambda r: _record(a, b, c, r * mu, mu), list(rho_grid), workers)


def sweep_surface(a: float, b: float, c: float, lambda_grid: Sequence[float],
                  mu_grid: Sequence[float], workers: int = 1) -> list[list[SweepRecord]]:
    """Records indexed ``[lambda index][mu index]``."""
    VacationModel.five_phase(1.0, 1.0, a, b, c)
    cells = [(lam, mu) for lam in lambda_grid for mu in mu_grid]
    flat = _map(lambda p: _record(a, b, c, p[0], p[1]), cells, workers)
    n = len(mu_grid)
    return [flat[i * n:(i + 1) * n] for i in range(len(lambda_grid))]


def default_rho_grid(step: float = 1e-4, upper: float = 0.15) -> np.ndarray:
    n = int(round(upper / step))
    return step * np.arange(1, n + 1)


@dataclass(frozen=True)
class CrossoverResult:
    k1: float
    k2: float
    grid_step: float
    bracket: tuple[tuple[float, float], tuple[float, float]]
    k1_refined: float | None = None
    k1_exact: float | None = None
    bracket_exact: tuple[tuple[float, float], tuple[float, float]] | None = None


def _first_sign_change(rhos, diffs):
    for i in range(len(diffs) - 1):
        if diffs[i] * diffs[i + 1] < 0:
            return i
    return None


def _interpolate(rhos, diffs, i, step):
    # Linear interpolation inside the bracketing cell.
    return rhos[i] + step * diffs[i] / (diffs[i] - diffs[i + 1])


def find_crossover_k1(a: float, b: float, c: float, mu: float = 100.0, grid_step: float = 1e-4,
                      refine: bool = False, workers: int = 1) -> CrossoverResult:
    """Load at which the vacation system and M/M/1(c*mu) have equal E(L).

    Scans ``rho = step, 2 step, ...`` below ``c``, finds the first sign
    change of ``E(L)_vacation - E(L)_mm1`` and interpolates linearly.  The
    headline ``k1`` uses the paired-level E(L) form; ``k1_exact`` repeats the
    scan with the exact stationary mean.
    """
    VacationModel.five_phase(1.0, mu, a, b, c)
    rhos = grid_step * np.arange(1, int(np.ceil(c / grid_step)))
    rhos = rhos[rhos < c]
    records = sweep_rho(a, b, c, mu, rhos, workers)
    usable = [r for r in records if r.status_vacation == OK and r.status_mm1 == OK]
    x = np.array([r.rho for r in usable])
    d_paper = np.array([r.el_vacation - r.el_mm1 for r in usable])
    d_exact = np.array([r.el_vacation_exact - r.el_mm1 for r in usable])

    i = _first_sign_change(x, d_paper)
    if i is None:
        raise NoCrossover(f"E(L) difference keeps one sign on (0, {c})")
    k1 = _interpolate(x, d_paper, i, grid_step)
    bracket = ((float(x[i]), float(d_paper[i])), (float(x[i + 1]), float(d_paper[i + 1])))

    k1_refined = None
    if refine:
        def diff(rho):
            p = vacation_point(a, b, c, mu, rho * mu)
            return p.el_paper - mm1_expected_customers(rho * mu, c * mu)
        k1_refined = brentq(diff, x[i], x[i + 1], xtol=1e-14)

    j = _first_sign_change(x, d_exact)
    k1_exact = _interpolate(x, d_exact, j, grid_step) if j is not None else None
    bracket_exact = None
    if j is not None:
        bracket_exact = ((float(x[j]), float(d_exact[j])), (float(x[j + 1]), float(d_exact[j + 1])))
    return CrossoverResult(
        k1=float(k1), k2=float(c), grid_step=grid_step, bracket=bracket,
        k1_refined=None if k1_refined is None else float(k1_refined),
        k1_exact=None if k1_exact is None else float(k1_exact),
        bracket_exact=bracket_exact,
    )
