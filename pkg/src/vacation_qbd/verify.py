"""Seeded invariant suites run by ``vacation-qbd verify``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import VacationModel
from .oracles import simulate, truncated_direct_solve
from .qbd import expected_customers_exact, solve
from .stability import (
    f_value,
    four_phase_stable_limit,
    g_four_phase,
    stability_polynomial_5ph,
    stability_profile,
    theorem2_gap,
    theorem2_report,
)


@dataclass
class SuiteResult:
    name: str
    passed: int = 0
    failed: int = 0

    def check(self, ok: bool):
        if ok:
            self.passed += 1
        else:
            self.failed += 1

    @property
    def ok(self) -> bool:
        return self.failed == 0


def sample_ab(rng: np.random.Generator) -> tuple[float, float]:
    """Uniform point of the open triangle ``0 < b < a < 1``."""
    while True:
        u, v = rng.random(2)
        a, b = max(u, v), min(u, v)
        if 0 < b < a < 1:
            return float(a), float(b)


def sample_decay(rng: np.random.Generator, n: int) -> tuple[float, ...]:
    while True:
        tail = np.sort(rng.random(n))[::-1]
        if tail[-1] > 0 and np.all(np.diff(tail) < 0) and tail[0] < 1:
            return (1.0, *map(float, tail))


def theorem2_suite(samples: int, rng: np.random.Generator, points: int = 20) -> SuiteResult:
    res = SuiteResult("four-phase mean rate below b*mu")
    mu = 1.0
    for _ in range(samples):
        a, b = sample_ab(rng)
        limit = four_phase_stable_limit(a, b, mu)
        for lam in rng.uniform(0, limit, points):
            if lam <= 0 or not g_four_phase(a, b, mu, lam) > lam:
                continue
            gap = theorem2_gap(a, b, mu, lam)
            f = f_value(a, b, mu, lam)
            res.check(gap < 0)
            if abs(f) > 1e-12:
                res.check(np.sign(gap) == -np.sign(f))
    return res


def cubic_suite(samples: int, rng: np.random.Generator) -> SuiteResult:
    res = SuiteResult("cubic numerator structure")
    for _ in range(samples):
        a, b = sample_ab(rng)
        mu = float(10 ** rng.uniform(-1, 1))
        scale = mu**3
        res.check(math.isclose(f_value(a, b, mu, 0.0), 2 * a * b * b * mu**3, rel_tol=1e-12))
        res.check(abs(f_value(a, b, mu, -b * mu)) <= 1e-9 * scale)
        rep = theorem2_report(a, b, mu)
        res.check(all(abs(f_value(a, b, mu, r)) < 1e-6 * scale for r in rep.roots))
    return res


def polynomial_suite(samples: int, rng: np.random.Generator) -> SuiteResult:
    res = SuiteResult("five-phase polynomial vs drift")
    for _ in range(samples):
        decay = sample_decay(rng, 3)
        mu = float(10 ** rng.uniform(-1, 3))
        lam = float(rng.uniform(0, 0.5)) * mu * decay[-1] * 3 + 1e-9
        model = VacationModel(lam, mu, decay)
        p = stability_polynomial_5ph(model)
        if abs(p) <= 1e-10:
            continue
        res.check((p < 0) == stability_profile(model).stable)
    return res


def oracle_suite(rng: np.random.Generator, simulate_points: bool = True) -> SuiteResult:
    res = SuiteResult("QBD vs truncated solve vs simulation")
    decay = (1.0, 0.99, 0.98, 0.1)
    mu = 100.0
    for load in (0.01, 0.03, 0.08):
        model = VacationModel(load * mu, mu, decay)
        exact = expected_customers_exact(solve(model))
        direct = truncated_direct_solve(model, 400)
        res.check(abs(exact - direct.expected_customers) <= 1e-8 * abs(direct.expected_customers))
        if simulate_points:
            seed = int(rng.integers(2**63))
            est = simulate(model, horizon=2e5, warmup=2e3, seed=seed, replications=10)
            res.check(abs(est.mean_customers - exact) < 3 * est.std_error)
            res.check(est.invariant_violations == 0)
    return res


def run_all(samples: int = 500, seed: int = 7, simulate_points: bool = True) -> list[SuiteResult]:
    rng = np.random.default_rng(seed)
    return [
        theorem2_suite(samples, rng),
        cubic_suite(samples, rng),
        polynomial_suite(2 * samples, rng),
        oracle_suite(rng, simulate_points),
    ]
