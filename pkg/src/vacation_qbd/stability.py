"""Mean-drift stability of the vacation queue and the four-phase comparison.

At high levels the phase process cycles 1 -> 2 -> ... -> m -> 1 regardless
of the level, so the long-run service rate is the sojourn-weighted average
of the phase rates.  The queue is stable when arrivals are slower than that
average.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import ModelError
from .model import VacationModel

CASE_TOL = 1e-12


@dataclass(frozen=True)
class StabilityProfile:
    total_rates: np.ndarray
    sojourn_weights: np.ndarray
    mean_service_rate: float
    arrival_rate: float

    @property
    def stable(self) -> bool:
        return self.arrival_rate < self.mean_service_rate

    @property
    def drift(self) -> float:
        """Arrival rate minus mean service rate; negative means stable."""
        return self.arrival_rate - self.mean_service_rate


def stability_profile(model: VacationModel, lam: float | None = None) -> StabilityProfile:
    lam = model.arrival_rate if lam is None else lam
    if not lam > 0:
        raise ModelError(f"stability profile needs a positive arrival rate, got {lam}")
    mus = model.service_rates
    v = np.append(lam + mus[:-1], lam / 2)
    inv = v.min() / v  # scaled so tiny rates do not overflow
    w = inv / inv.sum()
    return StabilityProfile(
        total_rates=v,
        sojourn_weights=w,
        mean_service_rate=float(w @ mus),
        arrival_rate=float(lam),
    )


def mean_service_rate_closed(model: VacationModel, lam: float | None = None) -> float:
    """Mean service rate as one fraction, without forming the weight vector."""
    lam = model.arrival_rate if lam is None else lam
    num = 0.0
    den = 2.0 / lam
    for mu_i in model.service_rates[:-1]:
        num += mu_i / (lam + mu_i)
        den += 1.0 / (lam + mu_i)
    return num / den


def critical_load(decay) -> float:
    """Load ``lam / mu`` at which the drift changes sign (``mu = 1``)."""
    probe = VacationModel(1.0, 1.0, tuple(decay))

    def h(k):
        return k - mean_service_rate_closed(probe, k)

    lo, hi = 1e-12, 1e-3
    if h(lo) >= 0:
        # Near zero load the mean rate is (m - 1) lam / 2, so m = 3 is never stable.
        return 0.0
    while h(hi) < 0:
        lo, hi = hi, hi * 2
        if hi > 1e6:
            raise ArithmeticError("no stability boundary found")
    return brentq(h, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def critical_arrival_rate(model: VacationModel) -> float:
    return critical_load(model.decay) * model.base_rate


def stability_polynomial_5ph(model: VacationModel, lam: float | None = None) -> float:
    """Closed-form drift polynomial for five phases; negative means stable."""
    if model.phase_count != 5:
        raise ModelError(f"the five-phase polynomial needs m = 5, got m = {model.phase_count}")
    lam = model.arrival_rate if lam is None else lam
    _, a, b, c = model.decay
    k = lam / model.base_rate
    return (
        k**2 * (a * b + a * c + b * c + a + b + c)
        + 2 * k**3 * (a + b + c + 1)
        + 3 * k**4
        - a * b * c
    )


# Four-phase model (decay 1, a, b) against an M/M/1 queue served at rate b*mu.


def _check_ab(a, b):
    if not 0 < b < a < 1:
        raise ModelError(f"need 0 < b < a < 1, got a={a}, b={b}")


def g_four_phase(a: float, b: float, mu: float, lam: float) -> float:
    num = mu / (lam + mu) + a * mu / (lam + a * mu) + b * mu / (lam + b * mu)
    den = 1 / (lam + mu) + 1 / (lam + a * mu) + 1 / (lam + b * mu) + 2 / lam
    return num / den


def theorem2_gap(a: float, b: float, mu: float, lam: float) -> float:
    """``g(lam) - b*mu``: how far the four-phase mean rate sits above the baseline."""
    return g_four_phase(a, b, mu, lam) - b * mu


def f_coefficients(a: float, b: float, mu: float) -> tuple[float, float, float, float]:
    """Coefficients of the cubic numerator ``f``, highest power first.

    ``g(lam) - b*mu = -mu * f(lam) / D(lam)`` with ``D > 0`` for ``lam > 0``.
    """
    return (
        4 * b - a - 1,
        2 * mu * (a * b + b - a + 2 * b**2),
        3 * mu**2 * b**2 * (a + 1),
        2 * a * b**2 * mu**3,
    )


def f_value(a: float, b: float, mu: float, lam: float) -> float:
    c3, c2, c1, c0 = f_coefficients(a, b, mu)
    return ((c3 * lam + c2) * lam + c1) * lam + c0


def gap_denominator(a: float, b: float, mu: float, lam: float) -> float:
    return (
        3 * lam * mu**2 * (a + b + a * b)
        + 4 * lam**2 * mu * (a + b + 1)
        + 5 * lam**3
        + 2 * a * b * mu**3
    )


class CubicCase(enum.Enum):
    QUADRATIC = "Quadratic"
    NEGATIVE_CUBIC = "NegativeCubic"
    POSITIVE_CUBIC = "PositiveCubic"


@dataclass(frozen=True)
class Theorem2Report:
    a: float
    b: float
    mu: float
    f_coefficients: tuple[float, float, float, float]
    discriminant_a: float
    case: CubicCase
    roots: tuple[float, ...]
    closed_form_roots: tuple[float, ...]
    leading_positive_term: float  # 3ab - 2a + 3b

    @property
    def largest_root(self) -> float:
        return max(self.roots)

    @property
    def all_roots_negative(self) -> bool:
        return all(r < 0 for r in self.roots)


def theorem2_report(a: float, b: float, mu: float) -> Theorem2Report:
    """Classify the cubic ``f`` and return its real roots.

    ``-b*mu`` is always a root; the remaining quadratic comes from synthetic
    division, which avoids cancellation near ``4b - a - 1 = 0``.
    """
    _check_ab(a, b)
    coeffs = f_coefficients(a, b, mu)
    lead = coeffs[0]
    s = 3 * a * b - 2 * a + 3 * b
    radicand = 9*a*a*b*b - 4*a*a*b - 14*a*b*b + 4*a*a - 4*a*b + 9*b*b
    big_a = math.sqrt(radicand) if radicand >= 0 else math.nan

    # f(lam) = (lam + b mu) * (alpha lam^2 + beta lam + gamma)
    alpha = lead
    beta = coeffs[1] - b * mu * alpha
    gamma = coeffs[2] - b * mu * beta

    roots = [-b * mu]
    if abs(lead) <= CASE_TOL:
        case = CubicCase.QUADRATIC
        roots.append(-gamma / beta)
        closed = (-b * mu, -b * mu * (4 * b - 1) / (6 * b * b - 4 * b + 1))
    else:
        case = CubicCase.NEGATIVE_CUBIC if lead < 0 else CubicCase.POSITIVE_CUBIC
        disc = beta * beta - 4 * alpha * gamma
        if disc >= 0:
            q = -0.5 * (beta + math.copysign(math.sqrt(disc), beta))
            roots.extend([q / alpha, gamma / q])
        closed = (
            -b * mu,
            -mu * (s + big_a) / (2 * lead),
            -mu * (s - big_a) / (2 * lead),
        )
    return Theorem2Report(
        a=a, b=b, mu=mu,
        f_coefficients=coeffs,
        discriminant_a=big_a,
        case=case,
        roots=tuple(sorted(roots)),
        closed_form_roots=tuple(sorted(closed)),
        leading_positive_term=s,
    )


def four_phase_stable_limit(a: float, b: float, mu: float) -> float:
    """Largest arrival rate keeping the four-phase model stable."""
    return critical_load((1.0, a, b)) * mu
