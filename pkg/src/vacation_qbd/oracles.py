"""Ground truth that does not go through the R matrix.

``truncated_direct_solve`` solves the balance equations of the finite
generator on levels ``0..max_level``.  ``simulate`` runs the chain event by
event.  Both start from (and so live in the closed class of) ``(0, 3)``.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order
from scipy.sparse.linalg import spsolve

from .errors import IllConditioned, Unstable
from .model import DEFAULT_START, State, VacationModel, build_truncated_generator
from .stability import stability_profile

TAIL_WARN = 1e-8


@dataclass(frozen=True)
class TruncatedSolveResult:
    probabilities: np.ndarray  # [level, phase - 1]
    tail_mass: float
    expected_customers: float
    max_level: int

    @property
    def reliable(self) -> bool:
        return self.tail_mass <= TAIL_WARN

    def prob(self, state: State) -> float:
        return float(self.probabilities[state[0], state[1] - 1])


def truncated_direct_solve(model: VacationModel, max_level: int = 400,
                           start: State = DEFAULT_START) -> TruncatedSolveResult:
    if max_level < 20:
        raise ValueError(f"max_level must be at least 20, got {max_level}")
    if not stability_profile(model).stable:
        raise Unstable(f"lam={model.arrival_rate} exceeds the mean service rate")
    gen = build_truncated_generator(model, max_level)
    q = gen.matrix
    m = model.phase_count

    # The states reachable from start form the closed class the chain settles in.
    adjacency = q.copy()
    adjacency.setdiag(0)
    adjacency.eliminate_zeros()
    reach = np.sort(breadth_first_order(adjacency, gen.index(start), directed=True,
                                        return_predecessors=False))
    qc = q[reach][:, reach].tocsc()
    a = qc.T.tolil()
    a[len(reach) - 1, :] = np.ones(len(reach))
    rhs = np.zeros(len(reach))
    rhs[-1] = 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        try:
            x = spsolve(a.tocsc(), rhs)
        except Exception as exc:  # MatrixRankWarning and friends
            raise IllConditioned(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise IllConditioned("truncated solve returned non-finite values")
    if np.max(np.abs(qc.T @ x)) > 1e-8 * max(1.0, abs(q).max()):
        raise IllConditioned("truncated solve residual too large")

    p = np.zeros(len(gen.labels))
    p[reach] = np.clip(x, 0.0, None)
    p /= math.fsum(p)
    table = p.reshape(max_level + 1, m)
    levels = np.arange(max_level + 1)
    return TruncatedSolveResult(
        probabilities=table,
        tail_mass=float(table[-2:].sum()),
        expected_customers=math.fsum(levels * table.sum(axis=1)),
        max_level=max_level,
    )


@dataclass(frozen=True)
class SimulationEstimate:
    mean_customers: float
    std_error: float
    horizon: float
    warmup: float
    seed: int
    replications: int
    replication_means: tuple[float, ...]
    events: int
    invariant_violations: int
    warning: str | None = None


@numba.njit(cache=True, nogil=True)
def _advance(level, phase, t, area, lam, mus, m, warmup, horizon,
             expo, unif, rec_t, rec_level, rec_phase, record):
    """Consume one chunk of random draws.

    Returns the new state, the number of draws used, whether the horizon
    was reached and how many transitions broke the phase/level laws.
    """
    violations = 0
    used = 0
    done = False
    for k in range(expo.shape[0]):
        if phase < m:
            rate = lam + (mus[phase - 1] if level > 0 else 0.0)
        else:
            rate = lam / 2.0
        if rate <= 0.0:
            dt = np.inf
        else:
            dt = expo[k] / rate
        lo = max(t, warmup)
        hi = min(t + dt, horizon)
        if hi > lo:
            area += level * (hi - lo)
        t = t + dt
        used = k + 1
        if t >= horizon:
            done = True
            break
        old_level = level
        old_phase = phase
        if phase < m:
            if level > 0 and unif[k] * rate < mus[phase - 1]:
                level -= 1
            else:
                level += 1
            phase += 1
        else:
            level += 2
            phase = 1
        if record:
            rec_t[k] = t
            rec_level[k] = level
            rec_phase[k] = phase
        if level < 0:
            violations += 1
        if old_phase < m:
            if phase != old_phase + 1 or abs(level - old_level) != 1:
                violations += 1
            if level < old_level and old_level == 0:
                violations += 1
        elif phase != 1 or level != old_level + 2:
            violations += 1
    return level, phase, t, area, used, done, violations


def _stream(seed: int, replication: int) -> np.random.Generator:
    # PCG64 streams keyed by (seed, replication); independent of how many run.
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replication,))))


def _run_replication(model: VacationModel, horizon: float, warmup: float, seed: int,
                     replication: int, start: State, chunk: int):
    rng = _stream(seed, replication)
    mus = model.service_rates
    m = model.phase_count
    level, phase = start
    t = 0.0
    area = 0.0
    events = 0
    violations = 0
    empty = np.empty(0)
    empty_i = np.empty(0, dtype=np.int64)
    done = False
    while not done:
        expo = rng.standard_exponential(chunk)
        unif = rng.random(chunk)
        level, phase, t, area, used, done, bad = _advance(
            level, phase, t, area, model.arrival_rate, mus, m, warmup, horizon,
            expo, unif, empty, empty_i, empty_i, False)
        events += used
        violations += bad
    return area / (horizon - warmup), events, violations


def default_horizon(model: VacationModel, events: float = 1e6) -> float:
    """Model time covering roughly ``events`` transitions at high load."""
    v = stability_profile(model, max(model.arrival_rate, 1e-12)).total_rates
    return events * float(np.mean(1.0 / v))


def simulate(
    model: VacationModel,
    horizon: float | None = None,
    warmup: float | None = None,
    seed: int = 0,
    replications: int = 1,
    start: State = DEFAULT_START,
    workers: int = 1,
    chunk: int = 1 << 16,
) -> SimulationEstimate:
    """Time-average number in system over ``[warmup, horizon]``.

    Replications use separate PCG64 streams derived from ``(seed, index)``
    and may run on ``workers`` threads without changing the result.
    """
    if horizon is None:
        horizon = default_horizon(model)
    if warmup is None:
        warmup = 0.01 * horizon
    if not horizon > warmup >= 0:
        raise ValueError("need horizon > warmup >= 0")
    if replications < 1:
        raise ValueError("need at least one replication")

    def one(r):
        return _run_replication(model, horizon, warmup, seed, r, start, chunk)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(replications)))
    else:
        results = [one(r) for r in range(replications)]

    means = [r[0] for r in results]
    mean = math.fsum(means) / replications
    if replications > 1:
        var = math.fsum((x - mean) ** 2 for x in means) / (replications - 1)
        std_error = math.sqrt(var / replications)
    else:
        std_error = math.nan
    warning = None
    if model.arrival_rate > 0 and not stability_profile(model).stable:
        warning = "arrival rate exceeds the mean service rate; the estimate grows with the horizon"
    return SimulationEstimate(
        mean_customers=mean,
        std_error=std_error,
        horizon=horizon,
        warmup=warmup,
        seed=seed,
        replications=replications,
        replication_means=tuple(means),
        events=sum(r[1] for r in results),
        invariant_violations=sum(r[2] for r in results),
        warning=warning,
    )


def sample_path(model: VacationModel, n_events: int, seed: int = 0,
                start: State = DEFAULT_START) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Jump times, levels and phases after each of the first ``n_events`` transitions."""
    rng = _stream(seed, 0)
    expo = rng.standard_exponential(n_events)
    unif = rng.random(n_events)
    rec_t = np.zeros(n_events)
    rec_level = np.zeros(n_events, dtype=np.int64)
    rec_phase = np.zeros(n_events, dtype=np.int64)
    _, _, _, _, used, _, _ = _advance(
        start[0], start[1], 0.0, 0.0, model.arrival_rate, model.service_rates,
        model.phase_count, 0.0, np.inf, expo, unif, rec_t, rec_level, rec_phase, True)
    return rec_t[:used], rec_level[:used], rec_phase[:used]


def trajectory_violations(levels: np.ndarray, phases: np.ndarray, m: int,
                          start: State = DEFAULT_START) -> list[str]:
    """Check the phase-cycle and level laws along a recorded path."""
    lv = np.concatenate([[start[0]], levels])
    ph = np.concatenate([[start[1]], phases])
    problems = []
    if lv.min() < 0:
        problems.append("negative level")
    dl = np.diff(lv)
    prev_ph, next_ph = ph[:-1], ph[1:]
    working = prev_ph < m
    if np.any(next_ph[working] != prev_ph[working] + 1):
        problems.append("phase did not advance by one")
    if np.any(next_ph[~working] != 1):
        problems.append("vacation did not reset to phase 1")
    if np.any(dl[~working] != 2):
        problems.append("reset without a two-level increase")
    if np.any(np.abs(dl[working]) != 1):
        problems.append("working step changed level by other than one")
    if np.any((dl < 0) & (lv[:-1] == 0)):
        problems.append("departure from an empty system")
    return problems
