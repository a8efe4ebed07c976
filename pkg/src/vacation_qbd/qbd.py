"""Matrix-geometric solution of the paired-level QBD.

The stationary vector on repeating block ``j`` (levels ``2j`` and
``2j + 1``) is ``pi_1 R^(j-1)`` where ``R`` is the minimal nonnegative
solution of ``R^2 A2 + R A1 + A0 = 0``.

For odd phase counts the chain has two closed classes (see
:func:`vacation_qbd.model.same_class`), so the boundary equations alone
do not pin down a unique distribution.  The solve is restricted to the
class of a chosen start state, ``(0, 3)`` by default, which is the limit
reached from that state.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NegativeMass, NonConvergence, RankDeficiency, SingularA1, Unstable
from .model import DEFAULT_START, BlockSet, State, VacationModel, build_blocks, class_mask
from .stability import stability_profile

DEFAULT_TOL = 1e-14
DEFAULT_MAX_ITER = 100_000
NEGATIVE_TOL = 1e-10


def max_norm(x: np.ndarray) -> float:
    return float(np.max(np.abs(x))) if x.size else 0.0


def spectral_radius(mat: np.ndarray, tol: float = 1e-12, max_steps: int = 10_000) -> float:
    """Perron root of a nonnegative matrix by power iteration.

    The estimate is the 1-norm growth ratio of ``mat^k 1``; for a
    nonnegative matrix it converges to the spectral radius.
    """
    mat = np.asarray(mat, dtype=float)
    x = np.ones(mat.shape[0])
    est = 0.0
    for _ in range(max_steps):
        y = mat @ x
        norm_y = np.abs(y).sum()
        if norm_y == 0.0:
            return 0.0
        new = norm_y / np.abs(x).sum()
        x = y / norm_y
        if abs(new - est) <= tol * max(new, 1.0):
            return float(new)
        est = new
    return float(est)


@dataclass(frozen=True)
class RateMatrixSolution:
    r: np.ndarray
    residual: float
    iterations: int
    spectral_radius: float
    history: list = field(default_factory=list, repr=False, compare=False)


def rate_matrix_residual(blocks: BlockSet, r: np.ndarray) -> float:
    return max_norm(r @ r @ blocks.big_a2 + r @ blocks.big_a1 + blocks.big_a0)


def solve_rate_matrix(
    blocks: BlockSet,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    record: bool = False,
) -> RateMatrixSolution:
    """Functional iteration ``R <- -(A0 + R^2 A2) A1^-1`` from ``R = 0``.

    Stops when successive iterates differ by less than ``tol`` in the
    max-entry norm.  With ``record=True`` every iterate is kept in
    ``history`` (they are entrywise nondecreasing).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a1 = blocks.big_a1
    if np.linalg.cond(a1) > 1 / np.finfo(float).eps:
        raise SingularA1("repeating diagonal block is singular")
    a1_inv = np.linalg.inv(a1)
    a0_term = -blocks.big_a0 @ a1_inv
    a2_term = -blocks.big_a2 @ a1_inv

    r = np.zeros_like(a1)
    history = [r] if record else []
    diff = np.inf
    for it in range(1, max_iter + 1):
        nxt = a0_term + r @ r @ a2_term
        diff = max_norm(nxt - r)
        r = nxt
        if record:
            history.append(r)
        if diff < tol:
            break
    else:
        raise NonConvergence(max_iter, diff)
    return RateMatrixSolution(
        r=r,
        residual=rate_matrix_residual(blocks, r),
        iterations=it,
        spectral_radius=spectral_radius(r),
        history=history,
    )


@dataclass(frozen=True)
class StationarySolution:
    pi0: np.ndarray
    pi1: np.ndarray
    rate_matrix: RateMatrixSolution
    boundary_states: tuple[State, ...]
    pair_states: tuple[State, ...]
    repeating_state_offsets: np.ndarray
    start: State = DEFAULT_START
    balance_residual: float = 0.0

    @property
    def r(self) -> np.ndarray:
        return self.rate_matrix.r

    @property
    def phase_count(self) -> int:
        return len(self.pi1) // 2

    def _fundamental(self) -> np.ndarray:
        return np.linalg.inv(np.eye(len(self.pi1)) - self.r)

    def block(self, j: int) -> np.ndarray:
        """Stationary probabilities of repeating block ``j >= 1``."""
        return self.pi1 @ np.linalg.matrix_power(self.r, j - 1)

    def total_mass(self) -> float:
        return float(self.pi0.sum() + self.pi1 @ self._fundamental() @ np.ones(len(self.pi1)))

    def normalization_error(self) -> float:
        return abs(self.total_mass() - 1.0)

    def level_phase_table(self, max_level: int) -> np.ndarray:
        """Probabilities as an array indexed ``[level, phase - 1]``."""
        m = self.phase_count
        out = np.zeros((max_level + 1, m))
        for (n, i), p in zip(self.boundary_states, self.pi0):
            out[n, i - 1] = p
        blk = self.pi1.copy()
        j = 1
        while 2 * j <= max_level:
            out[2 * j] = blk[:m]
            if 2 * j + 1 <= max_level:
                out[2 * j + 1] = blk[m:]
            blk = blk @ self.r
            j += 1
        return out


def solve_boundary(
    blocks: BlockSet,
    rate: RateMatrixSolution,
    start: State = DEFAULT_START,
) -> StationarySolution:
    """Boundary vector ``pi0`` and first repeating block ``pi1``.

    Solves ``pi0 B11 + pi1 B21 = 0``, ``pi0 B12 + pi1 (A1 + R A2) = 0`` and
    ``pi0 1 + pi1 (I - R)^-1 1 = 1`` on the closed class of ``start``.  One
    balance column is replaced by the normalization; the dropped equation is
    checked afterwards.
    """
    m = blocks.phase_count
    r = rate.r
    nb = blocks.b11.shape[0]
    k = r.shape[0]
    pair1 = blocks.pair_states(1)
    labels = list(blocks.boundary_states) + list(pair1)
    if start not in blocks.boundary_states:
        raise ValueError(f"start state {start} is not a recurrent boundary state")

    full = np.block([
        [blocks.b11, blocks.b12],
        [blocks.b21, blocks.big_a1 + r @ blocks.big_a2],
    ])
    weights = np.concatenate([np.ones(nb), np.linalg.solve(np.eye(k) - r, np.ones(k))])
    mask = class_mask(m, labels, start)
    sub = full[np.ix_(mask, mask)]

    # x sub = 0 must have a one-dimensional solution space.
    u, s, vh = np.linalg.svd(sub)
    scale = s[0] if s.size else 1.0
    null_dim = int(np.sum(s <= 1e-10 * scale))
    if null_dim != 1:
        raise RankDeficiency(f"boundary system has null space of dimension {null_dim}")
    # A column can be traded for the normalization iff the right null vector
    # is nonzero there; take the largest entry.
    drop = int(np.argmax(np.abs(vh[-1])))
    system = sub.copy()
    system[:, drop] = weights[mask]
    rhs = np.zeros(system.shape[0])
    rhs[drop] = 1.0
    x = np.linalg.solve(system.T, rhs)

    residual = abs(x @ sub[:, drop]) / scale
    full_x = np.zeros(len(labels))
    full_x[mask] = x
    if full_x.min() < -NEGATIVE_TOL:
        raise NegativeMass(f"stationary component {full_x.min():.3e} below zero")
    full_x = np.clip(full_x, 0.0, None)
    return StationarySolution(
        pi0=full_x[:nb],
        pi1=full_x[nb:],
        rate_matrix=rate,
        boundary_states=blocks.boundary_states,
        pair_states=pair1,
        repeating_state_offsets=blocks.repeating_state_offsets,
        start=start,
        balance_residual=float(max(residual, max_norm(full_x @ full) / scale)),
    )


def solve(
    model: VacationModel,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    start: State = DEFAULT_START,
) -> StationarySolution:
    if not stability_profile(model).stable:
        raise Unstable(f"lam={model.arrival_rate} exceeds the mean service rate")
    blocks = build_blocks(model)
    return solve_boundary(blocks, solve_rate_matrix(blocks, tol, max_iter), start)


def expected_customers_paper(sol: StationarySolution) -> float:
    """``pi1 ((I-R)^-2 1 + (I-R)^-1 offsets)`` with offsets ``(1,..,1,2,..,2)``.

    This counts block ``j`` as holding ``j + 1`` and ``j + 2`` customers and
    leaves out the boundary; see :func:`expected_customers_exact`.
    """
    n = sol._fundamental()
    e = np.ones(len(sol.pi1))
    return float(sol.pi1 @ (n @ n @ e + n @ sol.repeating_state_offsets))


def boundary_correction(sol: StationarySolution) -> float:
    """Mass-weighted level of the boundary states (level-1 states count 1)."""
    levels = np.array([lvl for lvl, _ in sol.boundary_states], dtype=float)
    return float(sol.pi0 @ levels)


def expected_customers_exact(sol: StationarySolution) -> float:
    """Stationary mean number in system.

    Block ``j`` covers levels ``2j`` and ``2j + 1``, so it contributes
    ``pi_j (2j 1 + offsets - 1)``; the boundary adds its level-1 mass.
    """
    n = sol._fundamental()
    e = np.ones(len(sol.pi1))
    repeating = 2 * sol.pi1 @ n @ n @ e + sol.pi1 @ n @ (sol.repeating_state_offsets - 1)
    return float(repeating) + boundary_correction(sol)


def expected_customers_series(sol: StationarySolution, kind: str = "paper", tail_tol: float = 1e-12,
                              max_blocks: int = 1_000_000) -> float:
    """Block-by-block summation of either E(L) form, for checking the closed forms."""
    e = np.ones(len(sol.pi1))
    offsets = sol.repeating_state_offsets
    total = boundary_correction(sol) if kind == "exact" else 0.0
    blk = sol.pi1.copy()
    for j in range(1, max_blocks + 1):
        if kind == "paper":
            weight = j * e + offsets
        else:
            weight = 2 * j * e + offsets - 1
        term = float(blk @ weight)
        total += term
        if term < tail_tol and blk.sum() < tail_tol:
            break
        blk = blk @ sol.r
    return total
