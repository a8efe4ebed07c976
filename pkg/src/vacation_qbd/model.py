"""The m-phase fatigue/vacation queue and its generator blocks.

States are ``(level, phase)`` pairs.  From ``(n, i)`` with ``i < m`` the
chain moves to ``(n + 1, i + 1)`` at rate ``lam`` and, when ``n > 0``, to
``(n - 1, i + 1)`` at rate ``mu_i``.  From the vacation phase ``(n, m)`` it
jumps to ``(n + 2, 1)`` at rate ``lam / 2``.

Because the vacation jump spans two levels, the repeating part of the
generator is grouped into pairs of consecutive levels ``(2j, 2j + 1)``,
``j >= 1``.  Levels 0 and 1, minus the three transient states, form the
boundary.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ModelError

State = tuple[int, int]

# Recurrent boundary state every comparison starts from.
DEFAULT_START: State = (0, 3)


@dataclass(frozen=True)
class VacationModel:
    arrival_rate: float
    base_rate: float
    decay: tuple[float, ...]

    def __post_init__(self):
        decay = tuple(float(d) for d in self.decay)
        object.__setattr__(self, "decay", decay)
        if len(decay) < 2:
            raise ModelError(f"need at least 3 phases (decay of length >= 2), got {len(decay) + 1}")
        if decay[0] != 1.0:
            raise ModelError(f"first decay factor must be 1, got {decay[0]}")
        if not all(d > 0 for d in decay):
            raise ModelError(f"decay factors must be positive, got {decay}")
        if not all(x > y for x, y in zip(decay, decay[1:])):
            raise ModelError(f"decay factors must be strictly decreasing, got {decay}")
        # lam == 0 is admitted so an empty system can be simulated.
        if not (self.arrival_rate >= 0 and np.isfinite(self.arrival_rate)):
            raise ModelError(f"arrival rate must be a finite nonnegative number, got {self.arrival_rate}")
        if not (self.base_rate > 0 and np.isfinite(self.base_rate)):
            raise ModelError(f"base service rate must be positive, got {self.base_rate}")

    @classmethod
    def four_phase(cls, lam: float, mu: float, a: float, b: float) -> "VacationModel":
        return cls(lam, mu, (1.0, a, b))

    @classmethod
    def five_phase(cls, lam: float, mu: float, a: float, b: float, c: float) -> "VacationModel":
        return cls(lam, mu, (1.0, a, b, c))

    @property
    def phase_count(self) -> int:
        return len(self.decay) + 1

    @property
    def service_rates(self) -> np.ndarray:
        """Per-phase service rates; the vacation phase serves at rate 0."""
        return np.append(self.base_rate * np.asarray(self.decay), 0.0)

    @property
    def load(self) -> float:
        return self.arrival_rate / self.base_rate

    def with_rates(self, lam: float, mu: float) -> "VacationModel":
        return replace(self, arrival_rate=lam, base_rate=mu)


@dataclass(frozen=True)
class BlockSet:
    a00: np.ndarray
    a01: np.ndarray
    a02: np.ndarray
    a10: np.ndarray
    a11: np.ndarray
    big_a0: np.ndarray
    big_a1: np.ndarray
    big_a2: np.ndarray
    b11: np.ndarray
    b12: np.ndarray
    b21: np.ndarray
    boundary_states: tuple[State, ...]
    repeating_state_offsets: np.ndarray
    phase_count: int = field(default=0)

    def __post_init__(self):
        for name in ("a00", "a01", "a02", "a10", "a11", "big_a0", "big_a1", "big_a2",
                     "b11", "b12", "b21", "repeating_state_offsets"):
            getattr(self, name).setflags(write=False)

    def pair_states(self, j: int = 1) -> tuple[State, ...]:
        """Labels of the repeating block ``j`` (levels ``2j`` and ``2j + 1``)."""
        m = self.phase_count
        return tuple((2 * j + k, i) for k in (0, 1) for i in range(1, m + 1))

    @property
    def boundary_levels(self) -> np.ndarray:
        return np.array([n for n, _ in self.boundary_states], dtype=float)


def boundary_states(m: int) -> tuple[State, ...]:
    return tuple([(0, i) for i in range(3, m + 1)] + [(1, i) for i in range(2, m + 1)])


def build_blocks(model: VacationModel) -> BlockSet:
    m = model.phase_count
    lam = model.arrival_rate
    mus = model.service_rates

    a00 = np.diag([-lam] * (m - 1) + [-lam / 2])
    a01 = np.diag([lam] * (m - 1), 1)
    a02 = np.zeros((m, m))
    a02[m - 1, 0] = lam / 2
    a10 = np.diag(mus[:-1], 1)
    a11 = np.diag(np.append(-(lam + mus[:-1]), -lam / 2))

    z = np.zeros((m, m))
    big_a0 = np.block([[a02, z], [a01, a02]])
    big_a1 = np.block([[a11, a01], [a10, a11]])
    big_a2 = np.block([[z, a10], [z, z]])

    # Boundary: Q1 restricted to levels 0 and 1 with (0,1), (0,2), (1,1) removed.
    level01 = np.block([[a00, a01], [a10, a11]])
    keep = [i - 1 for i in range(3, m + 1)] + [m + i - 1 for i in range(2, m + 1)]
    b11 = level01[np.ix_(keep, keep)]
    # Levels 0,1 -> levels 2,3: a02 from level 0 to 2, a01 from 1 to 2, a02 from 1 to 3.
    up = np.block([[a02, z], [a01, a02]])
    b12 = up[keep, :]
    # Level 2 -> level 1 through a10; level 3 has no direct path to the boundary.
    down = np.block([[z, a10], [z, z]])
    b21 = down[:, keep]

    offsets = np.concatenate([np.ones(m), 2 * np.ones(m)])
    return BlockSet(
        a00=a00, a01=a01, a02=a02, a10=a10, a11=a11,
        big_a0=big_a0, big_a1=big_a1, big_a2=big_a2,
        b11=b11, b12=b12, b21=b21,
        boundary_states=boundary_states(m),
        repeating_state_offsets=offsets,
        phase_count=m,
    )


def _predecessors(state: State, m: int) -> list[State]:
    n, i = state
    preds = []
    if i >= 2:
        if n >= 1:
            preds.append((n - 1, i - 1))  # arrival
        preds.append((n + 1, i - 1))  # service
    elif n >= 2:
        preds.append((n - 2, m))  # end of vacation
    return preds


def transient_states(model: VacationModel) -> list[State]:
    """States that can only be entered from other transient states.

    Works from the predecessor structure: a phase-1 state needs a vacation
    landing two levels up, so only levels 0 and 1 can be starved of inflow.
    """
    m = model.phase_count
    if m < 3:
        raise ModelError("need at least 3 phases")
    region = [(n, i) for n in range(4) for i in range(1, m + 1)]
    transient: set[State] = set()
    changed = True
    while changed:
        changed = False
        for s in region:
            if s in transient:
                continue
            if all(p in transient for p in _predecessors(s, m)):
                transient.add(s)
                changed = True
    return sorted(transient)


def same_class(m: int, s: State, t: State) -> bool:
    """Whether two recurrent states lie in the same closed class.

    Arrivals and services move level and phase by one each, the vacation
    jump changes level + phase by ``3 - m``.  For odd ``m`` the parity of
    level + phase is therefore conserved and the chain splits in two.
    """
    if m % 2 == 0:
        return True
    return (s[0] + s[1] - t[0] - t[1]) % 2 == 0


def class_mask(m: int, labels: Sequence[State], start: State = DEFAULT_START) -> np.ndarray:
    return np.array([same_class(m, s, start) for s in labels], dtype=bool)


@dataclass(frozen=True)
class TruncatedGenerator:
    matrix: sp.csr_matrix
    labels: tuple[State, ...]
    max_level: int

    def index(self, state: State) -> int:
        n, i = state
        m = len(self.labels) // (self.max_level + 1)
        return n * m + (i - 1)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def fold_level(target: int, max_level: int) -> int:
    """Map an out-of-window level back inside, keeping its parity."""
    if target <= max_level:
        return target
    return target - 2 * ((target - max_level + 1) // 2)


def build_truncated_generator(model: VacationModel, max_level: int) -> TruncatedGenerator:
    """Full generator on levels ``0..max_level``.

    Transitions that would leave the window are folded back to the highest
    level of the same parity (``max_level`` or ``max_level - 1``), so the
    parity classes stay separate and every row still sums to zero.
    """
    if max_level < 4:
        raise ModelError(f"max_level must be at least 4, got {max_level}")
    m = model.phase_count
    lam = model.arrival_rate
    mus = model.service_rates
    labels = tuple((n, i) for n in range(max_level + 1) for i in range(1, m + 1))

    rows, cols, vals = [], [], []

    def add(src, dst, rate):
        if rate > 0:
            rows.append(src[0] * m + src[1] - 1)
            cols.append(dst[0] * m + dst[1] - 1)
            vals.append(rate)

    for n, i in labels:
        if i < m:
            add((n, i), (fold_level(n + 1, max_level), i + 1), lam)
            if n > 0:
                add((n, i), (n - 1, i + 1), mus[i - 1])
        else:
            add((n, i), (fold_level(n + 2, max_level), 1), lam / 2)

    size = len(labels)
    q = sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()
    q.setdiag(q.diagonal() - np.asarray(q.sum(axis=1)).ravel())
    q.sum_duplicates()
    return TruncatedGenerator(matrix=q.tocsr(), labels=labels, max_level=max_level)


def assemble_qbd(blocks: BlockSet, n_pairs: int) -> np.ndarray:
    """Dense block-tridiagonal generator: boundary plus ``n_pairs`` level pairs.

    The last pair's upward block is dropped, so its rows lose the outflow
    ``big_a0`` would have carried.
    """
    nb = blocks.b11.shape[0]
    k = blocks.big_a1.shape[0]
    size = nb + n_pairs * k
    q = np.zeros((size, size))
    q[:nb, :nb] = blocks.b11
    q[:nb, nb:nb + k] = blocks.b12
    q[nb:nb + k, :nb] = blocks.b21
    for j in range(n_pairs):
        s = slice(nb + j * k, nb + (j + 1) * k)
        q[s, s] = blocks.big_a1
        if j + 1 < n_pairs:
            q[s, nb + (j + 1) * k:nb + (j + 2) * k] = blocks.big_a0
        if j > 0:
            q[s, nb + (j - 1) * k:nb + j * k] = blocks.big_a2
    return q


def assembled_labels(blocks: BlockSet, n_pairs: int) -> list[State]:
    labels = list(blocks.boundary_states)
    for j in range(1, n_pairs + 1):
        labels.extend(blocks.pair_states(j))
    return labels
