from collections import deque
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PAPER_DECAY, decays, transitions
from vacation_qbd.errors import ModelError
from vacation_qbd.model import (
    VacationModel,
    assemble_qbd,
    build_blocks,
    build_truncated_generator,
    class_mask,
    fold_level,
    transient_states,
)


def test_rejects_bad_parameters():
    with pytest.raises(ModelError):
        VacationModel(1.0, 1.0, (1.0,))
    with pytest.raises(ModelError):
        VacationModel(1.0, 1.0, (1.0, 0.5, 0.7))
    with pytest.raises(ModelError):
        VacationModel(1.0, 1.0, (0.9, 0.5))
    with pytest.raises(ModelError):
        VacationModel(1.0, 0.0, (1.0, 0.5))
    with pytest.raises(ModelError):
        VacationModel(-1.0, 1.0, (1.0, 0.5))


def test_paper_blocks():
    blocks = build_blocks(VacationModel(1.0, 1.0, PAPER_DECAY))
    assert np.allclose(np.diag(blocks.a10, 1), [1, 0.99, 0.98, 0.1])
    assert blocks.a02[4, 0] == 0.5
    assert np.count_nonzero(blocks.a02) == 1
    assert np.allclose(np.diag(blocks.a01, 1), [1, 1, 1, 1])
    assert np.allclose(np.diag(blocks.a00), [-1, -1, -1, -1, -0.5])
    assert np.allclose(np.diag(blocks.a11), [-2, -1.99, -1.98, -1.1, -0.5])


def test_paper_boundary_blocks_with_positive_rates():
    lam, mu, a, b, c = 2.0, 10.0, 0.9, 0.8, 0.3
    blocks = build_blocks(VacationModel.five_phase(lam, mu, a, b, c))
    b11 = np.array([
        [-lam, 0, 0, 0, 0, lam, 0],
        [0, -lam, 0, 0, 0, 0, lam],
        [0, 0, -lam / 2, 0, 0, 0, 0],
        [a * mu, 0, 0, -(lam + a * mu), 0, 0, 0],
        [0, b * mu, 0, 0, -(lam + b * mu), 0, 0],
        [0, 0, c * mu, 0, 0, -(lam + c * mu), 0],
        [0, 0, 0, 0, 0, 0, -lam / 2],
    ])
    b12 = np.zeros((7, 10))
    b12[2, 0] = lam / 2
    b12[3, 2] = b12[4, 3] = b12[5, 4] = lam
    b12[6, 5] = lam / 2
    a3 = np.diag([mu, a * mu, b * mu, c * mu], 1)
    b21 = np.vstack([np.hstack([np.zeros((5, 2)), a3]), np.zeros((5, 7))])
    np.testing.assert_array_equal(blocks.b11, b11)
    np.testing.assert_array_equal(blocks.b12, b12)
    np.testing.assert_array_equal(blocks.b21, b21)
    assert blocks.boundary_states == ((0, 3), (0, 4), (0, 5), (1, 2), (1, 3), (1, 4), (1, 5))
    np.testing.assert_array_equal(blocks.repeating_state_offsets, [1] * 5 + [2] * 5)


@given(decays(), st.floats(0.01, 50), st.floats(0.01, 50))
def test_block_structure(decay, lam, mu):
    blocks = build_blocks(VacationModel(lam, mu, decay))
    m = len(decay) + 1
    z = np.zeros((m, m))
    np.testing.assert_array_equal(blocks.big_a0, np.block([[blocks.a02, z], [blocks.a01, blocks.a02]]))
    np.testing.assert_array_equal(blocks.big_a1, np.block([[blocks.a11, blocks.a01], [blocks.a10, blocks.a11]]))
    np.testing.assert_array_equal(blocks.big_a2, np.block([[z, blocks.a10], [z, z]]))
    assert blocks.b11.shape == (2 * m - 3, 2 * m - 3)
    assert blocks.b12.shape == (2 * m - 3, 2 * m)
    assert blocks.b21.shape == (2 * m, 2 * m - 3)
    for name in ("a00", "a01", "a02", "a10", "a11", "big_a0", "big_a1", "big_a2", "b11", "b12", "b21"):
        mat = getattr(blocks, name)
        off = mat - np.diag(np.diag(mat)) if mat.shape[0] == mat.shape[1] else mat
        assert off.min() >= 0, name
    assert np.all(np.diag(blocks.a11) < 0)
    assert np.all(np.diag(blocks.b11) < 0)
    scale = lam + mu
    np.testing.assert_allclose((blocks.a00 + blocks.a01 + blocks.a02).sum(1), 0, atol=1e-12 * scale)
    np.testing.assert_allclose((blocks.a10 + blocks.a11 + blocks.a01 + blocks.a02).sum(1), 0, atol=1e-12 * scale)
    # repeating rows conserve rate across A2 + A1 + A0
    np.testing.assert_allclose((blocks.big_a0 + blocks.big_a1 + blocks.big_a2).sum(1), 0, atol=1e-12 * scale)


@given(decays(), st.integers(1, 6))
@settings(max_examples=40)
def test_assembled_qbd_rows_conserve_except_truncated(decay, n_pairs):
    blocks = build_blocks(VacationModel(0.7, 3.0, decay))
    q = assemble_qbd(blocks, n_pairs)
    off = q - np.diag(np.diag(q))
    assert off.min() >= 0
    rows = q.sum(1)
    k = 2 * (len(decay) + 1)
    interior = rows[: len(rows) - k] if n_pairs > 1 else rows[: blocks.b11.shape[0]]
    # Boundary rows never lose rate: transient states only receive nothing.
    np.testing.assert_allclose(interior, 0, atol=1e-12)
    assert np.all(rows[len(rows) - k:] <= 1e-12)


def test_truncated_generator_small():
    model = VacationModel(2.0, 100.0, PAPER_DECAY)
    gen = build_truncated_generator(model, 4)
    q = gen.toarray()
    assert q.shape == (25, 25)
    np.testing.assert_allclose(q.sum(1), 0, atol=1e-12)
    row = q[gen.index((0, 3))]
    assert row[gen.index((0, 3))] == -2.0
    assert row[gen.index((1, 4))] == 2.0
    assert np.count_nonzero(row) == 2
    row = q[gen.index((2, 5))]
    assert row[gen.index((2, 5))] == -1.0
    assert row[gen.index((4, 1))] == 1.0
    assert np.count_nonzero(row) == 2


def test_truncated_generator_paper_instance_at_50():
    gen = build_truncated_generator(VacationModel(2.0, 10.0, PAPER_DECAY), 50)
    q = gen.toarray()
    off = q - np.diag(np.diag(q))
    assert off.min() >= 0
    assert np.max(np.abs(q.sum(1))) < 1e-12


def test_truncated_generator_matches_transition_rules():
    model = VacationModel(1.5, 4.0, (1.0, 0.7, 0.4, 0.2, 0.1))
    n_max = 12
    gen = build_truncated_generator(model, n_max)
    q = gen.toarray()
    m = model.phase_count
    for (n, i) in gen.labels:
        expected = np.zeros(len(gen.labels))
        for (tn, ti), rate in transitions((n, i), m, 1.5, model.service_rates):
            while tn > n_max:
                tn -= 2
            expected[gen.index((tn, ti))] += rate
        expected[gen.index((n, i))] -= expected.sum()
        np.testing.assert_allclose(q[gen.index((n, i))], expected, atol=1e-14)


def test_fold_level():
    assert fold_level(7, 10) == 7
    assert fold_level(11, 10) == 9
    assert fold_level(12, 10) == 10


def test_truncated_generator_rejects_tiny_window():
    with pytest.raises(ModelError):
        build_truncated_generator(VacationModel(1.0, 1.0, PAPER_DECAY), 3)


def _transient_by_search(m, n_max=14):
    """States outside every closed communicating class, found by BFS reachability."""
    mus = np.linspace(1.0, 0.2, m - 1)
    states = [(n, i) for n in range(n_max + 1) for i in range(1, m + 1)]

    def succ(s):
        out = []
        for (tn, ti), _ in transitions(s, m, 1.0, mus):
            while tn > n_max:
                tn -= 2
            out.append((tn, ti))
        return out

    reach = {}
    for s in states:
        seen = {s}
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in succ(u):
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        reach[s] = seen
    # s is recurrent iff every state it reaches can reach it back
    return sorted(s for s in states if s[0] <= 1 and any(s not in reach[t] for t in reach[s]))


@pytest.mark.parametrize("m", [3, 4, 5, 6, 7])
def test_transient_states(m):
    model = VacationModel(1.0, 1.0, tuple(np.linspace(1.0, 0.2, m - 1)))
    assert transient_states(model) == [(0, 1), (0, 2), (1, 1)]


@pytest.mark.parametrize("m", [4, 5, 6, 7])
def test_transient_states_by_reachability(m):
    # m = 3 has no positive recurrent states at all (two arrivals per cycle,
    # at most two services), so the search only applies from m = 4.
    assert _transient_by_search(m) == [(0, 1), (0, 2), (1, 1)]


@given(decays(), st.floats(0.01, 100), st.floats(0.01, 100))
@settings(max_examples=30)
def test_transient_states_ignore_rates(decay, lam, mu):
    assert transient_states(VacationModel(lam, mu, decay)) == [(0, 1), (0, 2), (1, 1)]


@pytest.mark.parametrize("m", [3, 4, 5, 6, 7])
def test_class_mask_matches_reachability(m):
    model = VacationModel(1.0, 1.0, tuple(np.linspace(1.0, 0.2, m - 1)))
    gen = build_truncated_generator(model, 10)
    adj = gen.matrix.toarray() > 0
    seen = {gen.index((0, 3))}
    queue = deque(seen)
    while queue:
        u = queue.popleft()
        for v in np.nonzero(adj[u])[0]:
            if v not in seen:
                seen.add(int(v))
                queue.append(int(v))
    transient = {(0, 1), (0, 2), (1, 1)}
    labels = [s for s in gen.labels if s not in transient]
    mask = class_mask(m, labels)
    reached = np.array([gen.index(s) in seen for s in labels])
    np.testing.assert_array_equal(mask, reached)
    assert mask.all() == (m % 2 == 0)


def test_blocks_are_read_only(paper_model):
    blocks = build_blocks(paper_model)
    with pytest.raises(ValueError):
        blocks.a10[0, 1] = 5.0
    with pytest.raises(Exception):
        replace(paper_model, arrival_rate=-1.0)
