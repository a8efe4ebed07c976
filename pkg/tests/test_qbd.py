from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import PAPER_DECAY, stable_models
from vacation_qbd.errors import NonConvergence, RankDeficiency, Unstable
from vacation_qbd.model import VacationModel, assemble_qbd, assembled_labels, build_blocks
from vacation_qbd.oracles import truncated_direct_solve
from vacation_qbd.qbd import (
    boundary_correction,
    expected_customers_exact,
    expected_customers_paper,
    expected_customers_series,
    max_norm,
    solve,
    solve_boundary,
    solve_rate_matrix,
    spectral_radius,
)
from vacation_qbd.stability import critical_arrival_rate, stability_profile


@pytest.fixture(scope="module")
def paper_solution():
    return solve(VacationModel(2.0, 100.0, PAPER_DECAY))


def test_zero_upward_block_gives_zero_r():
    blocks = build_blocks(VacationModel(2.0, 100.0, PAPER_DECAY))
    blocks = replace(blocks, big_a0=np.zeros_like(blocks.big_a0))
    rate = solve_rate_matrix(blocks)
    assert rate.iterations == 1
    assert not rate.r.any()
    assert rate.spectral_radius == 0.0


def test_rate_matrix_residual_and_monotone():
    blocks = build_blocks(VacationModel(2.0, 100.0, PAPER_DECAY))
    rate = solve_rate_matrix(blocks, tol=1e-14, record=True)
    assert rate.residual < 1e-10
    assert rate.r.min() >= 0
    for prev, nxt in zip(rate.history, rate.history[1:]):
        assert np.all(nxt >= prev - 1e-18)
    assert len(rate.history) == rate.iterations + 1


def test_rate_matrix_nonconvergence():
    blocks = build_blocks(VacationModel(2.0, 100.0, PAPER_DECAY))
    with pytest.raises(NonConvergence) as info:
        solve_rate_matrix(blocks, tol=1e-14, max_iter=3)
    assert info.value.iterations == 3


def test_spectral_radius_against_eigvals():
    rng = np.random.default_rng(3)
    for _ in range(20):
        mat = rng.random((6, 6))
        assert spectral_radius(mat) == pytest.approx(max(abs(np.linalg.eigvals(mat))), rel=1e-9)
    for load in (0.01, 0.05, 0.12):
        r = solve_rate_matrix(build_blocks(VacationModel(load * 100, 100.0, PAPER_DECAY))).r
        assert spectral_radius(r) == pytest.approx(max(abs(np.linalg.eigvals(r))), rel=1e-9)


@given(stable_models(max_phases=6))
@settings(max_examples=25, deadline=None)
def test_solution_invariants(model):
    sol = solve(model)
    rate = sol.rate_matrix
    assert rate.residual <= 10 * 1e-14 * (model.arrival_rate + model.base_rate)
    assert rate.spectral_radius < 1
    assert sol.normalization_error() < 1e-10
    assert sol.pi0.min() >= 0 and sol.pi1.min() >= 0
    for j in range(1, 11):
        assert sol.block(j).min() >= -1e-14
    assert expected_customers_exact(sol) >= expected_customers_paper(sol)


def test_boundary_balance(paper_solution):
    sol = paper_solution
    blocks = build_blocks(VacationModel(2.0, 100.0, PAPER_DECAY))
    full = np.block([[blocks.b11, blocks.b12], [blocks.b21, blocks.big_a1 + sol.r @ blocks.big_a2]])
    x = np.concatenate([sol.pi0, sol.pi1])
    assert max_norm(x @ full) < 1e-10
    assert sol.normalization_error() < 1e-10


def test_matches_truncated_distribution(paper_solution):
    direct = truncated_direct_solve(VacationModel(2.0, 100.0, PAPER_DECAY), 400)
    table = paper_solution.level_phase_table(400)
    tv = 0.5 * np.abs(table - direct.probabilities).sum()
    assert tv < 1e-8
    assert np.abs(table - direct.probabilities).max() < 1e-8


def test_expected_customers_forms(paper_solution):
    sol = paper_solution
    paper = expected_customers_paper(sol)
    exact = expected_customers_exact(sol)
    assert paper == pytest.approx(expected_customers_series(sol, "paper"), rel=1e-12)
    assert exact == pytest.approx(expected_customers_series(sol, "exact"), rel=1e-12)
    direct = truncated_direct_solve(VacationModel(2.0, 100.0, PAPER_DECAY), 400)
    assert abs(exact - direct.expected_customers) < 1e-8 * direct.expected_customers


def test_exact_minus_paper_decomposition(paper_solution):
    # exact - paper = pi1 N R N 1 + pi0 . levels, with N = (I - R)^-1
    sol = paper_solution
    n = np.linalg.inv(np.eye(len(sol.pi1)) - sol.r)
    gap = sol.pi1 @ n @ sol.r @ n @ np.ones(len(sol.pi1))
    diff = expected_customers_exact(sol) - expected_customers_paper(sol)
    assert diff == pytest.approx(gap + boundary_correction(sol), rel=1e-12)
    assert boundary_correction(sol) == pytest.approx(sol.pi0[3:].sum(), rel=1e-15)


def test_paper_form_is_linear_in_pi1(paper_solution):
    zero = replace(paper_solution, pi1=np.zeros_like(paper_solution.pi1))
    assert expected_customers_paper(zero) == 0.0


def test_unstable_model_rejected():
    lam = 1.01 * critical_arrival_rate(VacationModel(1.0, 100.0, PAPER_DECAY))
    with pytest.raises(Unstable):
        solve(VacationModel(lam, 100.0, PAPER_DECAY))


@pytest.mark.parametrize("decay", [(1.0, 0.9, 0.5), PAPER_DECAY, (1.0, 0.8, 0.6, 0.4, 0.2)])
def test_spectral_radius_tracks_drift(decay):
    base = VacationModel(1.0, 10.0, decay)
    crit = critical_arrival_rate(base)
    for factor in np.linspace(0.5, 0.99, 6):
        rate = solve_rate_matrix(build_blocks(base.with_rates(factor * crit, 10.0)))
        assert rate.spectral_radius < 1
    for factor in (1.01, 1.1, 1.5):
        blocks = build_blocks(base.with_rates(factor * crit, 10.0))
        rate = solve_rate_matrix(blocks, tol=1e-13)
        assert rate.spectral_radius >= 1 - 1e-9


def test_both_classes_solve_for_odd_phase_count():
    model = VacationModel(2.0, 100.0, PAPER_DECAY)
    other = solve(model, start=(0, 4))
    main = solve(model)
    # disjoint supports
    assert np.all(main.pi0 * other.pi0 == 0)
    assert np.all(main.pi1 * other.pi1 == 0)
    direct = truncated_direct_solve(model, 200, start=(0, 4))
    assert expected_customers_exact(other) == pytest.approx(direct.expected_customers, rel=1e-8)


def test_even_phase_count_start_irrelevant():
    model = VacationModel.four_phase(0.05, 1.0, 0.9, 0.5)
    a = solve(model)
    b = solve(model, start=(0, 4))
    np.testing.assert_allclose(a.pi0, b.pi0, atol=1e-14)


def test_unrestricted_odd_system_is_rank_deficient():
    model = VacationModel(2.0, 100.0, PAPER_DECAY)
    blocks = build_blocks(model)
    rate = solve_rate_matrix(blocks)
    full = np.block([[blocks.b11, blocks.b12], [blocks.b21, blocks.big_a1 + rate.r @ blocks.big_a2]])
    s = np.linalg.svd(full, compute_uv=False)
    assert np.sum(s < 1e-10 * s[0]) == 2


def test_rank_deficiency_detected(monkeypatch):
    import vacation_qbd.qbd as qbd_module

    # Without the class restriction the odd-phase system has two null directions.
    monkeypatch.setattr(qbd_module, "class_mask", lambda m, labels, start: np.ones(len(labels), dtype=bool))
    blocks = build_blocks(VacationModel(2.0, 100.0, PAPER_DECAY))
    with pytest.raises(RankDeficiency):
        solve_boundary(blocks, solve_rate_matrix(blocks))


def test_block_consistency_with_assembled_qbd():
    model = VacationModel(5.0, 100.0, PAPER_DECAY)
    blocks = build_blocks(model)
    n_pairs = 120
    q = assemble_qbd(blocks, n_pairs)
    labels = assembled_labels(blocks, n_pairs)
    keep = np.array([(n + i) % 2 == 1 for n, i in labels])  # class of (0, 3)
    # fold the last pair's upward block back onto itself (a two-level shift keeps parity)
    k = blocks.big_a0.shape[0]
    q[-k:, -k:] += blocks.big_a0
    np.testing.assert_allclose(q.sum(1), 0, atol=1e-12)
    qk = q[np.ix_(keep, keep)]
    a = qk.T.copy()
    a[-1] = 1.0
    rhs = np.zeros(len(a))
    rhs[-1] = 1.0
    p = np.linalg.solve(a, rhs)
    levels = np.array([n for n, _ in labels])[keep]
    assert p @ levels == pytest.approx(expected_customers_exact(solve(model)), rel=1e-9)


def test_stationary_solution_is_immutable(paper_solution):
    with pytest.raises(Exception):
        paper_solution.pi0 = None
