import numpy as np
import pytest
from hypothesis import strategies as st

from vacation_qbd.model import VacationModel

PAPER_DECAY = (1.0, 0.99, 0.98, 0.1)
A, B, C = 0.99, 0.98, 0.1


@pytest.fixture
def paper_model():
    return VacationModel(2.0, 100.0, PAPER_DECAY)


def transitions(state, m, lam, mus):
    """Outgoing (target, rate) pairs straight from the verbal model description."""
    n, i = state
    if i == m:
        return [((n + 2, 1), lam / 2)]
    out = [((n + 1, i + 1), lam)]
    if n > 0:
        out.append(((n - 1, i + 1), mus[i - 1]))
    return out


@st.composite
def decays(draw, min_phases=3, max_phases=7):
    m = draw(st.integers(min_phases, max_phases))
    raw = draw(st.lists(st.floats(0.02, 0.98), min_size=m - 2, max_size=m - 2, unique=True))
    tail = sorted(raw, reverse=True)
    # keep factors well separated so the decay is strictly decreasing
    if any(x - y < 1e-3 for x, y in zip(tail, tail[1:])):
        tail = list(np.linspace(0.9, 0.1, m - 2))
    return (1.0, *tail)


@st.composite
def stable_models(draw, min_phases=4, max_phases=6, max_load_fraction=0.9):
    from vacation_qbd.stability import critical_load

    decay = draw(decays(min_phases, max_phases))
    mu = draw(st.floats(0.1, 1000.0))
    frac = draw(st.floats(0.02, max_load_fraction))
    return VacationModel(frac * critical_load(decay) * mu, mu, decay)


ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
