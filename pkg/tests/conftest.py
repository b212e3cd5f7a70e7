import numpy as np
import pytest
from hypothesis import strategies as st

from insurelab.dist import Pmf

ACCEPTANCE_LINES: list[str] = []


@st.composite
def finite_pmfs(draw, max_symbol=39, max_size=20):
    """Finite pmfs with strictly positive masses on a random support."""
    support = draw(st.lists(st.integers(0, max_symbol), min_size=1, max_size=max_size, unique=True))
    weights = draw(st.lists(st.floats(0.01, 1.0), min_size=len(support), max_size=len(support)))
    w = np.asarray(weights)
    order = np.argsort(support)
    return Pmf.finite(np.asarray(support)[order], (w / w.sum())[order])


@st.composite
def loss_paths(draw, max_len=30, max_loss=12):
    return draw(st.lists(st.integers(0, max_loss), min_size=0, max_size=max_len))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
