import math

import numpy as np
import pytest
from hypothesis import strategies as st


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def within_sigmas(count, n, p, k=5.0):
    """Binomial count consistent with probability p at k standard deviations."""
    sigma = math.sqrt(n * p * (1 - p))
    return abs(count - n * p) <= k * sigma


finite = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)


@st.composite
def amplitude_pairs(draw):
    """Non-degenerate complex (a, b)."""
    a = complex(draw(finite), draw(finite))
    b = complex(draw(finite), draw(finite))
    if abs(a) ** 2 + abs(b) ** 2 < 1e-6:
        a = 1.0
    return a, b


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
