import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from huge_object.core_dist import Distribution  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def bit_distributions(draw, n_min=1, n_max=4, k_max=6, den_max=12):
    """Exact distributions over n-bit strings with small denominators."""
    n = draw(st.integers(n_min, n_max))
    k = draw(st.integers(1, min(k_max, 2**n)))
    xs = draw(st.lists(st.integers(0, 2**n - 1), min_size=k, max_size=k, unique=True))
    ws = draw(st.lists(st.integers(1, den_max), min_size=k, max_size=k))
    total = sum(ws)
    return Distribution({format(x, f"0{n}b"): Fraction(w, total) for x, w in zip(xs, ws)})


@st.composite
def label_distributions(draw, labels, den_max=8):
    ws = draw(st.lists(st.integers(0, den_max), min_size=len(labels), max_size=len(labels)))
    if sum(ws) == 0:
        ws[0] = 1
    total = sum(ws)
    return Distribution({a: Fraction(w, total) for a, w in zip(labels, ws)})


def random_bit_distribution(rng: np.random.Generator, n: int, k: int, den: int = 12) -> Distribution:
    k = min(k, 2**n, den)
    xs = rng.choice(2**n, k, replace=False)
    cuts = sorted(rng.choice(np.arange(1, den), k - 1, replace=False)) if k > 1 else []
    ws = np.diff([0, *cuts, den])
    return Distribution({format(int(x), f"0{n}b"): Fraction(int(w), den) for x, w in zip(xs, ws)})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(LINES):
            terminalreporter.write_line(LINES[k])
