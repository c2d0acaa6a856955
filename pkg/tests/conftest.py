import numpy as np
import pytest
from hypothesis import strategies as st
from scipy.stats import unitary_group

from qgchern.scatter import ScatterParams, build_s0, random_params


def haar_unitary(n, seed):
    return unitary_group.rvs(n, random_state=np.random.default_rng(seed))


seeds = st.integers(min_value=0, max_value=2**32 - 1)
angles = st.floats(min_value=0.0, max_value=2 * np.pi, allow_nan=False)


@st.composite
def scatter_params(draw, real=False):
    seed = draw(seeds)
    return random_params(np.random.default_rng(seed), real=real)


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


def s0_draws(n, seed, real=False):
    rng = np.random.default_rng(seed)
    return [build_s0(random_params(rng, real=real)) for _ in range(n)]


def fig_params(**changes):
    base = ScatterParams(theta1=np.pi / 4, theta2=np.pi / 3, eta1=np.pi / 2, eta2=np.pi / 6)
    return base.with_(**changes)


ACCEPTANCE_LINES: list = []


def report(label, ok, detail):
    line = f"{label}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
