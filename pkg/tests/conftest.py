import mpmath
import numpy as np
import pytest
from hypothesis import strategies as st

from mmph.jointmodel import JointModel
from mmph.phasetype import PhRep


def random_subgenerator(rng, p, density=0.7, exit_low=0.1):
    t = rng.uniform(0.0, 1.0, (p, p)) * (rng.uniform(size=(p, p)) < density)
    np.fill_diagonal(t, 0.0)
    exit = rng.uniform(exit_low, 1.0, p)
    np.fill_diagonal(t, -(t.sum(axis=1) + exit))
    return t


def random_joint_model(rng, p=None, k=None):
    p = p or int(rng.integers(1, 7))
    k = k or int(rng.integers(1, p + 1))
    t = random_subgenerator(rng, p)
    alpha = np.zeros(p)
    alpha[:k] = rng.dirichlet(np.ones(k))
    return JointModel(PhRep(alpha, t), k)


def taylor_oracle(m, terms=60):
    """exp(m) as a 60-term power series in 40-digit arithmetic."""
    with mpmath.workdps(40):
        a = mpmath.matrix(m.tolist())
        term = mpmath.eye(m.shape[0])
        total = term.copy()
        for k in range(1, terms):
            term = term * a / k
            total += term
        return np.array(total.tolist(), dtype=float)


@st.composite
def joint_models(draw, max_p=5):
    seed = draw(st.integers(0, 2**32 - 1))
    p = draw(st.integers(1, max_p))
    k = draw(st.integers(1, p))
    return random_joint_model(np.random.default_rng(seed), p, k)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def dependent_model():
    """Four states, counts 1 or 2, long claims tend to come with two counts."""
    t = np.array([
        [-1.5, 0.0, 0.5, 0.0],
        [0.0, -1.5, 0.0, 1.0],
        [0.0, 0.5, -0.7, 0.0],
        [0.0, 0.0, 0.0, -0.3],
    ])
    return JointModel.from_arrays([1.0, 0.0, 0.0, 0.0], t, 2)


# one summary line per acceptance criterion
_criteria = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        name = report.nodeid.split("::")[-1]
        _criteria[name] = (report.outcome, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name in sorted(_criteria):
        outcome, secs = _criteria[name]
        label = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[outcome]
        number = int(name.split("_")[2])
        terminalreporter.write_line(f"criterion {number:2d} {label}  {name}  ({secs:.1f} s)")
