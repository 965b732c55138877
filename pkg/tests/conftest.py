import numpy as np
import pytest

from oedcalib.design import Design, Scale
from oedcalib.model import RegressorMode, radiochromic
from oedcalib.solvers import solve_c_optimal, solve_d_optimal, solve_gi_optimal, solve_vi_optimal


@pytest.fixture(scope="session")
def model():
    return radiochromic()


@pytest.fixture(scope="session")
def theta0(model):
    return model.theta()


@pytest.fixture(scope="session")
def d_report(model):
    return solve_d_optimal(model)


@pytest.fixture(scope="session")
def naive_report(model):
    return solve_d_optimal(model, mode=RegressorMode.NAIVE_INVERSE)


@pytest.fixture(scope="session")
def c_reports(model):
    return {name: solve_c_optimal(model, c=np.eye(3)[j]) for j, name in enumerate(model.param_names)}


@pytest.fixture(scope="session")
def gi_report(model):
    return solve_gi_optimal(model)


@pytest.fixture(scope="session")
def vi_report(model):
    return solve_vi_optimal(model)


@pytest.fixture(scope="session")
def practice_design():
    """Doses 0.2, 0.7, ..., 7.7 with equal weights."""
    return Design.uniform(Scale.DOSE, np.arange(0.2, 7.71, 0.5))


# criterion number -> list of (part, passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        ok = all(p for _, p, _ in parts)
        failed = [f"{name} ({detail})" for name, p, detail in parts if not p]
        tail = "" if ok else " - failing: " + "; ".join(failed)
        tr.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}{tail}")
