import math
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=400,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

INV_E = math.exp(-1)


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so timing assertions measure steady state."""
    from expstab.certificates import classify
    from expstab.evolution import build_norm_table
    from expstab.zoo import paper_example, random_family

    classify(paper_example(0.1), 100)
    for norm in ("l1", "l2", "linf"):
        build_norm_table(random_family(0, 2, 0.5, norm=norm), 70)
    yield


def brute_log_norm(family, m, n):
    """log ||A_m^n|| from an explicit product, for cross-checks."""
    from expstab.evolution import compose

    P = np.atleast_2d(compose(family, m, n))
    ordv = {"l1": 1, "l2": 2, "linf": np.inf}[family.norm]
    val = np.linalg.norm(P, ord=ordv)
    return math.log(val) if val > 0 else -math.inf


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """``record(criterion, ok, detail)``: log one PASS/FAIL line, shown in the run summary."""
    def record(criterion, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
