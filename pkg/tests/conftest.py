import numpy as np
import pytest
from hypothesis import settings

from qlspb.instances import NON_HERMITIAN, POSITIVE_DEFINITE, ProblemInstance, generate_dense

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")


def identity_instance(n=3):
    """kappa = 1 edge case: A = I, b = e_0."""
    b = np.zeros(n)
    b[0] = 1.0
    return ProblemInstance("id", NON_HERMITIAN, np.eye(n), b, 1.0, 1.0, 0)


@pytest.fixture(scope="session")
def nh20():
    return generate_dense(NON_HERMITIAN, 32, 20.0, 7)


@pytest.fixture(scope="session")
def nh40():
    return generate_dense(NON_HERMITIAN, 16, 40.0, 11)


@pytest.fixture(scope="session")
def pd20():
    return generate_dense(POSITIVE_DEFINITE, 16, 20.0, 3)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
