import math

import numpy as np
import pytest

from srlasso import ProblemInstance

#: First worked example: the zero solution is unique although A_J is rank deficient.
EX1_A = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]])
EX1_B = np.array([1.0, 2.0])
EX1_LAM = 2.0 / math.sqrt(5.0)

#: Second worked example: intermediate condition holds, strong condition fails.
EX2_A = np.array([[1.0, 0.0, 2.0], [0.0, 2.0, -2.0]])
EX2_B = np.array([1.0, 1.0])
EX2_LAM = math.sqrt(2.0)


@pytest.fixture
def ex1():
    return ProblemInstance(EX1_A, EX1_B, EX1_LAM)


@pytest.fixture
def ex2():
    return ProblemInstance(EX2_A, EX2_B, EX2_LAM)


def gaussian_instance(rng, m, n, s, gamma=0.1):
    """Small compressed-sensing instance drawn with numpy's generator."""
    A = rng.standard_normal((m, n)) / math.sqrt(m)
    x = np.zeros(n)
    x[:s] = m + rng.standard_normal(s) * math.sqrt(m)
    b = A @ x + gamma * rng.standard_normal(m)
    return A, b, x


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
