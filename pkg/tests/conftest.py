import numpy as np
import pytest

from dbnabs import SafeSet, build_linear_gaussian, bidiagonal


@pytest.fixture
def scalar_model():
    return build_linear_gaussian([[0.8]], [0.2])


@pytest.fixture
def unit_interval():
    return SafeSet([-1.0], [1.0])


@pytest.fixture
def planar_model():
    return build_linear_gaussian([[0.8, 0.0], [0.5, 0.8]], [0.2, 0.2])


@pytest.fixture
def unit_square():
    return SafeSet([-1.0, -1.0], [1.0, 1.0])


@pytest.fixture
def chain3():
    phi = 0.8 * np.eye(3) + 0.5 * np.eye(3, k=-1)
    return build_linear_gaussian(phi, [0.3, 0.3, 0.3])


@pytest.fixture
def cube3():
    return SafeSet([-1.0] * 3, [1.0] * 3)


@pytest.fixture
def chain4():
    return build_linear_gaussian(bidiagonal(4), [0.2] * 4)


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    """Record one pass/fail line for an acceptance criterion."""

    def log(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE_LINES.append((number, line))
        return passed

    return log


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_LINES, key=lambda item: item[0]):
        terminalreporter.write_line(line)
