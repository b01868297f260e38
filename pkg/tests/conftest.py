import pytest

from quantwave.kernels import JumpKernel, ModelParams, RateCurve


@pytest.fixture
def exp_k1():
    return ModelParams(1.0, JumpKernel.exponential(1.0), RateCurve.power(1))


def exponential_power(K, mu=1.0):
    return ModelParams(mu, JumpKernel.exponential(1.0), RateCurve.power(K))


# (criterion number, result line) collected by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
