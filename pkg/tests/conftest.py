import numpy as np
import pytest

from markov_monitor.chain import absorbing_chain, five_state_chain

# (criterion, passed, detail) lines collected by test_acceptance
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda r: r[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}")


@pytest.fixture
def five():
    return five_state_chain()


@pytest.fixture
def absorbing():
    return absorbing_chain()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
