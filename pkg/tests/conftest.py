import math

import numpy as np
import pytest

from bianchi import InitialData, ReducedState

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def report_criterion():
    def record(number: int, title: str, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail}")
    return record


def de_sitter(lam: float = 3.0) -> InitialData:
    h = math.sqrt(lam / 3.0)
    return InitialData.from_reduced(ReducedState(h, h, 0.0, 0.0, 0.0), lam)


def radiation(w0: float = 1.0, a0: float = 1.0) -> InitialData:
    return InitialData.from_reduced(ReducedState(w0, w0, 3.0 * w0 ** 2 / (8.0 * math.pi), 0.0, 0.0),
                                    0.0, a0=a0, b0=a0)


def zero_state() -> InitialData:
    return InitialData(1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
