from __future__ import annotations

from datetime import datetime, timezone

import numpy as np
import pytest

from rampcast.core import UniformSeries

START = datetime(2017, 1, 1, tzinfo=timezone.utc)

# criterion verdicts collected by test_acceptance, echoed in the terminal summary
VERDICTS: list[str] = []


def series(values, interval: int = 600, start: datetime = START, name: str = "P_tot") -> UniformSeries:
    return UniformSeries(start, interval, np.asarray(values, dtype=float), unit="kW", name=name)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
