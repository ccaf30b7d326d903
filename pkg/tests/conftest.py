import numpy as np
import pandas as pd
import pytest

from gridprice.synthetic import synthetic_hourly


@pytest.fixture(scope="session")
def two_year_frame():
    return synthetic_hourly("CAISO", days=730, seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def hourly_index(start, hours, tz="UTC"):
    return pd.date_range(pd.Timestamp(start, tz=tz), periods=hours, freq="h")


_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""
    def record(number, passed, detail=""):
        verdict = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
        line = f"criterion {number}: {verdict}  {detail}".rstrip()
        _ACCEPTANCE[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number])
