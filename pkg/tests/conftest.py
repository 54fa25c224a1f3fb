import contextlib
import math

import pytest

from nhcollapse.collapse import MeasurementSetup, calibrate_orientation_map

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@contextlib.contextmanager
def _record(label: str, detail: dict):
    try:
        yield detail
    except BaseException:
        _ACCEPTANCE.append((label, False, _fmt(detail)))
        raise
    _ACCEPTANCE.append((label, True, _fmt(detail)))


def _fmt(detail: dict) -> str:
    parts = []
    for k, v in detail.items():
        parts.append(f"{k}={v:.6g}" if isinstance(v, float) and math.isfinite(v) else f"{k}={v}")
    return ", ".join(parts)


@pytest.fixture
def criterion():
    """``with criterion("3: EP structure") as d: ...`` records pass/fail plus ``d``."""

    def make(label):
        return _record(label, {})

    return make


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  [{detail}]")


@pytest.fixture(scope="session")
def default_setup():
    return MeasurementSetup()


@pytest.fixture(scope="session")
def default_calibration(default_setup):
    return calibrate_orientation_map(default_setup)
