import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from edramcap.calibration import build_abacus  # noqa: E402
from edramcap.converter import ConverterParams  # noqa: E402

_criteria: list[tuple[str, str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    if "acceptance" not in report.keywords:
        return
    label = report.nodeid.split("::")[-1]
    why = ""
    if report.failed:
        crash = getattr(report.longrepr, "reprcrash", None)
        why = crash.message.splitlines()[0] if crash else report.longreprtext.splitlines()[-1]
    _criteria.append((label, report.outcome.upper(), why))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome, why in _criteria:
        line = f"{'PASS' if outcome == 'PASSED' else 'FAIL'}  {label}"
        if why:
            line += f"  ({why[:160]})"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def params():
    return ConverterParams()


@pytest.fixture(scope="session")
def abacus(params):
    return build_abacus(params)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
