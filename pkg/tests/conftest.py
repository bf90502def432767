from __future__ import annotations

import numpy as np
import pytest

from tsm_hysteresis.model import HysteresisParams
from tsm_hysteresis.plant import default_true_map

# device-scale single parameter set used across tests
DEVICE = HysteresisParams(28.0, -28.0, 9.0, 8.5, -4.0, 4.0, 1.32)
SYMMETRIC = HysteresisParams(12.0, -12.0, 6.0, 6.0, -3.0, 3.0, 1.32)


@pytest.fixture
def device_params() -> HysteresisParams:
    return DEVICE


@pytest.fixture
def symmetric_params() -> HysteresisParams:
    return SYMMETRIC


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def true_map():
    return default_true_map()



ACCEPTANCE_COUNT = 9


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    from helpers import VERDICTS

    ran = any("test_acceptance" in str(getattr(r, "nodeid", ""))
              for reports in terminalreporter.stats.values() for r in reports)
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, ACCEPTANCE_COUNT + 1):
        if n in VERDICTS:
            title, ok, detail = VERDICTS[n]
            terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'}: {title}: {detail}")
        else:
            terminalreporter.write_line(f"criterion {n} FAIL: not reached (test errored or was skipped)")
