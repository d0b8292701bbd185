from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from riskshare.dgp import DgpConfig, simulate_panel
from riskshare.panel import PanelDataset

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_LINES: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion checked by the test")


@pytest.fixture
def verdict(request):
    """``verdict(ok, detail)`` records one PASS/FAIL line for the test's criterion."""
    n = request.node.get_closest_marker("criterion").args[0]

    def record(ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        _LINES[n] = line
        print(line)
        return ok

    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m and rep.when == "call" and rep.failed and m.args[0] not in _LINES:
        _LINES[m.args[0]] = f"FAIL criterion {m.args[0]}: {item.name} raised {call.excinfo.typename}"


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(_LINES):
            terminalreporter.write_line(_LINES[n])


# ---------------------------------------------------------------- fixtures

@pytest.fixture(scope="session")
def sim():
    """Default simulated panel with a planted unsmoothed-channel effect."""
    cfg = DgpConfig(seed=7, treatment_effect=(0, 0, 0, -0.2, 0.2))
    actual, truth = simulate_panel(cfg)
    return cfg, actual, truth


@pytest.fixture(scope="session")
def small_sim():
    cfg = DgpConfig(n_treated=3, n_donors=6, seed=11, treatment_effect=(0, 0, 0, -0.2, 0.2))
    actual, truth = simulate_panel(cfg)
    return cfg, actual, truth


def toy_panel(units=("A", "B"), years=(1990, 1991, 1992), seed=0) -> PanelDataset:
    """Positive random national accounts with C + G < DNI + G."""
    rng = np.random.default_rng(seed)
    shape = (len(units), len(years))
    gdp = 100 * np.exp(rng.normal(0, 0.1, shape))
    ni = gdp * np.exp(rng.normal(-0.02, 0.01, shape))
    dni = ni * np.exp(rng.normal(-0.01, 0.01, shape))
    g = 0.2 * dni * np.exp(rng.normal(0, 0.05, shape))
    c = 0.7 * dni * np.exp(rng.normal(0, 0.05, shape))
    return PanelDataset(units, years, {"GDP": gdp, "C": c, "G": g, "NI": ni, "DNI": dni})
