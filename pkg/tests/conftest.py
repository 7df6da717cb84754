import numpy as np
import pytest

from hivetherm import ExtProfile, HiveParams, ScenarioSpec, generate


def scenario(params=HiveParams(10.0, 4.0, 34.5), days=3, **kw):
    kw.setdefault("ext_profile", ExtProfile(amplitude=10.0))
    regimes = kw.pop("regimes", ((0, params),))
    return ScenarioSpec(num_days=days, regimes=regimes, **kw)


@pytest.fixture
def make():
    """Generate a synthetic dataset; returns (dataset, truth)."""
    def _make(params=HiveParams(10.0, 4.0, 34.5), days=3, **kw):
        return generate(scenario(params, days, **kw))
    return _make


def rel_err(got, want):
    return abs(got - want) / abs(want)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
