import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from rwcre.environment import finite_law

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@st.composite
def finite_laws(draw, min_atoms=2, max_atoms=4, lo=0.05, hi=0.95):
    n = draw(st.integers(min_atoms, max_atoms))
    omegas = draw(st.lists(st.floats(lo, hi), min_size=n, max_size=n, unique=True))
    weights = draw(st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n))
    total = sum(weights)
    w = [x / total for x in weights]
    w[-1] = 1.0 - sum(w[:-1])
    return finite_law(list(zip(omegas, w)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, 13):
        terminalreporter.write_line(mod.LINES.get(k, f"criterion {k:2d}: FAIL  (not reached or errored)"))
