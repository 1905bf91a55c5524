import sys

import numpy as np
import pytest

from porofrac.constitutive import MaterialParams
from porofrac.flow import FlowParams


@pytest.fixture
def steel():
    """Stiff brittle solid used by the injection scenarios."""
    return MaterialParams(E=210.0e9, nu=0.3, Gc=1.0e-2, l0=4.0e-3)


@pytest.fixture
def soil():
    return MaterialParams(E=0.254e9, nu=0.3, Gc=1.0, l0=0.2)


@pytest.fixture
def soil_flow():
    return FlowParams(c1=0.5, c2=1.0, eps_pR=0.48, alpha_R=0.981, rho_R=1.0e3, rho_F=1.0e3,
                      K_R=3.55e-12, K_F=3.55e-12, c_R=3.33e-10, c_F=3.33e-10,
                      mu_R=1.0e-3, mu_F=1.0e-3)


@pytest.fixture
def injection_flow():
    return FlowParams(c1=0.4, c2=1.0, eps_pR=2.0e-3, alpha_R=2.0e-3, rho_R=1.0e3, rho_F=1.0e3,
                      K_R=1.0e-15, K_F=1.333e-6, c_R=1.0e-8, c_F=1.0e-8,
                      mu_R=1.0e-3, mu_F=1.0e-3, q_F=1.0e4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
