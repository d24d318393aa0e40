import numpy as np
import pytest

from hvdvg.integrator import IntegratorConfig
from hvdvg.model import InoculumSpec, ModelParams, inoculum_state


def rhs_oracle(x, B, beta, delta, iota, alpha, gamma=0.0):
    """Vector field written out directly from the reaction scheme."""
    C, Cv, Cd, Cdv, V, D = x
    eta = B / (1 + beta)
    kappa = 1 + delta / (1 + beta)
    lysis = Cv + Cdv / kappa
    out = np.array([
        -iota * C * (V + D),
        iota * C * V - Cv * (iota * D + alpha),
        iota * (C * D - Cd * V),
        iota * (Cd * V + Cv * D) - alpha * Cdv,
        alpha * eta * lysis - iota * V * (C + Cd),
        alpha * beta * eta * lysis + alpha * delta * eta * Cdv / kappa - iota * D * (C + Cv),
    ])
    return out - gamma * np.asarray(x, dtype=float)


@pytest.fixture
def traj_params():
    # the low/high MOI time-series scenario
    return ModelParams.from_ratio(B=500, beta=1e-6, delta=10, iota_over_alpha=0.1)


@pytest.fixture
def high_moi_state():
    return inoculum_state(InoculumSpec(m=100, qV0=0.75))


@pytest.fixture
def low_moi_state():
    return inoculum_state(InoculumSpec(m=0.01, qV0=0.75))


@pytest.fixture
def coarse_cfg():
    return IntegratorConfig(sample_dt=0.5)


# one line per acceptance criterion, printed after the test session
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
