import numpy as np
import pytest

from hvdvg.integrator import IntegratorConfig, integrate
from hvdvg.model import ModelParams, ParameterError, initial_state
from hvdvg.sensitivity import (
    SUBJECTS, fd_check, fd_ic_matrix, fd_param, sensitivity_to_csv_text, variational_wrt_ic,
    variational_wrt_param,
)


@pytest.fixture(scope="module")
def scenario():
    p = ModelParams.from_ratio(B=500, beta=1e-6, delta=10, iota_over_alpha=0.1)
    x0 = initial_state(75.0, 25.0)
    t_C = integrate(x0, p).extinction.t_C
    return x0, p, t_C


@pytest.mark.parametrize("param", SUBJECTS)
def test_parameter_sensitivity_starts_at_zero(scenario, param):
    x0, p, _ = scenario
    st = variational_wrt_param(x0, p, param, IntegratorConfig(t_max=1.0))
    np.testing.assert_array_equal(st.sens[0], np.zeros(6))


def test_ic_sensitivity_starts_at_identity(scenario):
    x0, p, _ = scenario
    st = variational_wrt_ic(x0, p, IntegratorConfig(t_max=1.0))
    np.testing.assert_array_equal(st.sens[0], np.eye(6))


def test_beta_matches_central_difference(scenario):
    x0, p, t_C = scenario
    a = variational_wrt_param(x0, p, "beta", t_eval=[t_C]).at(t_C)
    fd = fd_param(x0, p, "beta", IntegratorConfig(), t_C, 1e-8)
    assert np.max(np.abs(fd - a)) <= 1e-5 * np.max(np.abs(a))


def test_ic_matrix_matches_central_difference(scenario):
    x0, p, t_C = scenario
    a = variational_wrt_ic(x0, p, t_eval=[t_C]).at(t_C)
    fd = fd_ic_matrix(x0, p, IntegratorConfig(), t_C, 1e-6)
    assert np.max(np.abs(fd - a)) <= 1e-5 * np.max(np.abs(a))


@pytest.mark.parametrize("param", ["B", "delta", "iota", "alpha", "iota_over_alpha"])
def test_other_parameters_match_central_difference(param):
    p = ModelParams.from_ratio(B=20, beta=0.1, delta=2, iota_over_alpha=5)
    x0 = initial_state(0.3, 0.2)
    a = variational_wrt_param(x0, p, param, t_eval=[1.5]).at(1.5)
    fd = fd_param(x0, p, param, IntegratorConfig(), 1.5, 1e-6)
    assert np.max(np.abs(fd - a)) <= 1e-6 * max(1.0, np.max(np.abs(a)))


def test_gamma_matches_central_difference():
    p = ModelParams(B=20, beta=0.1, delta=2, iota=5, alpha=1, gamma=0.05)
    x0 = initial_state(0.3, 0.2)
    a = variational_wrt_param(x0, p, "gamma", t_eval=[1.5]).at(1.5)
    fd = fd_param(x0, p, "gamma", IntegratorConfig(), 1.5, 1e-6)
    assert np.max(np.abs(fd - a)) <= 1e-6 * max(1.0, np.max(np.abs(a)))


def test_beta_sign_properties_on_scenario(scenario):
    x0, p, _ = scenario
    st = variational_wrt_param(x0, p, "beta", IntegratorConfig(sample_dt=0.01))
    assert np.all(st.component("V") <= 0)
    assert np.all(st.component("D") >= 0)


def test_D_more_sensitive_to_cells_than_V(scenario):
    x0, p, _ = scenario
    st = variational_wrt_ic(x0, p, IntegratorConfig(sample_dt=0.01))
    assert np.max(np.abs(st.sens[:, 5, 0])) > np.max(np.abs(st.sens[:, 4, 0]))


# beta sits at 1e-6, so central steps are taken in B instead
@pytest.mark.parametrize("param,central,steps,lo,hi", [
    ("beta", False, (1e-4, 1e-5, 1e-6), 0.8, 1.2),
    ("B", True, (40.0, 20.0, 10.0), 1.8, 2.2),
])
def test_fd_order(scenario, param, central, steps, lo, hi):
    x0, p, t_C = scenario
    rep = fd_check(param, x0, p, t=t_C, steps=steps, central=central)
    assert rep.passed
    assert all(lo <= o <= hi for o in rep.orders)
    assert len(rep.table()) == 3


def test_zero_influence_parameter():
    # with beta = 0 and no DVG inoculum, no DVGs ever exist and delta is inert
    p = ModelParams.from_ratio(B=20, beta=0.0, delta=2, iota_over_alpha=5)
    x0 = initial_state(0.5, 0.0)
    rep = fd_check("delta", x0, p, t=2.0)
    assert rep.passed
    assert np.all(variational_wrt_param(x0, p, "delta", t_eval=[2.0]).at(2.0) == 0.0)


def test_ic_fd_check_and_bad_index(scenario):
    x0, p, t_C = scenario
    assert fd_check(4, x0, p, t=t_C).passed
    with pytest.raises(ParameterError):
        fd_check(6, x0, p, t=t_C)


def test_cell_total_sensitivity_obeys_lysis_balance():
    # d/dt dCT/d(iota) = -alpha * d(Cv + Cdv)/d(iota); compare against trapezoidal quadrature
    p = ModelParams.from_ratio(B=20, beta=0.1, delta=2, iota_over_alpha=5)
    st = variational_wrt_param(initial_state(0.3, 0.2), p, "iota", IntegratorConfig(sample_dt=1e-3, t_max=2.0))
    s = st.sens
    lhs = s[:, :4].sum(axis=1)
    rate = -p.alpha * (s[:, 1] + s[:, 3])
    rhs = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * np.diff(st.t))])
    np.testing.assert_allclose(lhs, rhs, atol=1e-5 * np.max(np.abs(lhs)))


def test_unknown_parameter():
    with pytest.raises(ParameterError):
        variational_wrt_param(initial_state(0.1, 0.1), ModelParams(B=5, beta=0, delta=1, iota=1, alpha=1), "kappa")


def test_at_requires_sample_time(scenario):
    x0, p, _ = scenario
    st = variational_wrt_param(x0, p, "B", IntegratorConfig(t_max=0.5, sample_dt=0.25))
    with pytest.raises(ParameterError):
        st.at(0.3)


def test_csv_layout(scenario):
    x0, p, _ = scenario
    cfg = IntegratorConfig(t_max=0.2, sample_dt=0.1)
    par = sensitivity_to_csv_text(variational_wrt_param(x0, p, "B", cfg)).splitlines()
    assert par[0] == "t,dC,dCv,dCd,dCdv,dV,dD"
    ic = sensitivity_to_csv_text(variational_wrt_ic(x0, p, cfg)).splitlines()
    assert len(ic[0].split(",")) == 37 and ic[0].split(",")[2] == "dC_dCv0"


def test_repeat_is_bitwise_identical(scenario):
    x0, p, _ = scenario
    a = variational_wrt_ic(x0, p, IntegratorConfig(sample_dt=0.1)).sens
    b = variational_wrt_ic(x0, p, IntegratorConfig(sample_dt=0.1)).sens
    np.testing.assert_array_equal(a, b)
