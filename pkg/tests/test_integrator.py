import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from hvdvg.integrator import (
    IntegrationError, IntegratorConfig, PlaneClass, classify_omega_limit, classify_state, integrate,
    min_distance_to_plane, output_times,
)
from hvdvg.model import InoculumSpec, ModelParams, ParameterError, inoculum_state, initial_state
from conftest import rhs_oracle


def reference_solution(x0, p, t_end):
    sol = solve_ivp(lambda t, x: rhs_oracle(x, **p.to_dict()), (0, t_end), np.asarray(x0, float),
                    method="DOP853", rtol=1e-13, atol=1e-15)
    return sol.y[:, -1]


@pytest.mark.parametrize("m,q", [(0.01, 0.75), (1.0, 0.5), (100.0, 0.75)])
def test_matches_independent_solver_before_extinction(traj_params, m, q):
    x0 = inoculum_state(InoculumSpec(m=m, qV0=q))
    tr = integrate(x0, traj_params, IntegratorConfig(sample_dt=None), t_eval=[0.5])
    i = int(np.flatnonzero(tr.t == 0.5)[0])
    ref = reference_solution(x0, traj_params, 0.5)
    np.testing.assert_allclose(tr.states[i], ref, rtol=1e-9, atol=1e-12)


def test_error_shrinks_with_tolerance(traj_params, high_moi_state):
    ref = reference_solution(high_moi_state, traj_params, 0.8)
    errs = []
    for tol in (1e-5, 1e-8, 1e-11):
        cfg = IntegratorConfig(rel_tol=tol, abs_tol=tol * 1e-2, sample_dt=None)
        tr = integrate(high_moi_state, traj_params, cfg, t_eval=[0.8])
        i = int(np.flatnonzero(tr.t == 0.8)[0])
        errs.append(np.max(np.abs(tr.states[i] - ref) / (1 + np.abs(ref))))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-9


def test_samples_land_on_grid_exactly(traj_params, low_moi_state):
    cfg = IntegratorConfig(sample_dt=0.25, t_max=5.0)
    tr = integrate(low_moi_state, traj_params, cfg, t_eval=[1.0 / 3.0])
    assert tr.t[0] == 0.0
    assert 1.0 / 3.0 in tr.t
    assert np.all(np.diff(tr.t) > 0)
    np.testing.assert_array_equal(tr.states[0], np.asarray(low_moi_state))


def test_output_times_union():
    cfg = IntegratorConfig(sample_dt=1.0, t_max=3.0)
    np.testing.assert_array_equal(output_times(cfg, [0.5, 2.0]), [0.5, 1.0, 2.0, 3.0])
    with pytest.raises(ParameterError):
        output_times(cfg, [4.0])


@pytest.mark.parametrize("fixture", ["low_moi_state", "high_moi_state"])
def test_extinction_order_and_terminal_plane(traj_params, fixture, request):
    tr = integrate(request.getfixturevalue(fixture), traj_params)
    assert tr.terminated_by == "equilibrium"
    assert tr.extinction.ordered() is True
    assert classify_omega_limit(tr) is PlaneClass.VD
    s = tr.terminal_state
    assert (s.C, s.Cv, s.Cd, s.Cdv) == (0.0, 0.0, 0.0, 0.0)


def test_clamped_compartments_stay_zero(traj_params, high_moi_state):
    tr = integrate(high_moi_state, traj_params, IntegratorConfig(sample_dt=0.1))
    tC = tr.extinction.t_C
    after = tr.t > tC + 0.1
    assert np.all(tr.states[after, 0] == 0.0)


def test_initial_equilibrium_returns_immediately(traj_params):
    tr = integrate([0, 0, 0, 0, 5.0, 1.0], traj_params)
    assert tr.terminated_by == "equilibrium"
    assert tr.terminal_time == 0.0
    assert tr.t.shape == (1,)


def test_zero_initial_compartments_are_not_reported_extinct(traj_params, low_moi_state):
    # Cv, Cd and Cdv start at exactly zero; their extinction times come from the run
    tr = integrate(low_moi_state, traj_params)
    assert tr.extinction.t_V > tr.extinction.t_C > 0


def test_step_budget_failure_carries_last_state(traj_params, high_moi_state):
    with pytest.raises(IntegrationError) as ei:
        integrate(high_moi_state, traj_params, IntegratorConfig(max_steps=3))
    assert ei.value.t > 0
    assert len(ei.value.state) == 6


def test_horizon_is_reported(traj_params, high_moi_state):
    tr = integrate(high_moi_state, traj_params, IntegratorConfig(t_max=0.2, sample_dt=None))
    assert tr.terminated_by == "horizon"
    assert tr.terminal_time == 0.2
    assert classify_omega_limit(tr) is PlaneClass.UNDETERMINED


def test_time_rescaling_invariance():
    # doubling every rate doubles the speed of the orbit; step sequences differ, hence rtol
    x0 = initial_state(0.3, 0.2)
    p1 = ModelParams(B=10, beta=0.5, delta=20, iota=2.0, alpha=0.5, gamma=0.01)
    p2 = ModelParams(B=10, beta=0.5, delta=20, iota=4.0, alpha=1.0, gamma=0.02)
    cfg = IntegratorConfig(sample_dt=None, t_max=20.0)
    a = integrate(x0, p1, cfg, t_eval=[6.0])
    b = integrate(x0, p2, cfg.replace(t_max=10.0), t_eval=[3.0])
    xa = a.states[np.flatnonzero(a.t == 6.0)[0]]
    xb = b.states[np.flatnonzero(b.t == 3.0)[0]]
    np.testing.assert_allclose(xa, xb, rtol=1e-7, atol=1e-12)


def test_deterministic_repeat(traj_params, high_moi_state):
    a = integrate(high_moi_state, traj_params)
    b = integrate(high_moi_state, traj_params)
    np.testing.assert_array_equal(a.states, b.states)
    np.testing.assert_array_equal(a.t, b.t)


@pytest.mark.parametrize("x,cls", [
    ([0, 0, 0, 0, 0, 0], PlaneClass.ORIGIN),
    ([0, 0, 0, 0, 1, 1], PlaneClass.VD),
    ([0, 0, 0, 0, 0, 1], PlaneClass.VD),
    ([0, 0, 1, 0, 0, 1], PlaneClass.CDD),
    ([0, 0, 1, 0, 0, 0], PlaneClass.CDD),
    ([1, 0, 1, 0, 0, 0], PlaneClass.CCD),
    ([1, 0, 0, 0, 0, 0], PlaneClass.CCD),
    ([1, 1e-3, 0, 0, 0, 0], PlaneClass.UNDETERMINED),
    ([0, 0, 0, 0, 1, 1e-11], PlaneClass.VD),
])
def test_classify_state(x, cls):
    assert classify_state(x, 1e-10) is cls


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.05, 0.95))
def test_cell_total_never_increases(m, q):
    p = ModelParams.from_ratio(B=100, beta=0.01, delta=1.2, iota_over_alpha=10)
    tr = integrate(inoculum_state(InoculumSpec(m=m, qV0=q)), p, IntegratorConfig(sample_dt=0.5))
    cells = tr.states[:, :4].sum(axis=1)
    assert np.all(np.diff(cells) <= 1e-12)


def test_config_round_trip_and_strictness():
    cfg = IntegratorConfig(rel_tol=1e-10, sample_dt=None)
    assert IntegratorConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ParameterError):
        IntegratorConfig.from_dict({"rtol": 1e-8})
    with pytest.raises(ParameterError):
        IntegratorConfig(rel_tol=-1.0)


def test_min_distance_to_plane_decreases_toward_terminal(traj_params, high_moi_state):
    tr = integrate(high_moi_state, traj_params)
    d, t = min_distance_to_plane(tr, PlaneClass.VD)
    assert d == 0.0
    assert t >= tr.extinction.t_DV
