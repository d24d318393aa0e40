import numpy as np
import pytest
from scipy.integrate import solve_ivp

from hvdvg.estimates import (
    NotApplicableError, analytic_high_moi, estimate_rates, final_state_identity, final_sum_bounds,
)
from hvdvg.integrator import integrate
from hvdvg.model import InoculumSpec, ModelParams, inoculum_state, initial_state
from conftest import rhs_oracle

CASE_I = ModelParams(B=100, beta=0.01, delta=1.2, iota=5.0, alpha=0.5)


@pytest.fixture(scope="module")
def run():
    x0 = inoculum_state(InoculumSpec(m=0.5, qV0=0.6))
    return x0, integrate(x0, CASE_I)


def test_lysis_integrals_match_independent_quadrature(run):
    x0, tr = run
    # augment the oracle RHS with the two lysis integrals
    def f(t, y):
        return np.concatenate([rhs_oracle(y[:6], **CASE_I.to_dict()), CASE_I.alpha * y[[1, 3]]])
    sol = solve_ivp(f, (0, tr.terminal_time), np.concatenate([x0, [0, 0]]), method="DOP853",
                    rtol=1e-12, atol=1e-14)
    iv, idv = sol.y[6:, -1]
    assert tr.iv_accum == pytest.approx(iv, rel=1e-7)
    assert tr.idv_accum == pytest.approx(idv, rel=1e-7)


def test_every_cell_lyses_once(run):
    _, tr = run
    assert tr.iv_accum + tr.idv_accum == pytest.approx(tr.C0, rel=1e-8)


def test_rates_are_recovered(run):
    _, tr = run
    rep = estimate_rates(tr)
    assert rep.alpha_hat == pytest.approx(CASE_I.alpha, rel=1e-7)
    assert rep.iota_hat == pytest.approx(CASE_I.iota, rel=1e-7)
    assert rep.efficiency == pytest.approx(CASE_I.iota / CASE_I.alpha, rel=1e-7)
    assert rep.vf_df_identity_residual < 1e-6 * rep.next_passage_moi
    assert rep.approximate is False


def test_final_state_identities_and_bounds(run):
    _, tr = run
    chk = final_state_identity(tr)
    scale = chk.vf_plus_df
    assert chk.residual_iv < 1e-6 * scale
    assert chk.residual_idv < 1e-6 * scale
    assert chk.within_bounds
    assert chk.bounds == final_sum_bounds(CASE_I.B, 0.5)


def test_bounds_are_unit_width():
    lo, hi = final_sum_bounds(10.0, 2.0, 3.0)
    assert (lo, hi) == (30.0, 33.0)


def test_degradation_needs_opt_in():
    p = CASE_I.replace(gamma=0.01)
    tr = integrate(initial_state(0.3, 0.2), p)
    with pytest.raises(NotApplicableError):
        estimate_rates(tr)
    with pytest.warns(UserWarning):
        rep = estimate_rates(tr, approximate=True)
    assert rep.approximate is True
    with pytest.raises(NotApplicableError):
        final_state_identity(tr)


def test_final_identity_refuses_other_cases():
    p = ModelParams.from_ratio(B=2.0, beta=0.2, delta=2.0, iota_over_alpha=10.0)
    tr = integrate(initial_state(0.5, 0.5), p)
    with pytest.raises(NotApplicableError):
        final_state_identity(tr)


def test_high_moi_pure_helper():
    p = ModelParams.from_ratio(B=500, beta=1e-6, delta=10, iota_over_alpha=0.1)
    vf, df = analytic_high_moi(p, V0=100.0, D0=0.0)
    assert vf + df == pytest.approx(599.0, abs=1e-3)
    assert df == pytest.approx(p.beta * p.eta)


def test_high_moi_mixed_matches_closed_form():
    p = ModelParams.from_ratio(B=50, beta=0.1, delta=5, iota_over_alpha=1.0)
    vf, df = analytic_high_moi(p, V0=20.0, D0=0.4)
    eta, kappa = 50 / 1.1, 1 + 5 / 1.1
    assert vf == pytest.approx(eta * 0.6 + eta / kappa * 0.4 + 19.0)
    assert df == pytest.approx(0.1 * eta * 0.6 + eta / kappa * 5.1 * 0.4)


@pytest.mark.parametrize("V0,D0", [(0.5, 0.0), (2.0, 1.5), (0.5, 0.2)])
def test_high_moi_outside_hypotheses(V0, D0):
    p = ModelParams.from_ratio(B=500, beta=1e-6, delta=10, iota_over_alpha=0.1)
    with pytest.raises(NotApplicableError):
        analytic_high_moi(p, V0, D0)


def test_high_moi_needs_case_one():
    with pytest.raises(NotApplicableError):
        analytic_high_moi(ModelParams.from_ratio(B=2, beta=0.2, delta=2, iota_over_alpha=1), 5.0, 0.0)
