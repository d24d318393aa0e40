import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hvdvg.model import (
    InoculumSpec, ModelParams, ParameterError, State, inoculum_state, initial_state, jacobian,
    vector_field,
)
from conftest import rhs_oracle

pos = st.floats(1e-3, 1e2, allow_nan=False)
frac = st.floats(0.0, 1.0)
dens = st.floats(0.0, 10.0)


@st.composite
def params(draw, gamma=True):
    return ModelParams(
        B=draw(st.floats(0.5, 1e3)), beta=draw(frac), delta=draw(st.floats(1.0, 200.0)),
        iota=draw(pos), alpha=draw(pos), gamma=draw(st.floats(0.0, 1.0)) if gamma else 0.0,
    )


states = st.lists(dens, min_size=6, max_size=6).map(np.array)


def test_derived_quantities():
    p = ModelParams(B=3.0, beta=0.5, delta=3.0, iota=1.0, alpha=1.0)
    assert p.eta == 2.0
    assert p.kappa == 3.0


@pytest.mark.parametrize("field,value,msg", [
    ("B", 0.0, "B must be > 0"),
    ("beta", 1.5, "beta must lie in [0, 1]"),
    ("beta", -0.1, "beta must lie in [0, 1]"),
    ("delta", 0.5, "delta must be >= 1"),
    ("iota", -1.0, "iota must be > 0"),
    ("alpha", 0.0, "alpha must be > 0"),
    ("gamma", -1e-3, "gamma must be >= 0"),
    ("B", math.nan, "B must be finite"),
])
def test_validation_names_bound(field, value, msg):
    kw = dict(B=10.0, beta=0.2, delta=2.0, iota=1.0, alpha=1.0)
    kw[field] = value
    with pytest.raises(ParameterError, match=msg.replace("[", r"\[").replace("]", r"\]")):
        ModelParams(**kw)


def test_derived_fields_cannot_be_passed():
    with pytest.raises(TypeError):
        ModelParams(B=1.0, beta=0.0, delta=1.0, iota=1.0, alpha=1.0, eta=2.0)


def test_from_dict_rejects_unknown_and_missing():
    with pytest.raises(ParameterError, match="unknown"):
        ModelParams.from_dict({"B": 2, "beta": 0.1, "delta": 2, "iota": 1, "alpha": 1, "Beta": 0.2})
    with pytest.raises(ParameterError, match="missing"):
        ModelParams.from_dict({"B": 2, "beta": 0.1, "iota": 1, "alpha": 1})


def test_dict_round_trip():
    p = ModelParams.from_ratio(B=10, beta=0.5, delta=20, iota_over_alpha=100, alpha=0.3, gamma_over_alpha=0.01)
    assert ModelParams.from_dict(p.to_dict()) == p
    assert p.iota_over_alpha == pytest.approx(100)


def test_inoculum_state():
    s = inoculum_state(InoculumSpec(m=4.0, qV0=0.25, C0=2.0))
    assert s == State(2.0, 0.0, 0.0, 0.0, 2.0, 6.0)
    assert s.cells == 2.0 and s.particles == 8.0


@pytest.mark.parametrize("kw", [dict(m=0.0, qV0=0.5), dict(m=1.0, qV0=1.1), dict(m=1.0, qV0=0.5, C0=0.0)])
def test_inoculum_validation(kw):
    with pytest.raises(ParameterError):
        InoculumSpec(**kw)


def test_initial_state_rejects_negative():
    with pytest.raises(ParameterError):
        initial_state(-1.0, 0.0)


@settings(max_examples=200, deadline=None)
@given(params(), states)
def test_vector_field_matches_oracle(p, x):
    got = vector_field(x, p)
    want = rhs_oracle(x, p.B, p.beta, p.delta, p.iota, p.alpha, p.gamma)
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12 * (1 + np.abs(want).max()))


@settings(max_examples=100, deadline=None)
@given(params(), states)
def test_jacobian_matches_central_differences(p, x):
    J = jacobian(x, p)
    h = 1e-6
    # cancellation error of the difference quotient scales with |f|/h
    noise = 1e-8 * (1 + np.abs(rhs_oracle(x, **p.to_dict())).max())
    for j in range(6):
        e = np.zeros(6)
        e[j] = h
        col = (rhs_oracle(x + e, **p.to_dict()) - rhs_oracle(x - e, **p.to_dict())) / (2 * h)
        # the field is quadratic, so central differences are exact up to rounding
        np.testing.assert_allclose(J[:, j], col, rtol=1e-6, atol=noise + 1e-6 * np.abs(col).max())


@settings(max_examples=100, deadline=None)
@given(params(gamma=False), states)
def test_cell_total_decays_through_lysis_only(p, x):
    f = vector_field(x, p)
    # infection terms cancel in the sum; allow rounding relative to their size
    size = p.iota * x.sum() ** 2 + p.alpha * x.sum()
    assert f[:4].sum() == pytest.approx(-p.alpha * (x[1] + x[3]), rel=1e-12, abs=1e-14 * size + 1e-300)


@settings(max_examples=100, deadline=None)
@given(params(gamma=False), states)
def test_particle_balance(p, x):
    # every lysing cell releases B particles in total; every infection consumes one
    f = vector_field(x, p)
    C, Cv, Cd, Cdv, V, D = x
    released = p.alpha * p.B * (Cv + Cdv * (1 + p.beta + p.delta) / ((1 + p.beta) * p.kappa))
    consumed = p.iota * (V * (C + Cd) + D * (C + Cv))
    assert f[4] + f[5] == pytest.approx(released - consumed, rel=1e-10, abs=1e-13 * (released + consumed) + 1e-300)


def test_every_plane_point_is_stationary():
    p = ModelParams.from_ratio(B=10, beta=0.5, delta=20, iota_over_alpha=100)
    for x in ([0, 0, 0, 0, 3.0, 2.0], [0, 0, 0.7, 0, 0, 1.3], [0.4, 0, 0.6, 0, 0, 0]):
        assert np.all(vector_field(x, p) == 0.0)
