"""Lysis-integral identities, rate estimators and final-state estimates.

The identities here hold for the degradation-free model once every cell
compartment is extinct. They are evaluated from the quadrature states the
integrator carries, never from the sample grid.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

from .equilibria import stability_case
from .integrator import PlaneClass, Trajectory, classify_omega_limit
from .model import ModelParams, ParameterError


class NotApplicableError(ParameterError):
    """The trajectory or parameters do not satisfy an identity's hypotheses."""


@dataclass(frozen=True)
class EstimateReport:
    alpha_hat: float
    iota_hat: float
    efficiency: float
    iv: float
    idv: float
    vf_df_identity_residual: float
    bounds: tuple[float, float]
    next_passage_moi: float
    approximate: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bounds"] = list(self.bounds)
        return d


def _require_gamma_free(traj: Trajectory, approximate: bool) -> None:
    if traj.params.gamma > 0:
        if not approximate:
            raise NotApplicableError(
                "the identities assume gamma = 0; pass approximate=True to evaluate them anyway")
        warnings.warn("evaluating degradation-free identities on a gamma > 0 trajectory",
                      stacklevel=3)


def lysis_integrals(traj: Trajectory) -> tuple[float, float]:
    """``(I_V, I_DV)``: lysis-weighted integrals of ``Cv`` and ``Cdv``."""
    return traj.iv_accum, traj.idv_accum


def final_sum_bounds(B: float, m: float, C0: float = 1.0) -> tuple[float, float]:
    """Interval that ``V_f + D_f`` must fall in."""
    return (B + m - 2.0) * C0, (B + m - 1.0) * C0


def estimate_rates(traj: Trajectory, C0: float | None = None, *, approximate: bool = False) -> EstimateReport:
    """Recover alpha, iota and iota/alpha from a finished orbit."""
    _require_gamma_free(traj, approximate)
    if traj.extinction.t_DV is None:
        raise NotApplicableError("the double-infected compartment never went extinct (no t_DV)")
    C0 = traj.C0 if C0 is None else float(C0)
    int_lysing = traj.int_cv + traj.int_cdv
    alpha_hat = C0 / int_lysing
    iota_hat = C0 / traj.int_cvd
    iv, idv = lysis_integrals(traj)
    x0 = traj.states[0]
    m = (x0[4] + x0[5]) / C0
    s = traj.terminal_state.V + traj.terminal_state.D
    resid = abs(s - ((m - 2.0 + traj.params.B) * C0 + iv))
    return EstimateReport(
        alpha_hat=alpha_hat,
        iota_hat=iota_hat,
        efficiency=int_lysing / traj.int_cvd,
        iv=iv,
        idv=idv,
        vf_df_identity_residual=resid,
        bounds=final_sum_bounds(traj.params.B, m, C0),
        next_passage_moi=s / C0,
        approximate=traj.params.gamma > 0,
    )


@dataclass(frozen=True)
class FinalStateCheck:
    vf_plus_df: float
    residual_iv: float        # |Vf+Df - ((m-2+B) C0 + I_V)|
    residual_idv: float       # |Vf+Df - ((m-1+B) C0 - I_DV)|
    bounds: tuple[float, float]
    within_bounds: bool
    next_passage_moi: float


def final_state_identity(traj: Trajectory, p: ModelParams | None = None, m: float | None = None,
                         C0: float | None = None) -> FinalStateCheck:
    p = traj.params if p is None else p
    if p.gamma > 0:
        raise NotApplicableError("final-state identities need gamma = 0")
    if stability_case(p).case_id != "I":
        raise NotApplicableError("final-state identities need B > 1 + beta + delta")
    if classify_omega_limit(traj) is not PlaneClass.VD:
        raise NotApplicableError("trajectory did not settle on the V-D plane")
    C0 = traj.C0 if C0 is None else float(C0)
    if m is None:
        m = (traj.states[0, 4] + traj.states[0, 5]) / C0
    s = traj.terminal_state.V + traj.terminal_state.D
    iv, idv = lysis_integrals(traj)
    lo, hi = final_sum_bounds(p.B, m, C0)
    return FinalStateCheck(
        vf_plus_df=s,
        residual_iv=abs(s - ((m - 2.0 + p.B) * C0 + iv)),
        residual_idv=abs(s - ((m - 1.0 + p.B) * C0 - idv)),
        bounds=(lo, hi),
        within_bounds=lo <= s <= hi,
        next_passage_moi=s / C0,
    )


def analytic_high_moi(p: ModelParams, V0: float, D0: float, C0: float = 1.0) -> tuple[float, float]:
    """Single-wave estimate of ``(V_f, D_f)`` when the inoculum exceeds the cells.

    Two inocula are covered: pure helper virus with ``V0 > C0``, and
    ``V0 > C0 > D0 > 0``. Particles that find no cell stay in the medium as
    a reservoir.
    """
    if not p.B > 1.0 + p.beta + p.delta:
        raise NotApplicableError("high-MOI estimates need B > 1 + beta + delta")
    eta, kappa, beta, delta = p.eta, p.kappa, p.beta, p.delta
    if D0 == 0:
        if not V0 > C0:
            raise NotApplicableError("pure-HV case needs V0 > C0")
        m = V0 / C0
        return (eta + m - 1.0) * C0, beta * eta * C0
    if V0 > C0 > D0 > 0:
        vf = eta * (C0 - D0) + eta / kappa * D0 + (V0 - C0)
        df = beta * eta * (C0 - D0) + eta / kappa * (beta + delta) * D0
        return vf, df
    raise NotApplicableError("mixed case needs V0 > C0 > D0 > 0")
