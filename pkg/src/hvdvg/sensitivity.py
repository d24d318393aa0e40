"""First-order variational equations with respect to parameters and initial data.

Both variational systems are integrated together with the orbit by the same
adaptive stepper (so the error control covers the sensitivities too). After
a cell compartment is clamped to zero its sensitivity row is held constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .integrator import IntegratorConfig, Trajectory, _assemble, integrate
from .model import STATE_NAMES, ModelParams, ParameterError

PARAM_CODES = {
    "B": K.W_B,
    "beta": K.W_BETA,
    "delta": K.W_DELTA,
    "iota": K.W_IOTA,
    "alpha": K.W_ALPHA,
    "gamma": K.W_GAMMA,
}
# derivative along the ratio iota/alpha with alpha held fixed: alpha * d/d(iota)
RATIO = "iota_over_alpha"
SUBJECTS = tuple(PARAM_CODES) + (RATIO,)


@dataclass(frozen=True)
class SensitivityTrajectory:
    """Orbit plus its sensitivities at every sample.

    ``sens`` has shape ``(n, 6)`` for a parameter subject and ``(n, 6, 6)``
    for initial conditions, where ``sens[k, i, j] = d x_i(t_k) / d x_j(0)``.
    """

    subject: str
    trajectory: Trajectory
    sens: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return self.trajectory.t

    @property
    def states(self) -> np.ndarray:
        return self.trajectory.states

    def at(self, t: float) -> np.ndarray:
        """Sensitivity at a sample time (exact match required)."""
        idx = np.flatnonzero(self.t == t)
        if idx.size == 0:
            raise ParameterError(f"t={t} is not a sample time; pass it in t_eval")
        return self.sens[idx[0]]

    def component(self, name: str) -> np.ndarray:
        if self.sens.ndim != 2:
            raise ParameterError("component() is for parameter sensitivities")
        return self.sens[:, STATE_NAMES.index(name)]


def _check_state(state0) -> np.ndarray:
    x0 = np.asarray(state0, dtype=float)
    if x0.shape != (6,) or not np.all(np.isfinite(x0)):
        raise ParameterError("state0 must be 6 finite numbers")
    return x0


def variational_wrt_param(state0, p: ModelParams, param: str,
                          cfg: IntegratorConfig = IntegratorConfig(), *, t_eval=None) -> SensitivityTrajectory:
    """Integrate the orbit with ``d x / d param``.

    ``param`` is one of B, beta, delta, iota, alpha, gamma, or
    ``iota_over_alpha`` (the ratio varied through iota at fixed alpha, i.e.
    ``alpha * dx/d iota``).
    """
    if param not in SUBJECTS:
        raise ParameterError(f"unknown sensitivity parameter {param!r}; choose from {SUBJECTS}")
    code = PARAM_CODES["iota" if param == RATIO else param]
    y0 = np.zeros(K.kind_dim(K.KIND_PARAM))
    y0[:6] = _check_state(state0)
    traj = _assemble(K.KIND_PARAM, y0, p, cfg, t_eval, which=code)
    sens = traj.extra.copy()
    if param == RATIO:
        sens *= p.alpha
    return SensitivityTrajectory(param, traj, sens)


def variational_wrt_ic(state0, p: ModelParams, cfg: IntegratorConfig = IntegratorConfig(), *,
                       t_eval=None) -> SensitivityTrajectory:
    """Integrate the orbit with its 6x6 fundamental matrix, started at identity."""
    n = K.kind_dim(K.KIND_IC)
    y0 = np.zeros(n)
    y0[:6] = _check_state(state0)
    y0[K.NCORE:] = np.eye(6).ravel()
    traj = _assemble(K.KIND_IC, y0, p, cfg, t_eval)
    return SensitivityTrajectory("ic", traj, traj.extra.reshape(-1, 6, 6).copy())


def _perturbed(p: ModelParams, param: str, h: float) -> ModelParams:
    if param == RATIO:
        return p.replace(iota=p.iota + h * p.alpha)
    return p.replace(**{param: getattr(p, param) + h})


def _flow_at(state0, p, cfg, t):
    traj = integrate(state0, p, cfg, t_eval=[t])
    idx = np.flatnonzero(traj.t == t)
    if idx.size:
        return traj.states[idx[0]]
    # integration stopped at an equilibrium before t: the state is frozen there
    return np.asarray(traj.terminal_state, dtype=float)


def fd_param(state0, p, param, cfg, t, h, *, central=True) -> np.ndarray:
    """Finite-difference ``dx(t)/d param`` from two (or one) extra integrations."""
    if central:
        return (_flow_at(state0, _perturbed(p, param, h), cfg, t)
                - _flow_at(state0, _perturbed(p, param, -h), cfg, t)) / (2 * h)
    return (_flow_at(state0, _perturbed(p, param, h), cfg, t) - _flow_at(state0, p, cfg, t)) / h


def fd_ic(state0, p, cfg, t, j, h, *, central=True) -> np.ndarray:
    """Finite-difference column ``dx(t)/dx_j(0)``."""
    x0 = _check_state(state0)
    e = np.zeros(6)
    e[j] = h
    if central:
        return (_flow_at(x0 + e, p, cfg, t) - _flow_at(x0 - e, p, cfg, t)) / (2 * h)
    return (_flow_at(x0 + e, p, cfg, t) - _flow_at(x0, p, cfg, t)) / h


def fd_ic_matrix(state0, p, cfg, t, h) -> np.ndarray:
    return np.column_stack([fd_ic(state0, p, cfg, t, j, h) for j in range(6)])


@dataclass(frozen=True)
class FDReport:
    subject: str
    t: float
    central: bool
    steps: tuple[float, ...]
    errors: tuple[float, ...]
    orders: tuple[Optional[float], ...]   # between consecutive steps; None if undefined
    passed: bool

    def table(self) -> list[tuple[float, float, Optional[float]]]:
        return [(h, e, o) for h, e, o in zip(self.steps, self.errors, (None,) + self.orders)]


def fd_check(subject, state0, p: ModelParams, cfg: IntegratorConfig = IntegratorConfig(), *,
             t: float, steps: Sequence[float] = (1e-4, 1e-5, 1e-6), central: bool = False) -> FDReport:
    """Compare analytic and finite-difference sensitivities at time ``t``.

    ``subject`` is a parameter name or an integer initial-condition index.
    The error at each step is the max-abs difference over the six
    components; the observed order between consecutive steps is
    ``log(e1/e2)/log(h1/h2)``. The check passes when every defined order
    lies in [0.8, 2.2], or when every error is already below 1e-6 of the
    sensitivity's magnitude (the difference quotient is then dominated by
    integration noise, e.g. for a sensitivity that is identically zero).
    """
    if isinstance(subject, (int, np.integer)):
        if not 0 <= int(subject) < 6:
            raise ParameterError("initial-condition index must be in 0..5")
        analytic = variational_wrt_ic(state0, p, cfg, t_eval=[t]).at(t)[:, int(subject)]
        fd = lambda h: fd_ic(state0, p, cfg, t, int(subject), h, central=central)  # noqa: E731
        name = f"ic:{STATE_NAMES[int(subject)]}"
    else:
        analytic = variational_wrt_param(state0, p, subject, cfg, t_eval=[t]).at(t)
        fd = lambda h: fd_param(state0, p, subject, cfg, t, h, central=central)  # noqa: E731
        name = subject
    errs = [float(np.max(np.abs(fd(h) - analytic))) for h in steps]
    orders = []
    for (h1, e1), (h2, e2) in zip(zip(steps, errs), zip(steps[1:], errs[1:])):
        orders.append(math.log(e1 / e2) / math.log(h1 / h2) if e1 > 0 and e2 > 0 else None)
    scale = max(1.0, float(np.max(np.abs(analytic))))
    floor = all(e <= 1e-6 * scale for e in errs)
    passed = floor or all(o is not None and 0.8 <= o <= 2.2 for o in orders)
    return FDReport(name, float(t), central, tuple(steps), tuple(errs), tuple(orders), passed)


def sensitivity_to_csv_text(st: SensitivityTrajectory) -> str:
    if st.sens.ndim == 2:
        cols = ["d" + n for n in STATE_NAMES]
        data = st.sens
    else:
        cols = [f"d{a}_d{b}0" for a in STATE_NAMES for b in STATE_NAMES]
        data = st.sens.reshape(st.sens.shape[0], 36)
    lines = ["t," + ",".join(cols)]
    for tk, row in zip(st.t, data):
        lines.append(",".join(f"{v:.17g}" for v in (tk, *row)))
    return "\n".join(lines) + "\n"
