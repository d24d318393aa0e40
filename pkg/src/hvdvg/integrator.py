"""Adaptive Fehlberg 7(8) integration with extinction clamping.

The orbit is integrated together with three quadrature states (the running
integrals of ``Cv``, ``Cdv`` and ``C (V + D)``), so the lysis integrals and
the rate estimators come out at integrator accuracy rather than from the
coarse sample grid.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from .model import CELL_NAMES, STATE_NAMES, ModelParams, ParameterError, State


class IntegrationError(RuntimeError):
    """Step size underflow or a non-finite state; carries the last good point."""

    def __init__(self, msg, t, state):
        super().__init__(msg)
        self.t = t
        self.state = state


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-13
    abs_tol: float = 1e-14
    extinction_threshold: float = 1e-10
    equilibrium_norm: float = 1e-12
    t_max: float = 1000.0
    sample_dt: Optional[float] = 0.1
    max_steps: int = 2_000_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "extinction_threshold", "equilibrium_norm", "t_max"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be a positive finite number, got {v!r}")
        if self.sample_dt is not None and not self.sample_dt > 0:
            raise ParameterError(f"sample_dt must be > 0 or null, got {self.sample_dt!r}")
        if int(self.max_steps) < 1:
            raise ParameterError("max_steps must be >= 1")

    def replace(self, **changes) -> IntegratorConfig:
        d = asdict(self)
        d.update(changes)
        return IntegratorConfig(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> IntegratorConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown integrator fields: {sorted(unknown)}")
        return cls(**d)


class PlaneClass(enum.Enum):
    VD = "VD"
    CDD = "CDD"
    CCD = "CCD"
    ORIGIN = "ORIGIN"
    UNDETERMINED = "UNDET"


@dataclass(frozen=True)
class ExtinctionTimes:
    """First time each cell compartment dropped below the extinction threshold."""

    t_C: Optional[float] = None
    t_V: Optional[float] = None
    t_D: Optional[float] = None
    t_DV: Optional[float] = None

    def ordered(self) -> Optional[bool]:
        """``0 < t_C < t_V < t_DV`` when all three exist, else None."""
        if None in (self.t_C, self.t_V, self.t_DV):
            return None
        return 0 < self.t_C < self.t_V < self.t_DV

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray                 # (n,)
    states: np.ndarray            # (n, 6)
    iv: np.ndarray                # running alpha * int Cv
    idv: np.ndarray               # running alpha * int Cdv
    extinction: ExtinctionTimes
    terminal_state: State
    terminal_time: float
    terminated_by: str            # "equilibrium" | "horizon"
    params: ModelParams
    config: IntegratorConfig
    int_cv: float                 # integrals up to the terminal time
    int_cdv: float
    int_cvd: float
    n_steps: int
    extra: Optional[np.ndarray] = field(default=None, repr=False)  # kernel tail columns

    @property
    def iv_accum(self) -> float:
        return float(self.iv[-1])

    @property
    def idv_accum(self) -> float:
        return float(self.idv[-1])

    @property
    def C0(self) -> float:
        return float(self.states[0, 0])

    def column(self, name: str) -> np.ndarray:
        return self.states[:, STATE_NAMES.index(name)]

    def state_at(self, i: int) -> State:
        return State.from_array(self.states[i])


_STATUS_TEXT = {
    K.STATUS_UNDERFLOW: "step size underflow",
    K.STATUS_MAX_STEPS: "maximum number of steps exceeded",
    K.STATUS_NONFINITE: "non-finite state or step size",
}


def output_times(cfg: IntegratorConfig, t_eval=None) -> np.ndarray:
    parts = []
    if cfg.sample_dt is not None:
        n = int(math.floor(cfg.t_max / cfg.sample_dt + 1e-9))
        parts.append(np.arange(1, n + 1) * cfg.sample_dt)
    if t_eval is not None:
        te = np.asarray(t_eval, dtype=float).ravel()
        if np.any(te < 0) or np.any(te > cfg.t_max):
            raise ParameterError("t_eval must lie in [0, t_max]")
        parts.append(te)
    if not parts:
        return np.empty(0)
    out = np.unique(np.concatenate(parts))
    return out[(out > 0) & (out <= cfg.t_max)]


def run_kernel(kind, y0, p: ModelParams, cfg: IntegratorConfig, out_t, which=0,
               stop_at_equilibrium=True):
    """Thin wrapper around the compiled kernel. Raises on integration failure."""
    out_y = np.empty((out_t.shape[0], y0.shape[0]))
    alive = np.ones(K.NCELL, dtype=np.bool_)
    seen = np.zeros(K.NCELL, dtype=np.bool_)
    t_ext = np.full(K.NCELL, np.nan)
    status, t, y, n_out, n_steps, _ = K.integrate_kernel(
        kind, np.ascontiguousarray(y0, dtype=float), p.as_kernel_array(which), float(cfg.t_max),
        out_t, out_y, cfg.rel_tol, cfg.abs_tol, cfg.extinction_threshold, cfg.equilibrium_norm,
        int(cfg.max_steps), stop_at_equilibrium, alive, seen, t_ext)
    if status in _STATUS_TEXT:
        raise IntegrationError(f"integration failed at t={t:.6g}: {_STATUS_TEXT[status]}",
                               t, State.from_array(y[:6]))
    return status, t, y, out_y[:n_out], n_steps, t_ext


def _assemble(kind, y0, p, cfg, t_eval, which=0):
    out_t = output_times(cfg, t_eval)
    status, t_end, y_end, out_y, n_steps, t_ext = run_kernel(kind, y0, p, cfg, out_t, which)
    ts = [0.0]
    rows = [y0]
    if out_y.shape[0]:
        ts.extend(out_t[:out_y.shape[0]])
        rows.extend(out_y)
    if t_end > ts[-1]:
        ts.append(t_end)
        rows.append(y_end)
    Y = np.vstack(rows)
    ext = ExtinctionTimes(*(None if math.isnan(v) else float(v) for v in t_ext))
    traj = Trajectory(
        t=np.asarray(ts), states=Y[:, :6].copy(),
        iv=p.alpha * Y[:, 6], idv=p.alpha * Y[:, 7],
        extinction=ext, terminal_state=State.from_array(y_end[:6]), terminal_time=float(t_end),
        terminated_by="equilibrium" if status == K.STATUS_EQUILIBRIUM else "horizon",
        params=p, config=cfg,
        int_cv=float(y_end[6]), int_cdv=float(y_end[7]), int_cvd=float(y_end[8]),
        n_steps=int(n_steps),
        extra=Y[:, K.NCORE:].copy() if Y.shape[1] > K.NCORE else None,
    )
    return traj


def integrate(state0, p: ModelParams, cfg: IntegratorConfig = IntegratorConfig(), *,
              t_eval=None) -> Trajectory:
    """Integrate from ``state0`` until equilibrium or ``cfg.t_max``.

    Samples are taken on the ``cfg.sample_dt`` grid and at every time in
    ``t_eval``; steps land on those times exactly. The last sample is
    always the terminal point.
    """
    x0 = np.asarray(state0, dtype=float)
    if x0.shape != (6,) or not np.all(np.isfinite(x0)):
        raise ParameterError("state0 must be 6 finite numbers")
    y0 = np.zeros(K.NCORE)
    y0[:6] = x0
    return _assemble(K.KIND_MODEL, y0, p, cfg, t_eval)


def classify_state(state, threshold: float) -> PlaneClass:
    """Plane of the survivor pattern of a (near) stationary state.

    Survivors are components above ``threshold``. A lone ``Cd`` counts as
    the Cd-D plane and a lone ``D`` as the V-D plane, where the two planes
    intersect.
    """
    x = np.asarray(state, dtype=float)
    alive = {name for name, v in zip(STATE_NAMES, x) if abs(v) > threshold}
    if not alive:
        return PlaneClass.ORIGIN
    if alive <= {"V", "D"}:
        return PlaneClass.VD
    if alive <= {"Cd", "D"}:
        return PlaneClass.CDD
    if alive <= {"C", "Cd"}:
        return PlaneClass.CCD
    return PlaneClass.UNDETERMINED


def classify_omega_limit(traj: Trajectory) -> PlaneClass:
    if traj.terminated_by != "equilibrium":
        return PlaneClass.UNDETERMINED
    return classify_state(traj.terminal_state, traj.config.extinction_threshold)


def min_distance_to_plane(traj: Trajectory, plane: PlaneClass, *, min_mass_fraction=0.1):
    """Smallest distance from the sampled orbit to an equilibrium plane.

    Only samples whose particle load ``V + D`` is at least
    ``min_mass_fraction`` of its maximum along the orbit are considered, so
    an orbit that has decayed to the origin does not count as having
    visited the plane. Returns ``(distance, time)``.
    """
    keep = {
        PlaneClass.VD: [4, 5],
        PlaneClass.CDD: [2, 5],
        PlaneClass.CCD: [0, 2],
    }[plane]
    off = [i for i in range(6) if i not in keep]
    mass = traj.states[:, 4] + traj.states[:, 5]
    mask = mass >= min_mass_fraction * mass.max()
    d = np.linalg.norm(traj.states[:, off], axis=1)
    d = np.where(mask, d, np.inf)
    i = int(np.argmin(d))
    return float(d[i]), float(traj.t[i])


def trajectory_to_csv(traj: Trajectory, path, footer: Optional[list[str]] = None) -> None:
    """Write ``t,C,Cv,Cd,Cdv,V,D,Iv,Idv`` rows with 17 significant digits."""
    from .io import atomic_write_text

    lines = ["t," + ",".join(STATE_NAMES) + ",Iv,Idv"]
    for i in range(traj.t.shape[0]):
        vals = [traj.t[i], *traj.states[i], traj.iv[i], traj.idv[i]]
        lines.append(",".join(f"{v:.17g}" for v in vals))
    for line in footer or ():
        lines.append("# " + line)
    atomic_write_text(path, "\n".join(lines) + "\n")


__all__ = [
    "CELL_NAMES", "ExtinctionTimes", "IntegrationError", "IntegratorConfig", "PlaneClass",
    "Trajectory", "classify_omega_limit", "classify_state", "integrate", "min_distance_to_plane",
    "output_times", "run_kernel", "trajectory_to_csv",
]
