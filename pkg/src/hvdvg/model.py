"""Parameters, state and vector field of the helper-virus / DVG infection model.

All densities are measured in units of the initial cell density, so a fresh
culture starts at ``C = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels as K

STATE_NAMES = ("C", "Cv", "Cd", "Cdv", "V", "D")
CELL_NAMES = STATE_NAMES[:4]


class ParameterError(ValueError):
    """A model, inoculum or configuration value is outside its allowed range."""


class State(NamedTuple):
    """One point of the six-dimensional phase space.

    Being a tuple, ``np.asarray(state)`` gives the float vector directly.
    """

    C: float
    Cv: float
    Cd: float
    Cdv: float
    V: float
    D: float

    @classmethod
    def from_array(cls, x) -> State:
        x = np.asarray(x, dtype=float)
        if x.shape != (6,):
            raise ParameterError(f"a state has 6 components, got shape {x.shape}")
        return cls(*(float(v) for v in x))

    @property
    def cells(self) -> float:
        return self.C + self.Cv + self.Cd + self.Cdv

    @property
    def particles(self) -> float:
        return self.V + self.D


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ParameterError(msg)


@dataclass(frozen=True)
class ModelParams:
    """Rate and stoichiometry parameters.

    ``eta`` (HV yield per lysed single-infected cell) and ``kappa`` (penalty
    on HV yield in coinfected cells) are derived at construction and cannot
    be passed in.

    ``delta`` is accepted down to 1 inclusive: the fitting ranges start at
    exactly 1 even though the model analysis assumes ``delta > 1``.
    """

    B: float
    beta: float
    delta: float
    iota: float
    alpha: float
    gamma: float = 0.0
    eta: float = field(init=False)
    kappa: float = field(init=False)

    def __post_init__(self):
        for name in ("B", "beta", "delta", "iota", "alpha", "gamma"):
            v = getattr(self, name)
            _check(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool),
                   f"{name} must be a real number, got {v!r}")
            _check(math.isfinite(v), f"{name} must be finite, got {v!r}")
            object.__setattr__(self, name, float(v))
        _check(self.B > 0, f"B must be > 0, got {self.B}")
        _check(0.0 <= self.beta <= 1.0, f"beta must lie in [0, 1], got {self.beta}")
        _check(self.delta >= 1.0, f"delta must be >= 1, got {self.delta}")
        _check(self.iota > 0, f"iota must be > 0, got {self.iota}")
        _check(self.alpha > 0, f"alpha must be > 0, got {self.alpha}")
        _check(self.gamma >= 0, f"gamma must be >= 0, got {self.gamma}")
        object.__setattr__(self, "eta", self.B / (1.0 + self.beta))
        object.__setattr__(self, "kappa", 1.0 + self.delta / (1.0 + self.beta))

    @classmethod
    def from_ratio(cls, B, beta, delta, iota_over_alpha, alpha=1.0, gamma_over_alpha=0.0):
        """Build parameters from the dimensionless ratios iota/alpha and gamma/alpha.

        ``alpha`` fixes the time unit; only ``iota/alpha`` and
        ``gamma/alpha`` affect which plane an orbit reaches.
        """
        return cls(B=B, beta=beta, delta=delta, iota=iota_over_alpha * alpha,
                   alpha=alpha, gamma=gamma_over_alpha * alpha)

    @property
    def iota_over_alpha(self) -> float:
        return self.iota / self.alpha

    def replace(self, **changes) -> ModelParams:
        d = self.to_dict()
        d.update(changes)
        return ModelParams(**d)

    def as_kernel_array(self, which: int = 0) -> np.ndarray:
        par = np.empty(K.NPAR)
        par[K.P_B] = self.B
        par[K.P_BETA] = self.beta
        par[K.P_DELTA] = self.delta
        par[K.P_IOTA] = self.iota
        par[K.P_ALPHA] = self.alpha
        par[K.P_GAMMA] = self.gamma
        par[K.P_ETA] = self.eta
        par[K.P_KAPPA] = self.kappa
        par[K.P_WHICH] = which
        return par

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("B", "beta", "delta", "iota", "alpha", "gamma")}

    @classmethod
    def from_dict(cls, d: dict) -> ModelParams:
        allowed = {"B", "beta", "delta", "iota", "alpha", "gamma"}
        unknown = set(d) - allowed
        _check(not unknown, f"unknown model fields: {sorted(unknown)}")
        missing = allowed - {"gamma"} - set(d)
        _check(not missing, f"missing model fields: {sorted(missing)}")
        return cls(**d)


def derive_params(B, beta, delta, iota, alpha, gamma=0.0) -> ModelParams:
    return ModelParams(B=B, beta=beta, delta=delta, iota=iota, alpha=alpha, gamma=gamma)


@dataclass(frozen=True)
class InoculumSpec:
    """Inoculum of ``m`` particles per cell, a fraction ``qV0`` of them helper virus."""

    m: float
    qV0: float
    C0: float = 1.0

    def __post_init__(self):
        for name in ("m", "qV0", "C0"):
            v = getattr(self, name)
            _check(isinstance(v, (int, float, np.floating, np.integer)) and not isinstance(v, bool)
                   and math.isfinite(v), f"{name} must be a finite real number, got {v!r}")
            object.__setattr__(self, name, float(v))
        _check(self.m > 0, f"m must be > 0, got {self.m}")
        _check(0.0 <= self.qV0 <= 1.0, f"qV0 must lie in [0, 1], got {self.qV0}")
        _check(self.C0 > 0, f"C0 must be > 0, got {self.C0}")

    def to_dict(self) -> dict:
        return {"m": self.m, "qV0": self.qV0, "C0": self.C0}

    @classmethod
    def from_dict(cls, d: dict) -> InoculumSpec:
        unknown = set(d) - {"m", "qV0", "C0"}
        _check(not unknown, f"unknown inoculum fields: {sorted(unknown)}")
        return cls(**d)


def inoculum_state(spec: InoculumSpec) -> State:
    particles = spec.m * spec.C0
    return State(spec.C0, 0.0, 0.0, 0.0, particles * spec.qV0, particles * (1.0 - spec.qV0))


def initial_state(V0: float, D0: float, C0: float = 1.0) -> State:
    """Fresh culture inoculated with explicit particle densities."""
    _check(C0 > 0 and V0 >= 0 and D0 >= 0, f"need C0 > 0, V0 >= 0, D0 >= 0; got {C0}, {V0}, {D0}")
    return State(float(C0), 0.0, 0.0, 0.0, float(V0), float(D0))


def vector_field(state, p: ModelParams) -> np.ndarray:
    """Time derivative of the six compartments at ``state``."""
    y = np.zeros(K.NCORE)
    y[:6] = np.asarray(state, dtype=float)
    dy = np.empty(K.NCORE)
    K.model_field(y, p.as_kernel_array(), np.ones(K.NCELL, dtype=np.bool_), dy)
    return dy[:6]


def jacobian(state, p: ModelParams) -> np.ndarray:
    """Analytic 6x6 Jacobian of :func:`vector_field`."""
    y = np.zeros(K.NCORE)
    y[:6] = np.asarray(state, dtype=float)
    J = np.empty((6, 6))
    K.jacobian(y, p.as_kernel_array(), J)
    return J
