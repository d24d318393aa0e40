"""Equilibrium planes, closed-form spectra and local stability."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .integrator import PlaneClass, classify_state
from .model import ModelParams, ParameterError, jacobian, vector_field

DEGENERATE_TOL = 1e-12


class NotOnPlaneError(ParameterError):
    """The point is not (numerically) an equilibrium of the degradation-free model."""


@dataclass(frozen=True)
class StabilityCase:
    """Which planes attract, by position of B relative to 1+beta and 1+beta+delta.

    ``case_id`` is None on a boundary (``degenerate`` is then True and
    ``boundary`` names it): those are transcritical loci, not members of
    either neighbouring case.
    """

    case_id: Optional[str]
    thresholds: tuple[float, float]
    degenerate: bool = False
    boundary: Optional[str] = None


def stability_case(p: ModelParams) -> StabilityCase:
    lo = 1.0 + p.beta
    hi = 1.0 + p.beta + p.delta
    if abs(p.B - lo) < DEGENERATE_TOL:
        return StabilityCase(None, (lo, hi), True, "B=1+beta")
    if abs(p.B - hi) < DEGENERATE_TOL:
        return StabilityCase(None, (lo, hi), True, "B=1+beta+delta")
    if p.B > hi:
        case = "I"
    elif p.B > lo:
        case = "II"
    else:
        case = "III"
    return StabilityCase(case, (lo, hi))


def attracting_ratio_threshold(p: ModelParams) -> float:
    """Critical ``C/Cd`` on the C-Cd plane: smaller ratios attract, larger are saddles.

    Infinite when every point attracts (B below 1+beta), zero when none do.
    """
    lo = 1.0 + p.beta
    hi = 1.0 + p.beta + p.delta
    if p.B <= lo:
        return math.inf
    if p.B >= hi:
        return 0.0
    return (1.0 - p.B / hi) / (p.B / lo - 1.0)


def eps_pm(C, Cd, p: ModelParams) -> tuple[float, float, float]:
    """Transverse eigenvalue pair on the C-Cd plane and its discriminant."""
    s = p.iota * (C + Cd)
    disc = 4 * p.alpha * C * p.eta * p.iota + (s - p.alpha) ** 2 + 4 * p.alpha * Cd * p.eta * p.iota / p.kappa
    r = math.sqrt(max(disc, 0.0))
    return -(s + p.alpha) / 2 - r / 2, -(s + p.alpha) / 2 + r / 2, disc


def lambda_pm(Cd, p: ModelParams) -> tuple[float, float, float]:
    """Transverse eigenvalue pair on the Cd-D plane and its discriminant."""
    s = p.iota * Cd
    disc = (s - p.alpha) ** 2 + 4 * p.alpha * Cd * p.eta * p.iota / p.kappa
    r = math.sqrt(max(disc, 0.0))
    return -(s + p.alpha) / 2 - r / 2, -(s + p.alpha) / 2 + r / 2, disc


@dataclass(frozen=True)
class Spectrum:
    """The six Jacobian eigenvalues at an equilibrium.

    ``zero_multiplicity`` counts the semisimple zeros tangent to the plane
    (two on a plane, four at the origin). ``critical`` is the eigenvalue
    whose sign decides stability (None on the V-D plane, which always
    attracts).
    """

    eigenvalues: tuple[float, ...]
    plane: PlaneClass
    zero_multiplicity: int
    critical: Optional[float] = None
    discriminant: Optional[float] = None


def locate_plane(point, p: ModelParams, threshold: float = 1e-10) -> PlaneClass:
    if p.gamma > 0:
        raise NotOnPlaneError("with gamma > 0 the only equilibrium is the origin")
    cls = classify_state(point, threshold)
    if cls is PlaneClass.UNDETERMINED:
        raise NotOnPlaneError(f"point {tuple(np.asarray(point, float))} is not on any equilibrium plane")
    return cls


def spectrum_at(point, p: ModelParams, plane: Optional[PlaneClass] = None,
                threshold: float = 1e-10) -> Spectrum:
    """Closed-form spectrum at an equilibrium.

    ``plane`` may be given explicitly for points on an intersection of two
    planes; by default it is inferred from the survivor pattern.
    """
    cls = locate_plane(point, p, threshold) if plane is None else plane
    C, Cv, Cd, Cdv, V, D = (float(v) for v in np.asarray(point, dtype=float))
    a, i = p.alpha, p.iota
    if cls is PlaneClass.ORIGIN:
        return Spectrum((0.0, 0.0, 0.0, 0.0, -a, -a), cls, 4)
    if cls is PlaneClass.VD:
        ev = (0.0, 0.0, -i * V, -a, -i * (V + D), -(i * D + a))
        return Spectrum(ev, cls, 2)
    if cls is PlaneClass.CCD:
        em, ep, disc = eps_pm(C, Cd, p)
        return Spectrum((0.0, 0.0, -a, -i * C, em, ep), cls, 2, critical=ep, discriminant=disc)
    if cls is PlaneClass.CDD:
        lm, lp, disc = lambda_pm(Cd, p)
        return Spectrum((0.0, 0.0, -i * D, -(i * D + a), lm, lp), cls, 2, critical=lp, discriminant=disc)
    raise NotOnPlaneError(f"cannot compute a spectrum for {cls}")


def is_attracting(point, p: ModelParams, plane: Optional[PlaneClass] = None) -> tuple[bool, Spectrum]:
    """Local attraction of an equilibrium, judged transversally to its plane."""
    spec = spectrum_at(point, p, plane)
    if spec.plane is PlaneClass.VD:
        return True, spec
    if spec.critical is not None:
        return spec.critical < 0, spec
    rest = sorted(spec.eigenvalues, key=abs)[spec.zero_multiplicity:]
    return all(e < 0 for e in rest), spec


def fd_jacobian(point, p: ModelParams, rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the vector field, independent of the analytic one."""
    x = np.asarray(point, dtype=float)
    h = rel_step * max(1.0, float(np.linalg.norm(x)))
    J = np.empty((6, 6))
    for j in range(6):
        e = np.zeros(6)
        e[j] = h
        J[:, j] = (vector_field(x + e, p) - vector_field(x - e, p)) / (2 * h)
    return J


PLANE_COORDS = {
    PlaneClass.VD: (4, 5),
    PlaneClass.CDD: (2, 5),
    PlaneClass.CCD: (0, 2),
}


def transverse_eigenvalues(point, p: ModelParams, plane: PlaneClass, *, numeric: str = "fd") -> np.ndarray:
    """Eigenvalues of the Jacobian block transverse to ``plane``.

    Every plane point is stationary, so the Jacobian columns of the two
    in-plane coordinates vanish and the remaining four eigenvalues are those
    of the transverse principal submatrix.
    """
    J = fd_jacobian(point, p) if numeric == "fd" else jacobian(point, p)
    idx = [k for k in range(6) if k not in PLANE_COORDS[plane]]
    return np.linalg.eigvals(J[np.ix_(idx, idx)])


def leading_transverse_eigenvalue(point, p: ModelParams, plane: PlaneClass, *, numeric: str = "fd") -> float:
    return float(np.max(transverse_eigenvalues(point, p, plane, numeric=numeric).real))
