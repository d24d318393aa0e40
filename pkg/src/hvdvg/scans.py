"""Two-parameter grid scans: phase diagrams, basins of attraction, end-state clouds.

Each grid node is an independent integration, so nodes are farmed out to a
thread pool (the compiled kernel releases the GIL) and gathered back in
row-major order. The output does not depend on the number of workers.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .equilibria import stability_case
from .integrator import IntegrationError, IntegratorConfig, classify_omega_limit, integrate
from .model import InoculumSpec, ModelParams, ParameterError, initial_state

AXIS_NAMES = ("qV0", "m", "B", "beta", "delta", "V0", "D0", "iota_over_alpha")
ERROR = "ERROR"
DEGENERATE = "DEGENERATE"
CLASS_LABELS = ("VD", "CDD", "CCD", "ORIGIN", "UNDET", ERROR, DEGENERATE)


@dataclass(frozen=True)
class Axis:
    name: str
    min: float
    max: float
    steps: int
    scale: str = "linear"

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ParameterError(f"unknown axis {self.name!r}; choose from {AXIS_NAMES}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ParameterError(f"axis {self.name}: steps must be a positive integer")
        if not self.min < self.max:
            raise ParameterError(f"axis {self.name}: need min < max, got {self.min}, {self.max}")
        if self.scale not in ("linear", "log"):
            raise ParameterError(f"axis {self.name}: scale must be 'linear' or 'log'")
        if self.scale == "log" and not self.min > 0:
            raise ParameterError(f"axis {self.name}: a log axis needs min > 0")

    def values(self) -> np.ndarray:
        if self.steps == 1:
            return np.array([float(self.min)])
        if self.scale == "log":
            return np.geomspace(self.min, self.max, self.steps)
        return np.linspace(self.min, self.max, self.steps)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> Axis:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown axis fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class GridSpec:
    """Grid over two named quantities; everything else comes from ``params`` and ``inoculum``.

    ``V0``/``D0`` axes set the particle densities directly and override the
    inoculum's ``m`` and ``qV0``.
    """

    x_axis: Axis
    y_axis: Axis
    params: ModelParams
    inoculum: InoculumSpec = field(default_factory=lambda: InoculumSpec(m=1.0, qV0=0.5))

    def __post_init__(self):
        if self.x_axis.name == self.y_axis.name:
            raise ParameterError("axis names must be distinct")

    @property
    def shape(self) -> tuple[int, int]:
        return self.y_axis.steps, self.x_axis.steps

    def node(self, x: float, y: float):
        """Parameters and initial state at grid coordinates ``(x, y)``."""
        vals = {self.x_axis.name: float(x), self.y_axis.name: float(y)}
        p = self.params
        changes = {k: vals[k] for k in ("B", "beta", "delta") if k in vals}
        if "iota_over_alpha" in vals:
            changes["iota"] = vals["iota_over_alpha"] * p.alpha
        if changes:
            p = p.replace(**changes)
        inoc = self.inoculum
        m = vals.get("m", inoc.m)
        q = vals.get("qV0", inoc.qV0)
        V0 = vals.get("V0", m * q * inoc.C0)
        D0 = vals.get("D0", m * (1.0 - q) * inoc.C0)
        return p, initial_state(V0, D0, inoc.C0)

    def to_dict(self) -> dict:
        return {"x_axis": self.x_axis.to_dict(), "y_axis": self.y_axis.to_dict(),
                "params": self.params.to_dict(), "inoculum": self.inoculum.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> GridSpec:
        unknown = set(d) - {"x_axis", "y_axis", "params", "inoculum"}
        if unknown:
            raise ParameterError(f"unknown grid fields: {sorted(unknown)}")
        kw = dict(x_axis=Axis.from_dict(d["x_axis"]), y_axis=Axis.from_dict(d["y_axis"]),
                  params=ModelParams.from_dict(d["params"]))
        if "inoculum" in d:
            kw["inoculum"] = InoculumSpec.from_dict(d["inoculum"])
        return cls(**kw)


@dataclass(frozen=True)
class CellResult:
    x: float
    y: float
    label: str
    Vf: float
    Df: float
    wall_time: float
    error: Optional[str] = None


@dataclass(frozen=True)
class ScanResult:
    spec: GridSpec
    config: IntegratorConfig
    cells: tuple[CellResult, ...]     # row-major: y outer, x inner

    def labels(self) -> np.ndarray:
        return np.array([c.label for c in self.cells]).reshape(self.spec.shape)

    def counts(self) -> dict[str, int]:
        out = {k: 0 for k in CLASS_LABELS}
        for c in self.cells:
            out[c.label] += 1
        return out

    def to_csv_text(self) -> str:
        lines = ["x,y,class,Vf,Df"]
        for c in self.cells:
            lines.append(f"{c.x:.17g},{c.y:.17g},{c.label},{c.Vf:.17g},{c.Df:.17g}")
        return "\n".join(lines) + "\n"

    def sidecar(self) -> dict:
        return {
            "grid": self.spec.to_dict(),
            "integrator": self.config.to_dict(),
            "counts": self.counts(),
            "determinism": "output depends only on grid and integrator settings, not on worker count",
        }


def evaluate_node(spec: GridSpec, cfg: IntegratorConfig, x: float, y: float) -> CellResult:
    t0 = time.perf_counter()
    try:
        p, x0 = spec.node(x, y)
        traj = integrate(x0, p, cfg)
    except (IntegrationError, ParameterError) as exc:
        return CellResult(x, y, ERROR, math.nan, math.nan, time.perf_counter() - t0, str(exc))
    label = classify_omega_limit(traj).value
    if stability_case(p).degenerate:
        label = DEGENERATE
    s = traj.terminal_state
    return CellResult(x, y, label, s.V, s.D, time.perf_counter() - t0)


def _nodes(spec: GridSpec):
    xs = spec.x_axis.values()
    ys = spec.y_axis.values()
    return [(float(x), float(y)) for y in ys for x in xs]


def _scan_cfg(cfg: IntegratorConfig) -> IntegratorConfig:
    # only terminal states are needed
    return cfg if cfg.sample_dt is None else cfg.replace(sample_dt=None)


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def scan_grid(spec: GridSpec, cfg: IntegratorConfig = IntegratorConfig(), *, workers: int = 1) -> ScanResult:
    """Integrate and classify every grid node."""
    cfg = _scan_cfg(cfg)
    cells = _map(lambda xy: evaluate_node(spec, cfg, *xy), _nodes(spec), workers)
    return ScanResult(spec, cfg, tuple(cells))


@dataclass(frozen=True)
class CloudPoint:
    m: float
    qV0: float
    Vf: float
    Df: float
    label: str


def end_state_cloud(spec: GridSpec, cfg: IntegratorConfig = IntegratorConfig(), *,
                    workers: int = 1) -> list[CloudPoint]:
    """Terminal ``(V_f, D_f)`` at every node, tagged with its inoculum ``(m, qV0)``."""
    case = stability_case(spec.params).case_id
    if case != "I" and not {"B", "beta", "delta"} & {spec.x_axis.name, spec.y_axis.name}:
        warnings.warn("end-state clouds are meant for parameters where only the V-D plane attracts",
                      stacklevel=2)
    res = scan_grid(spec, cfg, workers=workers)
    out = []
    for c in res.cells:
        _, x0 = spec.node(c.x, c.y)
        m = (x0.V + x0.D) / x0.C
        q = x0.V / (x0.V + x0.D) if x0.V + x0.D > 0 else math.nan
        out.append(CloudPoint(m, q, c.Vf, c.Df, c.label))
    return out


def cloud_to_csv_text(points) -> str:
    lines = ["m,qV0,Vf,Df,class"]
    for pt in points:
        lines.append(f"{pt.m:.17g},{pt.qV0:.17g},{pt.Vf:.17g},{pt.Df:.17g},{pt.label}")
    return "\n".join(lines) + "\n"


# Standard scan presets. Axis extents are chosen to bracket the class
# transitions of each parameter set.
def phase_diagram_qv0_B(m: float, steps: int = 201) -> GridSpec:
    return GridSpec(Axis("qV0", 0.0, 1.0, steps), Axis("B", 0.5, 5.0, steps),
                    ModelParams.from_ratio(B=2.0, beta=0.2, delta=2.0, iota_over_alpha=10.0),
                    InoculumSpec(m=m, qV0=0.5))


def phase_diagram_qv0_delta(m: float, B: float = 1.5, steps: int = 201) -> GridSpec:
    return GridSpec(Axis("qV0", 0.0, 1.0, steps), Axis("delta", 1.0, 10.0, steps),
                    ModelParams.from_ratio(B=B, beta=0.2, delta=2.0, iota_over_alpha=10.0),
                    InoculumSpec(m=m, qV0=0.5))


def basin_V0_D0(panel: str = "a", steps: int = 201) -> GridSpec:
    p = {
        "a": ModelParams.from_ratio(B=10.0, beta=0.5, delta=20.0, iota_over_alpha=100.0),
        "b": ModelParams.from_ratio(B=1.5, beta=0.75, delta=2.0, iota_over_alpha=100.0),
    }[panel]
    # helper virus spans decades (the C-Cd basin needs V0 near 1e-3); D0 is linear on (0, 1]
    return GridSpec(Axis("V0", 1e-4, 1.0, steps, "log"), Axis("D0", 1.0 / steps, 1.0, steps), p)


def cloud_m_qv0(steps: int = 201) -> GridSpec:
    return GridSpec(Axis("m", 0.01, 100.0, steps, "log"), Axis("qV0", 0.05, 0.95, steps),
                    ModelParams.from_ratio(B=100.0, beta=0.01, delta=1.2, iota_over_alpha=10.0))


def ratio_sweep(steps: int = 201, m: float = 1.0) -> GridSpec:
    return GridSpec(Axis("iota_over_alpha", 0.01, 10.0, steps, "log"), Axis("qV0", 0.05, 0.95, steps),
                    ModelParams.from_ratio(B=100.0, beta=0.01, delta=10.0, iota_over_alpha=1.0),
                    InoculumSpec(m=m, qV0=0.5))


PRESETS = {
    "phase_qv0_B": phase_diagram_qv0_B,
    "phase_qv0_delta": phase_diagram_qv0_delta,
    "basin": basin_V0_D0,
    "cloud": cloud_m_qv0,
    "ratio_sweep": ratio_sweep,
}
