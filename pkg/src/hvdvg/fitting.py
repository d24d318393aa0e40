"""Genetic-algorithm estimation of rates and inoculum from a titer time series.

A candidate is the gene vector ``(B, beta, delta, alpha, iota, gamma, V0, D0)``
with ``V0`` and ``D0`` in raw particle units. Simulations run in density
units where the culture starts at ``C = 1``: the inoculum is divided by the
dataset's ``scale`` and simulated titers are multiplied back.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numba
import numpy as np

from . import _fitkernel as FK
from .io import Dataset, ValidationError
from .model import ModelParams, ParameterError

GENE_NAMES = ("B", "beta", "delta", "alpha", "iota", "gamma", "V0", "D0")
FLOOR = 1e-30


@dataclass(frozen=True)
class Range:
    min: float
    max: float
    scale: str = "log"

    def __post_init__(self):
        if self.scale not in ("log", "linear"):
            raise ParameterError("range scale must be 'log' or 'linear'")
        if not (0 < self.min < self.max):
            raise ParameterError(f"ranges must satisfy 0 < min < max, got [{self.min}, {self.max}]")

    def to_gene(self, x):
        return np.log(x) if self.scale == "log" else np.asarray(x, dtype=float)

    def from_gene(self, g):
        return np.exp(g) if self.scale == "log" else g

    @property
    def gene_bounds(self) -> tuple[float, float]:
        if self.scale == "log":
            return math.log(self.min), math.log(self.max)
        return self.min, self.max


def default_ranges(moi_label: float = 1.8) -> dict[str, Range]:
    """Search box for the MOI 1.8 or MOI 3.8 experiment."""
    if moi_label not in (1.8, 3.8):
        raise ParameterError("default ranges exist for moi_label 1.8 and 3.8 only")
    hi = 1e7 if moi_label == 1.8 else 1e8
    return {
        "B": Range(1e1, 1e4),
        "beta": Range(1e-8, 1.0),
        "delta": Range(1.0, 200.0, "linear"),
        "alpha": Range(1e-3, 1e1),
        "iota": Range(1e-5, 1.0),
        "gamma": Range(0.01, 0.10, "linear"),
        "V0": Range(hi / 100, hi),
        "D0": Range(1.0, hi),
    }


@dataclass(frozen=True)
class Penalty:
    """Sigmoid penalty on the log of the total cell density at ``t_check`` hours."""

    k: float = 5.0
    x_star: float = -1.0
    p: float = 10.0
    t_check: float = 65.0


@dataclass(frozen=True)
class FitConfig:
    ranges: dict = field(default_factory=default_ranges)
    population: int = 600
    generations: int = 10_000
    elite_frac: float = 0.05
    crossover_frac: float = 0.80
    mutation_frac: float = 0.15
    penalty: Penalty = Penalty()
    batches: int = 5
    rng_seed: int = 0
    mutation: str = "gene"
    mutation_rate: float = 0.125
    creep_frac: float = 0.5
    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    extinction_threshold: float = 1e-10
    max_steps: int = 100_000

    def __post_init__(self):
        missing = set(GENE_NAMES) - set(self.ranges)
        unknown = set(self.ranges) - set(GENE_NAMES)
        if missing or unknown:
            raise ParameterError(f"ranges must cover exactly {GENE_NAMES}")
        ranges = {k: v if isinstance(v, Range) else Range(**v) for k, v in self.ranges.items()}
        object.__setattr__(self, "ranges", ranges)
        if isinstance(self.penalty, dict):
            object.__setattr__(self, "penalty", Penalty(**self.penalty))
        if abs(self.elite_frac + self.crossover_frac + self.mutation_frac - 1.0) > 1e-12:
            raise ParameterError("elite, crossover and mutation fractions must sum to 1")
        if min(self.crossover_frac, self.mutation_frac) < 0 or not self.elite_frac > 0:
            raise ParameterError("the elite fraction must be positive and the others non-negative")
        if self.mutation not in ("gene", "resample"):
            raise ParameterError("mutation must be 'gene' or 'resample'")
        if not (0.0 <= self.mutation_rate <= 1.0 and 0.0 <= self.creep_frac <= 1.0):
            raise ParameterError("mutation_rate and creep_frac must lie in [0, 1]")
        if self.population < 2 or self.generations < 0 or self.batches < 1:
            raise ParameterError("need population >= 2, generations >= 0, batches >= 1")

    @property
    def n_elite(self) -> int:
        # at least one survivor, so the best cost never gets worse
        return max(1, int(round(self.elite_frac * self.population)))

    @property
    def n_crossover(self) -> int:
        return min(int(round(self.crossover_frac * self.population)), self.population - self.n_elite)

    def n_mutation(self) -> int:
        return max(0, self.population - self.n_elite - self.n_crossover)

    def replace(self, **changes) -> FitConfig:
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return FitConfig(**d)

    def to_dict(self) -> dict:
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d["ranges"] = {k: asdict(v) for k, v in self.ranges.items()}
        d["penalty"] = asdict(self.penalty)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> FitConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ParameterError(f"unknown fit fields: {sorted(unknown)}")
        d = dict(d)
        if "ranges" in d:
            for name, r in d["ranges"].items():
                if isinstance(r, dict) and set(r) - {"min", "max", "scale"}:
                    raise ParameterError(f"unknown range fields for {name}")
        if "penalty" in d and isinstance(d["penalty"], dict):
            extra = set(d["penalty"]) - set(Penalty.__dataclass_fields__)
            if extra:
                raise ParameterError(f"unknown penalty fields: {sorted(extra)}")
        return cls(**d)


def sigmoid(x, k=5.0, x_star=-1.0, p=10.0):
    """``p / (1 + exp(-k (x - x_star)))``."""
    return p / (1.0 + np.exp(-k * (np.asarray(x, dtype=float) - x_star)))


@dataclass(frozen=True)
class Candidate:
    B: float
    beta: float
    delta: float
    alpha: float
    iota: float
    gamma: float
    V0: float
    D0: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in GENE_NAMES])

    @classmethod
    def from_array(cls, a) -> Candidate:
        return cls(*(float(v) for v in a))

    def params(self) -> ModelParams:
        return ModelParams(B=self.B, beta=self.beta, delta=self.delta, iota=self.iota,
                           alpha=self.alpha, gamma=self.gamma)

    def to_dict(self) -> dict:
        return asdict(self)


class _CostContext:
    """Dataset and penalty arrays prepared once for the compiled kernel."""

    def __init__(self, t, V, scale, penalty: Penalty, cfg: FitConfig):
        order = np.lexsort((V, t))
        self.t = np.ascontiguousarray(np.asarray(t, dtype=float)[order])
        self.logv = np.log(np.asarray(V, dtype=float)[order])
        if self.t.size == 0:
            raise ValidationError("empty dataset")
        out = np.unique(np.concatenate([self.t[self.t > 0], [penalty.t_check]]))
        self.out_t = out
        self.i_check = int(np.searchsorted(out, penalty.t_check))
        self.scale = float(scale)
        self.pen = penalty
        self.cfg = cfg

    def evaluate(self, values: np.ndarray, todo: Optional[np.ndarray] = None) -> np.ndarray:
        values = np.ascontiguousarray(values, dtype=float)
        out = np.full(values.shape[0], np.inf)
        todo = np.ones(values.shape[0], dtype=np.bool_) if todo is None else todo
        pen, c = self.pen, self.cfg
        FK.population_cost(values, todo, self.scale, 1.0, self.t, self.logv, self.out_t,
                           self.i_check, pen.k, pen.x_star, pen.p, c.rel_tol, c.abs_tol,
                           c.extinction_threshold, c.max_steps, FLOOR, out)
        return out


def cost_F(candidate, dataset: Dataset, penalty: Penalty = Penalty(), cfg: FitConfig | None = None) -> float:
    """Log of the squared log-titer misfit plus the cell-survival penalty.

    Returns +inf if the simulation fails or a simulated titer is not
    positive.
    """
    cfg = FitConfig() if cfg is None else cfg
    vec = candidate.as_array() if isinstance(candidate, Candidate) else np.asarray(candidate, dtype=float)
    ctx = _CostContext(dataset.t, dataset.V, dataset.scale, penalty, cfg)
    return float(ctx.evaluate(vec[None, :])[0])


@dataclass(frozen=True)
class FitResult:
    best: Candidate
    cost: float
    history_mean: np.ndarray
    history_min: np.ndarray
    seed: int
    batch_winners: tuple[Candidate, ...] = ()
    batch_costs: tuple[float, ...] = ()
    batch_mean: Optional[dict] = None
    batch_std: Optional[dict] = None
    batch_histories: tuple = ()

    def to_dict(self) -> dict:
        d = {
            "best": self.best.to_dict(),
            "cost": self.cost,
            "seed": self.seed,
            "history": {"mean_F": self.history_mean.tolist(), "min_F": self.history_min.tolist()},
        }
        if self.batch_winners:
            d["batches"] = [{"best": w.to_dict(), "cost": c} for w, c in zip(self.batch_winners, self.batch_costs)]
            d["batch_stats"] = {"mean": self.batch_mean, "std": self.batch_std}
        return d


def _gene_bounds(cfg: FitConfig):
    lo = np.array([cfg.ranges[n].gene_bounds[0] for n in GENE_NAMES])
    hi = np.array([cfg.ranges[n].gene_bounds[1] for n in GENE_NAMES])
    return lo, hi


def _decode(genes: np.ndarray, cfg: FitConfig) -> np.ndarray:
    vals = np.empty_like(genes)
    for j, n in enumerate(GENE_NAMES):
        vals[:, j] = cfg.ranges[n].from_gene(genes[:, j])
    # exp(log(x)) can overshoot the range by an ulp
    lo = np.array([cfg.ranges[n].min for n in GENE_NAMES])
    hi = np.array([cfg.ranges[n].max for n in GENE_NAMES])
    return np.clip(vals, lo, hi)


def ga_fit(dataset: Dataset, cfg: FitConfig = FitConfig(), *, seed: Optional[int] = None,
           threads: Optional[int] = None, record_populations: bool = False):
    """Run one GA batch.

    Each generation ranks the population by cost, keeps the elite stratum
    unchanged, refills the crossover stratum with uniform per-gene
    crossover of two parents drawn from the elite and crossover strata, and
    replaces the rest with fresh uniform samples in gene space. Costs of
    unchanged individuals are reused. With ``record_populations`` the
    decoded population of every generation is returned as well.
    """
    if dataset.n == 0:
        raise ValidationError("empty dataset")
    seed = cfg.rng_seed if seed is None else int(seed)
    if threads is not None:
        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
    rng = np.random.default_rng(seed)
    ctx = _CostContext(dataset.t, dataset.V, dataset.scale, cfg.penalty, cfg)
    lo, hi = _gene_bounds(cfg)
    N, ne, nc = cfg.population, cfg.n_elite, cfg.n_crossover
    n_par = ne + nc

    genes = rng.uniform(lo, hi, size=(N, lo.size))
    cost = ctx.evaluate(_decode(genes, cfg))
    hist_mean, hist_min, pops = [], [], []

    def record(g, c):
        finite = c[np.isfinite(c)]
        hist_mean.append(float(finite.mean()) if finite.size else math.inf)
        hist_min.append(float(c.min()))
        if record_populations:
            pops.append(_decode(g, cfg))

    record(genes, cost)
    for _ in range(cfg.generations):
        order = np.argsort(cost, kind="stable")
        genes, cost = genes[order], cost[order]
        new = np.empty_like(genes)
        new[:ne] = genes[:ne]
        pa = rng.integers(0, n_par, size=nc)
        pb = rng.integers(0, n_par, size=nc)
        mask = rng.random((nc, lo.size)) < 0.5
        new[ne:n_par] = np.where(mask, genes[pa], genes[pb])
        nm = N - n_par
        fresh = rng.uniform(lo, hi, size=(nm, lo.size))
        if cfg.mutation == "gene":
            # sources: half from the elite, half from the whole parent pool
            top = np.where(rng.random(nm) < 0.5, ne, n_par)
            src = genes[(rng.random(nm) * top).astype(np.int64)]
            redraw = rng.random((nm, lo.size)) < cfg.mutation_rate
            redraw[np.arange(nm), rng.integers(0, lo.size, size=nm)] = True
            jumped = np.where(redraw, fresh, src)
            # the other half move every gene a small step, with the step size
            # spread over three decades so both coarse and fine moves occur
            width = (hi - lo) * 10.0 ** rng.uniform(-4.0, -1.0, size=(nm, 1))
            step = np.clip(src + width * rng.standard_normal((nm, lo.size)), lo, hi)
            creep = rng.random(nm) < cfg.creep_frac
            fresh = np.where(creep[:, None], step, jumped)
        new[n_par:] = fresh
        todo = np.ones(N, dtype=np.bool_)
        todo[:ne] = False
        new_cost = np.empty(N)
        new_cost[:ne] = cost[:ne]
        # children identical to one parent inherit its cost
        same_a = np.all(new[ne:n_par] == genes[pa], axis=1)
        same_b = np.all(new[ne:n_par] == genes[pb], axis=1)
        inherit = np.where(same_a, cost[pa], np.where(same_b, cost[pb], np.nan))
        known = ~np.isnan(inherit)
        new_cost[ne:n_par] = inherit
        todo[ne:n_par] = ~known
        vals = _decode(new, cfg)
        evaluated = ctx.evaluate(vals, todo)
        new_cost[todo] = evaluated[todo]
        genes, cost = new, new_cost
        record(genes, cost)

    i = int(np.argmin(cost))
    best = Candidate.from_array(_decode(genes[i:i + 1], cfg)[0])
    res = FitResult(best, float(cost[i]), np.array(hist_mean), np.array(hist_min), seed)
    return (res, pops) if record_populations else res


def batch_seeds(seed: int, batches: int) -> list[int]:
    ss = np.random.SeedSequence(int(seed))
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in ss.spawn(batches)]


def batch_fit(dataset: Dataset, cfg: FitConfig = FitConfig(), *, threads: Optional[int] = None) -> FitResult:
    """Run ``cfg.batches`` independent GA runs and summarize their winners."""
    if cfg.batches < 2:
        raise ParameterError("batch_fit needs batches >= 2")
    runs = [ga_fit(dataset, cfg, seed=s, threads=threads) for s in batch_seeds(cfg.rng_seed, cfg.batches)]
    win = np.array([r.best.as_array() for r in runs])
    mean = {n: float(v) for n, v in zip(GENE_NAMES, win.mean(axis=0))}
    std = {n: float(v) for n, v in zip(GENE_NAMES, win.std(axis=0, ddof=1))}
    k = int(np.argmin([r.cost for r in runs]))
    top = runs[k]
    return FitResult(top.best, top.cost, top.history_mean, top.history_min, cfg.rng_seed,
                     batch_winners=tuple(r.best for r in runs), batch_costs=tuple(r.cost for r in runs),
                     batch_mean=mean, batch_std=std,
                     batch_histories=tuple((r.history_mean, r.history_min) for r in runs))


def cost_surface_beta_delta(dataset: Dataset, winner: Candidate, cfg: FitConfig = FitConfig(), *,
                            n_beta: int = 17, n_delta: int = 17, D0: Optional[float] = None):
    """Cost over the (beta, delta) search box with the other genes held at ``winner``.

    Returns ``(betas, deltas, F)`` with ``F[i, j]`` at ``(betas[j], deltas[i])``.
    ``D0`` defaults to the bottom of its range.
    """
    rb, rd = cfg.ranges["beta"], cfg.ranges["delta"]
    betas = np.geomspace(rb.min, rb.max, n_beta)
    deltas = np.linspace(rd.min, rd.max, n_delta)
    base = winner.as_array()
    base[GENE_NAMES.index("D0")] = cfg.ranges["D0"].min if D0 is None else D0
    rows = []
    for d in deltas:
        for b in betas:
            v = base.copy()
            v[1] = b
            v[2] = d
            rows.append(v)
    ctx = _CostContext(dataset.t, dataset.V, dataset.scale, cfg.penalty, cfg)
    F = ctx.evaluate(np.array(rows)).reshape(n_delta, n_beta)
    return betas, deltas, F


# reference vector fitted to the MOI 1.8 experiment
REFERENCE_MOI18 = Candidate(B=78.0, beta=1e-8, delta=1.0, alpha=0.1827, iota=0.0027, gamma=0.0154,
                            V0=1.5e6, D0=1.0)
SYNTHETIC_TIMES = (0.0, 4.0, 8.0, 12.0, 16.0, 20.0, 24.0, 30.0, 36.0, 42.0, 48.0, 54.0, 60.0, 72.0,
                   84.0, 96.0, 108.0, 120.0)


def simulate_titer(candidate: Candidate, t, scale: float = 1e6, cfg: Optional[FitConfig] = None) -> np.ndarray:
    """Raw titer ``V(t) * scale`` for a candidate, via the public integrator."""
    from .integrator import IntegratorConfig, integrate
    from .model import initial_state

    cfg = FitConfig() if cfg is None else cfg
    t = np.asarray(t, dtype=float)
    icfg = IntegratorConfig(rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
                            extinction_threshold=cfg.extinction_threshold, t_max=float(t.max()),
                            sample_dt=None, max_steps=cfg.max_steps)
    x0 = initial_state(candidate.V0 / scale, candidate.D0 / scale)
    traj = integrate(x0, candidate.params(), icfg, t_eval=t[t > 0])
    out = np.empty(t.size)
    for i, ti in enumerate(t):
        idx = np.flatnonzero(traj.t == ti)
        out[i] = traj.states[idx[0], 4] * scale if idx.size else traj.terminal_state.V * scale
    return out


def synthetic_dataset(candidate: Candidate = REFERENCE_MOI18, t=SYNTHETIC_TIMES, *, noise: float = 0.05,
                      seed: int = 0, scale: float = 1e6, moi_label: Optional[float] = 1.8) -> Dataset:
    """Noisy titers from a known candidate: ``V_i * exp(noise * N(0, 1))``."""
    v = simulate_titer(candidate, t, scale)
    rng = np.random.default_rng(seed)
    v = v * np.exp(noise * rng.standard_normal(v.size))
    return Dataset(t=np.asarray(t, dtype=float), V=v, moi_label=moi_label, scale=scale)
