"""Command-line entry point.

Every command reads a JSON run configuration, writes its artifacts into the
output directory (``--out-dir``, else ``$HVDVG_OUTPUT_DIR``, else
``./hvdvg_out``) and prints a one-line JSON summary on stdout. Failures
print a JSON error object on stderr; configuration errors exit with 2,
runtime failures with 1.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .equilibria import is_attracting, stability_case
from .estimates import NotApplicableError, estimate_rates, final_state_identity
from .integrator import IntegrationError, IntegratorConfig, classify_omega_limit, integrate, trajectory_to_csv
from .model import InoculumSpec, ModelParams, ParameterError, inoculum_state

COMMANDS = ("simulate", "scan", "cloud", "estimate", "sensitivity", "fit", "spectrum")
ENV_OUTPUT_DIR = "HVDVG_OUTPUT_DIR"

# allowed keys and defaults of each command block
BLOCK_DEFAULTS = {
    "simulate": {"t_eval": None, "name": "trajectory"},
    "scan": {"x_axis": None, "y_axis": None, "name": "scan"},
    "cloud": {"x_axis": None, "y_axis": None, "name": "cloud"},
    "estimate": {"approximate": False, "name": "estimate"},
    "sensitivity": {"subject": "beta", "t_eval": None, "fd_check": False, "name": "sensitivity"},
    "fit": {"data": None, "ga": {}, "surface": False, "name": "fit"},
    "spectrum": {"point": None, "plane": None, "name": "spectrum"},
}
NEEDS_MODEL = set(COMMANDS) - {"fit"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: Optional[ModelParams] = None
    inoculum: InoculumSpec = field(default_factory=lambda: InoculumSpec(m=1.0, qV0=0.5))
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; choose from {COMMANDS}")
        if self.command in NEEDS_MODEL and self.model is None:
            raise ConfigError(f"command {self.command!r} needs a 'model' block")
        allowed = BLOCK_DEFAULTS[self.command]
        unknown = set(self.options) - set(allowed)
        if unknown:
            raise ConfigError(f"unknown {self.command} options: {sorted(unknown)}")
        merged = dict(allowed)
        merged.update(self.options)
        object.__setattr__(self, "options", merged)

    def to_dict(self) -> dict:
        d = {"command": self.command}
        if self.model is not None:
            d["model"] = self.model.to_dict()
        d["inoculum"] = self.inoculum.to_dict()
        d["integrator"] = self.integrator.to_dict()
        d[self.command] = self.options
        return d

    @classmethod
    def from_dict(cls, d: dict) -> RunConfig:
        if not isinstance(d, dict):
            raise ConfigError("configuration must be a JSON object")
        io.check_schema(d)
        cmd = d.get("command")
        if cmd not in COMMANDS:
            raise ConfigError(f"unknown or missing command {cmd!r}; choose from {COMMANDS}")
        unknown = set(d) - {"schema_version", "command", "model", "inoculum", "integrator", cmd}
        if unknown:
            raise ConfigError(f"unknown top-level fields: {sorted(unknown)}")
        kw = {"command": cmd, "options": dict(d.get(cmd) or {})}
        if "model" in d:
            kw["model"] = ModelParams.from_dict(d["model"])
        if "inoculum" in d:
            kw["inoculum"] = InoculumSpec.from_dict(d["inoculum"])
        if "integrator" in d:
            kw["integrator"] = IntegratorConfig.from_dict(d["integrator"])
        return cls(**kw)


def load_config(path) -> RunConfig:
    try:
        doc = io.read_json(path)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except io.FormatError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig.from_dict(doc)


def output_dir(flag: Optional[str]) -> Path:
    return Path(flag or os.environ.get(ENV_OUTPUT_DIR) or "hvdvg_out")


# --- command implementations -------------------------------------------------

def _simulate(rc: RunConfig, out: Path, args):
    opt = rc.options
    traj = integrate(inoculum_state(rc.inoculum), rc.model, rc.integrator, t_eval=opt["t_eval"])
    csv_path = out / f"{opt['name']}.csv"
    json_path = out / f"{opt['name']}.json"
    trajectory_to_csv(traj, csv_path)
    s = traj.terminal_state
    info = {
        "extinction": traj.extinction.to_dict(),
        "terminal_time": traj.terminal_time,
        "terminated_by": traj.terminated_by,
        "terminal_state": s._asdict(),
        "omega_limit": classify_omega_limit(traj).value,
        "iv": traj.iv_accum,
        "idv": traj.idv_accum,
        "config": rc.to_dict(),
    }
    io.write_json(json_path, info)
    return {"outputs": [str(csv_path), str(json_path)], "omega_limit": info["omega_limit"],
            "Vf": s.V, "Df": s.D, "terminal_time": traj.terminal_time}


def _grid_spec(rc: RunConfig):
    from .scans import Axis, GridSpec

    opt = rc.options
    if opt["x_axis"] is None or opt["y_axis"] is None:
        raise ConfigError(f"{rc.command} needs x_axis and y_axis")
    return GridSpec(Axis.from_dict(opt["x_axis"]), Axis.from_dict(opt["y_axis"]), rc.model, rc.inoculum)


def _scan(rc: RunConfig, out: Path, args):
    from .scans import scan_grid

    res = scan_grid(_grid_spec(rc), rc.integrator, workers=args.threads)
    csv_path = out / f"{rc.options['name']}.csv"
    side = out / f"{rc.options['name']}.json"
    io.atomic_write_text(csv_path, res.to_csv_text())
    payload = res.sidecar()
    payload["config"] = rc.to_dict()
    io.write_json(side, payload)
    return {"outputs": [str(csv_path), str(side)], "counts": res.counts()}


def _cloud(rc: RunConfig, out: Path, args):
    from .scans import cloud_to_csv_text, end_state_cloud

    pts = end_state_cloud(_grid_spec(rc), rc.integrator, workers=args.threads)
    csv_path = out / f"{rc.options['name']}.csv"
    side = out / f"{rc.options['name']}.json"
    io.atomic_write_text(csv_path, cloud_to_csv_text(pts))
    io.write_json(side, {"config": rc.to_dict(), "n": len(pts)})
    return {"outputs": [str(csv_path), str(side)], "n": len(pts)}


def _estimate(rc: RunConfig, out: Path, args):
    traj = integrate(inoculum_state(rc.inoculum), rc.model, rc.integrator)
    rep = estimate_rates(traj, approximate=bool(rc.options["approximate"]))
    payload = {"report": rep.to_dict(), "config": rc.to_dict()}
    try:
        chk = final_state_identity(traj)
        payload["final_state"] = {
            "vf_plus_df": chk.vf_plus_df, "residual_iv": chk.residual_iv,
            "residual_idv": chk.residual_idv, "bounds": list(chk.bounds),
            "within_bounds": chk.within_bounds, "expected_next_passage_moi": chk.next_passage_moi,
        }
    except NotApplicableError as exc:
        payload["final_state"] = {"not_applicable": str(exc)}
    path = out / f"{rc.options['name']}.json"
    io.write_json(path, payload)
    return {"outputs": [str(path)], "alpha_hat": rep.alpha_hat, "iota_hat": rep.iota_hat,
            "efficiency": rep.efficiency}


def _sensitivity(rc: RunConfig, out: Path, args):
    from .sensitivity import fd_check, sensitivity_to_csv_text, variational_wrt_ic, variational_wrt_param

    opt = rc.options
    x0 = inoculum_state(rc.inoculum)
    if opt["subject"] == "ic":
        st = variational_wrt_ic(x0, rc.model, rc.integrator, t_eval=opt["t_eval"])
    else:
        st = variational_wrt_param(x0, rc.model, opt["subject"], rc.integrator, t_eval=opt["t_eval"])
    csv_path = out / f"{opt['name']}.csv"
    io.atomic_write_text(csv_path, sensitivity_to_csv_text(st))
    summary = {"outputs": [str(csv_path)], "subject": opt["subject"]}
    if opt["fd_check"]:
        t = st.trajectory.extinction.t_C or float(st.t[-1])
        subj = opt["subject"]
        if subj == "ic":
            reps = [fd_check(j, x0, rc.model, rc.integrator, t=t) for j in range(6)]
        else:
            reps = [fd_check(subj, x0, rc.model, rc.integrator, t=t)]
        path = out / f"{opt['name']}_fd.json"
        io.write_json(path, {"checks": [{"subject": r.subject, "t": r.t, "table": r.table(),
                                         "passed": r.passed} for r in reps]})
        summary["outputs"].append(str(path))
        summary["fd_passed"] = all(r.passed for r in reps)
    return summary


def _fit(rc: RunConfig, out: Path, args):
    from .fitting import FitConfig, batch_fit, cost_surface_beta_delta, ga_fit

    opt = rc.options
    data_path = args.data or opt["data"]
    if not data_path:
        raise ConfigError("fit needs a dataset (--data or fit.data)")
    ds = io.load_dataset(data_path)
    fit_block = dict(opt["ga"])
    if args.seed is not None:
        fit_block["rng_seed"] = args.seed
    if args.batches is not None:
        fit_block["batches"] = args.batches
    cfg = FitConfig.from_dict(fit_block)
    res = batch_fit(ds, cfg, threads=args.threads) if cfg.batches >= 2 else ga_fit(ds, cfg, threads=args.threads)
    payload = {"result": res.to_dict(), "fit_config": cfg.to_dict(), "config": rc.to_dict(),
               "dataset": {"path": str(data_path), "n": ds.n, "scale": ds.scale, "moi_label": ds.moi_label}}
    if opt["surface"]:
        b, d, F = cost_surface_beta_delta(ds, res.best, cfg)
        payload["beta_delta_surface"] = {"beta": b, "delta": d, "F": F}
    path = Path(args.out) if args.out else out / f"{opt['name']}.json"
    io.write_json(path, payload)
    return {"outputs": [str(path)], "cost": res.cost, "best": res.best.to_dict()}


def _spectrum(rc: RunConfig, out: Path, args):
    from .integrator import PlaneClass

    opt = rc.options
    if opt["point"] is None:
        traj = integrate(inoculum_state(rc.inoculum), rc.model, rc.integrator)
        point = np.asarray(traj.terminal_state)
    else:
        point = np.asarray(opt["point"], dtype=float)
    plane = PlaneClass(opt["plane"]) if opt["plane"] else None
    ok, spec = is_attracting(point, rc.model, plane)
    case = stability_case(rc.model)
    payload = {
        "point": point, "plane": spec.plane.value, "eigenvalues": list(spec.eigenvalues),
        "critical": spec.critical, "discriminant": spec.discriminant, "attracting": ok,
        "stability_case": case.case_id, "degenerate": case.degenerate, "config": rc.to_dict(),
    }
    path = out / f"{opt['name']}.json"
    io.write_json(path, payload)
    return {"outputs": [str(path)], "plane": spec.plane.value, "attracting": ok}


HANDLERS = {
    "simulate": _simulate, "scan": _scan, "cloud": _cloud, "estimate": _estimate,
    "sensitivity": _sensitivity, "fit": _fit, "spectrum": _spectrum,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hvdvg", description="HV/DVG infection simulator and analysis tools")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for scans and fits")
    ap.add_argument("--out-dir", default=None, help=f"output directory (default ${ENV_OUTPUT_DIR} or ./hvdvg_out)")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=name != "fit", help="run configuration JSON")
        if name == "fit":
            sp.add_argument("--data", help="titer CSV with header t_hpi,pfu_per_ml")
            sp.add_argument("--seed", type=int, help="base RNG seed")
            sp.add_argument("--batches", type=int, help="number of independent GA batches")
            sp.add_argument("--out", help="result JSON path")
    return ap


def _emit_error(kind: str, exc: BaseException, code: int) -> int:
    sys.stderr.write(json.dumps({"status": "error", "kind": kind, "type": type(exc).__name__,
                                 "message": str(exc)}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.config:
            rc = load_config(args.config)
            if rc.command != args.command:
                raise ConfigError(f"config is for {rc.command!r}, not {args.command!r}")
        else:
            rc = RunConfig(command=args.command)
        out = output_dir(args.out_dir)
        summary = HANDLERS[rc.command](rc, out, args)
    except NotApplicableError as exc:
        return _emit_error("not_applicable", exc, 1)
    except (ConfigError, ParameterError, io.FormatError, io.ValidationError) as exc:
        return _emit_error("config", exc, 2)
    except IntegrationError as exc:
        return _emit_error("integration", exc, 1)
    except OSError as exc:
        return _emit_error("io", exc, 1)
    line = {"status": "ok", "command": rc.command}
    line.update(summary)
    sys.stdout.write(json.dumps(io._jsonable(line)) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
