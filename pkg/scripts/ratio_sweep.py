"""Outcome of single passages across iota/alpha at fixed burst parameters."""

import argparse
from pathlib import Path

from hvdvg.integrator import IntegratorConfig, integrate, trajectory_to_csv
from hvdvg.model import InoculumSpec, ModelParams, inoculum_state


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/ratio_sweep")
    args = ap.parse_args()
    x0 = inoculum_state(InoculumSpec(m=1.0, qV0=0.5))
    for r in (0.01, 0.1, 1.0, 10.0):
        p = ModelParams.from_ratio(B=100, beta=0.01, delta=10, iota_over_alpha=r)
        tr = integrate(x0, p, IntegratorConfig(sample_dt=0.1))
        trajectory_to_csv(tr, Path(args.out) / f"ratio_{r:g}.csv")
        s = tr.terminal_state
        print(f"iota/alpha={r:g}: V_f={s.V:.4g} D_f={s.D:.4g} D_f/V_f={s.D / s.V:.3g} t_end={tr.terminal_time:.1f}")


if __name__ == "__main__":
    main()
