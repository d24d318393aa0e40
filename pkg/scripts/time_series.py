"""Low- and high-MOI time series with and without particle degradation."""

import argparse
from pathlib import Path

from hvdvg.estimates import analytic_high_moi, estimate_rates, final_state_identity
from hvdvg.integrator import IntegratorConfig, PlaneClass, integrate, min_distance_to_plane, trajectory_to_csv
from hvdvg.io import write_json
from hvdvg.model import InoculumSpec, ModelParams, inoculum_state


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/time_series")
    args = ap.parse_args()
    out = Path(args.out)
    p = ModelParams.from_ratio(B=500, beta=1e-6, delta=10, iota_over_alpha=0.1)
    summary = {}
    for m in (0.01, 100.0):
        x0 = inoculum_state(InoculumSpec(m=m, qV0=0.75))
        for gamma in (0.0, 0.01):
            tr = integrate(x0, p.replace(gamma=gamma), IntegratorConfig(sample_dt=0.05, t_max=100.0 if gamma else 1000.0))
            stem = f"m{m:g}_gamma{gamma:g}"
            trajectory_to_csv(tr, out / f"{stem}.csv")
            row = {"extinction": tr.extinction.to_dict(), "terminal_state": tr.terminal_state._asdict()}
            if gamma == 0:
                rep = estimate_rates(tr)
                chk = final_state_identity(tr)
                row.update(alpha_hat=rep.alpha_hat, iota_hat=rep.iota_hat, efficiency=rep.efficiency,
                           vf_plus_df=chk.vf_plus_df, bounds=chk.bounds)
            else:
                row["min_distance_to_VD"] = min_distance_to_plane(tr, PlaneClass.VD)
            summary[stem] = row
            print(stem, row["extinction"])
    summary["analytic_pure_helper_m100"] = analytic_high_moi(p, 100.0, 0.0)
    write_json(out / "summary.json", summary)


if __name__ == "__main__":
    main()
