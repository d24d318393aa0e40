"""Terminal (V_f, D_f) over a grid of inocula in the globally attracting case."""

import argparse
from pathlib import Path

import numpy as np

from hvdvg.estimates import final_sum_bounds
from hvdvg.io import atomic_write_text
from hvdvg.scans import cloud_m_qv0, cloud_to_csv_text, end_state_cloud


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=61)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--out", default="results/cloud")
    args = ap.parse_args()
    spec = cloud_m_qv0(args.steps)
    pts = end_state_cloud(spec, workers=args.workers)
    atomic_write_text(Path(args.out) / "cloud.csv", cloud_to_csv_text(pts))
    B = spec.params.B
    inside = sum(lo <= p.Vf + p.Df <= hi for p in pts for lo, hi in [final_sum_bounds(B, p.m)])
    print(f"{len(pts)} points, {inside} inside the final-sum bounds")
    for m in np.unique([p.m for p in pts])[:: max(1, args.steps // 6)]:
        row = [p for p in pts if p.m == m]
        print(f"m={m:.3g}: V_f in [{min(p.Vf for p in row):.4g}, {max(p.Vf for p in row):.4g}], "
              f"D_f in [{min(p.Df for p in row):.4g}, {max(p.Df for p in row):.4g}]")


if __name__ == "__main__":
    main()
