"""Cost over the (beta, delta) search box at a fitted vector, D0 at the bottom of its range."""

import argparse
import json
from pathlib import Path

import numpy as np

from hvdvg.fitting import REFERENCE_MOI18, Candidate, FitConfig, cost_surface_beta_delta, synthetic_dataset
from hvdvg.io import atomic_write_text


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--winner", help="result JSON from ga_recovery.py (default: the reference vector)")
    ap.add_argument("--n", type=int, default=33)
    ap.add_argument("--out", default="results/surface")
    args = ap.parse_args()
    ds = synthetic_dataset()
    w = REFERENCE_MOI18
    if args.winner:
        w = Candidate(**json.loads(Path(args.winner).read_text())["result"]["best"])
    betas, deltas, F = cost_surface_beta_delta(ds, w, FitConfig(), n_beta=args.n, n_delta=args.n)
    lines = ["beta,delta,F"] + [f"{b:.17g},{d:.17g},{F[i, j]:.17g}"
                                for i, d in enumerate(deltas) for j, b in enumerate(betas)]
    atomic_write_text(Path(args.out) / "beta_delta.csv", "\n".join(lines) + "\n")
    F0 = F[0, 0]
    for j in range(0, args.n, max(1, args.n // 8)):
        col = F[:, j]
        print(f"beta={betas[j]:.2g}: F in [{col.min():.4f}, {col.max():.4f}] "
              f"(max change {100 * np.max(np.abs(col - F0)) / abs(F0):.2f}%)")


if __name__ == "__main__":
    main()
