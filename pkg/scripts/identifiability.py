"""Local identifiability of the fitted genes from the log-titer residuals.

The Fisher information of the residual vector (log-parameter coordinates,
noise sd 0.05) gives the smallest relative errors any estimator can reach
at a given sampling design. Any GA result files passed on the command
line are re-scored on the synthetic dataset next to the true vector.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from hvdvg.fitting import REFERENCE_MOI18, SYNTHETIC_TIMES, Candidate, cost_F, simulate_titer, synthetic_dataset

FREE = ("B", "alpha", "iota", "gamma", "V0")


def log_titer(cand, t):
    return np.log(simulate_titer(cand, t))


def fisher_errors(cand, t, sd=0.05, h=1e-5):
    base = cand.to_dict()
    cols = []
    for n in FREE:
        up = Candidate(**{**base, n: base[n] * np.exp(h)})
        dn = Candidate(**{**base, n: base[n] * np.exp(-h)})
        cols.append((log_titer(up, t) - log_titer(dn, t)) / (2 * h))
    J = np.column_stack(cols)
    cov = np.linalg.inv(J.T @ J / sd**2)
    return dict(zip(FREE, np.sqrt(np.diag(cov))))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("winners", nargs="*", help="result JSON files from ga_recovery.py")
    args = ap.parse_args()
    designs = {
        "18-point design": np.array(SYNTHETIC_TIMES),
        "every 2 h to 120 h": np.arange(0.0, 121.0, 2.0),
        "every 1 h to 120 h": np.arange(0.0, 121.0, 1.0),
    }
    for name, t in designs.items():
        err = fisher_errors(REFERENCE_MOI18, t)
        print(f"{name:>20}: " + ", ".join(f"{n} {100 * e:.0f}%" for n, e in err.items()))
    ds = synthetic_dataset()
    print(f"truth: F = {cost_F(REFERENCE_MOI18, ds):.4f}")
    for path in args.winners:
        res = json.loads(Path(path).read_text())["result"]
        for b in res.get("batches") or [{"best": res["best"]}]:
            c = Candidate(**b["best"])
            print(f"{path}: F = {cost_F(c, ds):.4f}  B = {c.B:.4g}  beta = {c.beta:.3g}  eta = {c.B / (1 + c.beta):.4g}")


if __name__ == "__main__":
    main()
