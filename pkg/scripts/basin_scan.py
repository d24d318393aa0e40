"""Basins of attraction over (V0, D0) for the two tristable parameter sets."""

import argparse
import time
from pathlib import Path

from hvdvg.integrator import IntegratorConfig, classify_omega_limit, integrate
from hvdvg.io import atomic_write_text, write_json
from hvdvg.model import initial_state
from hvdvg.scans import basin_V0_D0, scan_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=41)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--out", default="results/basins")
    args = ap.parse_args()
    out = Path(args.out)
    for panel in ("a", "b"):
        spec = basin_V0_D0(panel, args.steps)
        t0 = time.perf_counter()
        res = scan_grid(spec, workers=args.workers)
        atomic_write_text(out / f"basin_{panel}.csv", res.to_csv_text())
        write_json(out / f"basin_{panel}.json", {**res.sidecar(), "seconds": time.perf_counter() - t0})
        print(panel, res.counts(), f"{time.perf_counter() - t0:.1f} s")
    # the three self-curing time series shown next to panel a
    p = basin_V0_D0("a", 3).params
    for V0, D0 in ((0.10, 0.32), (0.001, 0.920), (0.1, 0.1), (1e-3, 1e-3), (1e-3, 0.9), (1e-3, 0.5)):
        tr = integrate(initial_state(V0, D0), p, IntegratorConfig())
        print(f"V0={V0:g} D0={D0:g} -> {classify_omega_limit(tr).value}")


if __name__ == "__main__":
    main()
