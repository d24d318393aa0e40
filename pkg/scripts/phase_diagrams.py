"""Phase diagrams in (qV0, B) and (qV0, delta) for several inoculum sizes."""

import argparse
from pathlib import Path

from hvdvg.io import atomic_write_text, write_json
from hvdvg.scans import phase_diagram_qv0_B, phase_diagram_qv0_delta, scan_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=101)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--m", type=float, nargs="+", default=[0.1, 1.0, 10.0])
    ap.add_argument("--out", default="results/phase")
    args = ap.parse_args()
    out = Path(args.out)
    for m in args.m:
        for name, spec in (("qv0_B", phase_diagram_qv0_B(m, args.steps)),
                           ("qv0_delta", phase_diagram_qv0_delta(m, steps=args.steps))):
            res = scan_grid(spec, workers=args.workers)
            stem = f"{name}_m{m:g}"
            atomic_write_text(out / f"{stem}.csv", res.to_csv_text())
            write_json(out / f"{stem}.json", res.sidecar())
            print(stem, res.counts())


if __name__ == "__main__":
    main()
