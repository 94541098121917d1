#!/usr/bin/env python3
"""Full-scale order-penalty ratio sweep. Long-running; not part of CI.

Sweeps block sizes from 100 to 6000 transactions across conflict densities
from 0.001% to 25%, 100 samples per cell, and writes one CSV row per cell.
"""

from __future__ import annotations

import argparse
import sys
import time

from blocksched.analysis import study_to_csv, vulnerability_study

DEFAULT_NS = [100, 200, 300, 400, 500, 750, 1000, 1500, 2000, 2500, 3000, 4000, 5000, 6000]
DEFAULT_PS = [0.00001, 0.0001, 0.001, 0.005, 0.01, 0.05, 0.10, 0.25]


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="CSV output path")
    parser.add_argument("--samples", type=int, default=100)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--ns", default=",".join(str(n) for n in DEFAULT_NS))
    parser.add_argument("--ps", default=",".join(str(p) for p in DEFAULT_PS))
    args = parser.parse_args()

    ns = [int(x) for x in args.ns.split(",") if x]
    ps = [float(x) for x in args.ps.split(",") if x]
    cells = []
    started = time.time()
    for n in ns:
        for p in ps:
            t0 = time.time()
            cells.extend(
                vulnerability_study([n], [p], args.samples, args.seed, workers=args.workers)
            )
            print(
                f"n={n} p={p}: mean={cells[-1].mean_ratio:.2f} ({time.time() - t0:.0f}s)",
                flush=True,
            )
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(study_to_csv(cells))
    print(f"wrote {len(cells)} cells to {args.out} in {time.time() - started:.0f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
