"""Run the ring case study for several ring sizes and print a summary table.

    python scripts/reproduce_case_study.py --sizes 2 3 4 --out runs/case_study
"""

import argparse
import time
from fractions import Fraction
from pathlib import Path

from netopacity import pipeline as pl
from netopacity.bundled import generate_ring_config
from netopacity.serialize import write_json


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[2, 3, 4])
    ap.add_argument("--delta", type=Fraction, default=Fraction(1, 2))
    ap.add_argument("--out", type=Path, help="write reports and DOT files here")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    header = f"{'n':>3} {'eta':>6} {'eps_hat':>8} {'states':>7} {'edges':>7} {'opaque@0':>9} {'exit':>5} {'time':>7}"
    print(header)
    print("-" * len(header))
    for n in args.sizes:
        cfg = generate_ring_config(n, args.delta)
        t0 = time.perf_counter()
        dot_dir = args.out / f"ring{n}" if args.out else None
        run = pl.run_pipeline(cfg, seed=args.seed, dot_dir=dot_dir)
        elapsed = time.perf_counter() - t0
        rep = run.report
        comp = rep["composition"] or {}
        opaque = rep["opacity"]["opaque"] if rep["opacity"] else None
        eta = rep["synthesis"]["etas"]["S1"] if rep["synthesis"] else float("nan")
        eps_hat = rep["transfer"]["epsilon_hat"] if rep["transfer"] else float("nan")
        print(f"{n:>3} {eta:>6.3g} {eps_hat:>8.3g} {comp.get('states', '-'):>7} "
              f"{comp.get('transitions', '-'):>7} {str(opaque):>9} {run.exit_code:>5} {elapsed:>6.2f}s")
        if args.out:
            write_json(args.out / f"ring{n}" / "report.json", rep)


if __name__ == "__main__":
    main()
