"""Compare the antichain opacity checker against the subset-construction oracle.

Sweeps seeded random systems larger than the test suite uses and reports
disagreements and timings.

    python scripts/oracle_sweep.py --seeds 2000 --max-states 8
"""

import argparse
import time
from fractions import Fraction

from netopacity.bundled import random_fts
from netopacity.opacity import verify_opacity, verify_opacity_bruteforce


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=500)
    ap.add_argument("--max-states", type=int, default=8)
    ap.add_argument("--max-inputs", type=int, default=3)
    ap.add_argument("--max-output", type=int, default=3)
    ap.add_argument("--deltas", type=Fraction, nargs="+", default=[Fraction(0), Fraction(1, 2), Fraction(1)])
    args = ap.parse_args()

    fast_t = slow_t = 0.0
    bad, leaks, total = [], 0, 0
    for seed in range(args.seeds):
        ts = random_fts(seed, args.max_states, args.max_inputs, args.max_output)
        for delta in args.deltas:
            t0 = time.perf_counter()
            fast = verify_opacity(ts, delta)
            t1 = time.perf_counter()
            slow = verify_opacity_bruteforce(ts, delta)
            t2 = time.perf_counter()
            fast_t += t1 - t0
            slow_t += t2 - t1
            total += 1
            leaks += not fast.opaque
            if fast.opaque != slow.opaque:
                bad.append((seed, delta))
    print(f"instances: {total}  non-opaque: {leaks}  disagreements: {len(bad)}")
    print(f"antichain: {fast_t:.2f}s  subset construction: {slow_t:.2f}s")
    for seed, delta in bad[:20]:
        print(f"  disagreement at seed={seed} delta={delta}")
    raise SystemExit(1 if bad else 0)


if __name__ == "__main__":
    main()
