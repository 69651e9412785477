#!/usr/bin/env python3
"""Size sweep of the iterated-halving construction on interval families.

Prints, per ground-set size, the construction's output size and success rate
in both sampling modes; the i.i.d. column shows the ground-set-independent
behaviour of the size recursion (the without-replacement column caps at n
whenever the requested size exceeds what a subset can hold).

    python scripts/halving_sweep.py [--eps 0.1] [--delta 0.25] [--gamma 0.1]
"""

import argparse
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from relapprox.errors import RetriesExhausted  # noqa: E402
from relapprox.generators import ImplicitIntervals  # noqa: E402
from relapprox.halving import certified_halving  # noqa: E402
from relapprox.sampling import WITH, WITHOUT, ApproxParams  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--delta", type=float, default=0.25)
    ap.add_argument("--gamma", type=float, default=0.1)
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--sizes", type=int, nargs="+", default=[10**3, 10**4, 10**5])
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    params = ApproxParams(args.eps, args.delta, args.gamma)
    print(f"eps={args.eps} delta={args.delta} gamma={args.gamma}, {args.trials} trials per cell")
    print(f"{'n':>8}  {'mode':>8}  {'mean t':>10}  {'success':>8}  {'secs':>6}")
    for n in args.sizes:
        family = ImplicitIntervals(n)
        for mode in (WITHOUT, WITH):
            started = time.time()
            sizes, ok = [], 0
            for i in range(args.trials):
                try:
                    sample = certified_halving(
                        family, params, seed=(args.seed, n, i), max_retries=1, mode=mode
                    )
                except RetriesExhausted:
                    continue
                ok += 1
                sizes.append(sample.t)
            mean = sum(sizes) / len(sizes) if sizes else float("nan")
            print(
                f"{n:>8}  {mode:>8}  {mean:>10.0f}  {ok}/{args.trials:<5}  "
                f"{time.time() - started:>6.1f}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
