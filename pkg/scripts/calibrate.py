#!/usr/bin/env python3
"""Build the standard calibration suite and calibrate the size-formula
constants; writes calibration_suite.json and constants.json at the repo root.

Run from the repository root:

    python scripts/calibrate.py [--trials 200] [--workers 2]

The acceptance suite loads constants.json, so re-run this after changing
anything that affects sampling or verification.
"""

import argparse
import json
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from relapprox.harness import (  # noqa: E402
    CalibrationCase,
    calibrate_constants,
    write_constants_json,
)
from relapprox.sampling import ApproxParams  # noqa: E402

REPO_ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..")


def standard_suite() -> list[CalibrationCase]:
    return [
        CalibrationCase(
            "intervals-2000",
            {"family": "implicit_intervals", "n": 2000},
            ApproxParams(0.1, 0.5, 0.2),
            d=2,
            use_for=("c", "c1"),
        ),
        CalibrationCase(
            "intervals-3000",
            {"family": "implicit_intervals", "n": 3000},
            ApproxParams(0.2, 0.3, 0.2),
            d=2,
            use_for=("c", "c1"),
        ),
        CalibrationCase(
            "halfplanes-200",
            {"family": "halfplanes", "points": 200, "seed": 77},
            ApproxParams(0.5, 0.5, 0.25),
            d=3,
            use_for=("c", "c1", "c3"),
        ),
        CalibrationCase(
            # certified dimension: d = ceil(log2 |F|) always satisfies the
            # growth hypothesis, so random families are usable as-is
            "random-1200",
            {"family": "random", "n": 1200, "m": 500, "p": 0.05, "seed": 5},
            ApproxParams(0.4, 0.5, 0.25),
            d=9,
            use_for=("c", "c1"),
        ),
        CalibrationCase(
            "chain-1000",
            {"family": "intervals", "n": 1000},
            ApproxParams(0.2, 0.3, 0.2),
            d=2,
            use_for=("c2", "c3"),
        ),
        CalibrationCase(
            "chain-400",
            {"family": "intervals", "n": 400},
            ApproxParams(0.25, 0.4, 0.25),
            d=2,
            use_for=("c2", "c3"),
        ),
    ]


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--master-seed", type=int, default=20260810)
    ap.add_argument("--workers", type=int, default=2)
    ap.add_argument("--suite-out", default=os.path.join(REPO_ROOT, "calibration_suite.json"))
    ap.add_argument("--out", default=os.path.join(REPO_ROOT, "constants.json"))
    args = ap.parse_args()

    cases = standard_suite()
    with open(args.suite_out, "w") as fh:
        json.dump(
            {
                "trials": args.trials,
                "master_seed": args.master_seed,
                "cases": [c.descriptor() for c in cases],
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    print(f"suite -> {args.suite_out}")

    started = time.time()
    constants, provenance = calibrate_constants(
        cases, args.trials, args.master_seed, workers=args.workers
    )
    write_constants_json(constants, provenance, args.out)
    print(
        f"calibrated in {time.time() - started:.0f}s: "
        f"c={constants.c} c1={constants.c1} c2={constants.c2} c3={constants.c3} "
        f"-> {args.out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
