#!/usr/bin/env python3
"""Run every named scenario and collect the verdicts.

Usage:
    python scripts/run_all_scenarios.py [--out DIR] [--seed N]

Writes each scenario's CSVs under DIR/<scenario>/ and prints a one-line
verdict per scenario; exits nonzero if any scenario assertion failed.
"""

import argparse
import os
import sys
import time

from gfn_lab.scenarios import SCENARIO_NAMES, ScenarioConfig, run_scenario


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="out")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    failures = []
    for name in SCENARIO_NAMES:
        cfg = ScenarioConfig(name, seed=args.seed,
                             out=os.path.join(args.out, name))
        t0 = time.time()
        res = run_scenario(cfg)
        n_ok = sum(a.passed for a in res.assertions)
        print(f"{name:20s} {'PASS' if res.passed else 'FAIL':4s} "
              f"{n_ok}/{len(res.assertions)} assertions "
              f"({time.time() - t0:5.1f}s, {len(res.files)} files)")
        if not res.passed:
            failures.append(name)
            for a in res.assertions:
                if not a.passed:
                    print(f"    FAIL {a.name}: {a.observed} (want {a.threshold})")
    if failures:
        print(f"\nfailed scenarios: {', '.join(failures)}")
        return 1
    print("\nall scenarios passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
