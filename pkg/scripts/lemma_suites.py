"""Run every lemma suite and print one JSON report per suite.

    python3 scripts/lemma_suites.py --trials 100000
"""

import argparse
import json

from insurelab import harness


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=100_000, help="random cases for dist and dpq")
    ap.add_argument("--mc-trials", type=int, default=20_000, help="samples per concentration config")
    ap.add_argument("--jn-instances", type=int, default=60)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()

    reps = [harness.check_lemma_dist(a.trials, a.seed),
            harness.check_lemma_dpq(a.trials, a.seed),
            harness.check_yeung_grid(trials=a.mc_trials, seed=a.seed),
            harness.check_base_grid(trials=a.mc_trials, seed=a.seed),
            harness.check_jn_suite(a.jn_instances, a.seed)]
    for r in reps:
        print(json.dumps(r.to_dict()))
    raise SystemExit(0 if all(r.passed for r in reps) else 2)


if __name__ == "__main__":
    main()
