"""Bankruptcy of the doubling scheme over random uniform classes.

    python3 scripts/uniform_guarantee.py --eta 0.1 --classes 200 --trials 2000
"""

import argparse
import json

from insurelab.classes import sample_uniform_class
from insurelab.harness import estimate_bankruptcy, pool_reports
from insurelab.schemes import doubling_scheme


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eta", type=float, default=0.1)
    ap.add_argument("--max-M", type=int, default=50)
    ap.add_argument("--classes", type=int, default=200)
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--horizon", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()

    scheme = doubling_scheme(a.eta)
    reports = []
    for i in range(a.classes):
        p = sample_uniform_class([a.seed, i], a.max_M)
        reports.append(estimate_bankruptcy(p, scheme, a.horizon, a.trials, seed=a.seed + i))
    pooled = pool_reports(reports, a.seed)
    worst = max(reports, key=lambda r: r.estimate)
    print(json.dumps({"pooled": pooled.to_dict(), "worst_class_rate": worst.estimate,
                      "eta": a.eta}, indent=2))


if __name__ == "__main__":
    main()
