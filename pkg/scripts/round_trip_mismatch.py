"""Count first-bankruptcy disagreements after domination -> insurance -> domination.

Premiums set to the dominants let the insurer bank surplus, so the rebuilt
scheme can survive a loss that broke the original; it never fails earlier.

    python3 scripts/round_trip_mismatch.py --cases 10000
"""

import argparse
import json

import numpy as np

from insurelab.schemes import (TableScheme, bankruptcy_step, domination_from_insurance,
                               doubling_scheme, insurance_from_domination)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()

    rng = np.random.default_rng(a.seed)
    counts = {"doubling": [0, 0], "table": [0, 0]}
    earlier = 0
    for _ in range(a.cases):
        if rng.random() < 0.5:
            kind, phi = "doubling", doubling_scheme(float(rng.uniform(0.02, 0.5)))
        else:
            kind = "table"
            phi = TableScheme([None] * int(rng.integers(0, 5))
                              + rng.integers(0, 12, size=int(rng.integers(1, 8))).tolist())
        x = rng.integers(0, 13, size=int(rng.integers(1, 31)))
        s0 = bankruptcy_step(phi, x)
        s1 = bankruptcy_step(domination_from_insurance(insurance_from_domination(phi)), x)
        counts[kind][0] += 1
        counts[kind][1] += s0 != s1
        earlier += s1 is not None and (s0 is None or s1 < s0)
    print(json.dumps({k: {"cases": c, "mismatches": m} for k, (c, m) in counts.items()}
                     | {"rebuilt_fails_earlier": earlier}, indent=2))


if __name__ == "__main__":
    main()
