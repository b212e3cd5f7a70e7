"""Generic capture-and-trap scheme on a finite class.

Reports the first length at which any centroid may capture and, per member,
the entry and bankruptcy rates.  ``--reach`` overrides the default reach
(half the smallest divergence to another member, capped at 1); the default
cannot enter before several million steps.

    python3 scripts/finite_class_generic.py --reach 3 --trials 500
"""

import argparse
import json

from insurelab.classes import quantize_finite_class
from insurelab.dist import Pmf
from insurelab.harness import estimate_bankruptcy
from insurelab.schemes import GenericScheme

MEMBERS = [
    Pmf.uniform(0, 3),
    Pmf.finite([0, 1], [0.7, 0.3]),
    Pmf.point(2),
    Pmf.finite(range(5), [0.3, 0.25, 0.2, 0.15, 0.1]),
    Pmf.uniform(1, 6),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eta", type=float, default=0.2)
    ap.add_argument("--reach", type=float, default=None)
    ap.add_argument("--horizon", type=int, default=10_000)
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()

    scheme = GenericScheme(quantize_finite_class(MEMBERS, reach=a.reach), a.eta)
    out = {"reach": [c.reach for c in scheme.quantization.centroids],
           "first_ready_length": scheme.first_ready_length(), "members": []}
    for i, p in enumerate(MEMBERS):
        rep = estimate_bankruptcy(p, scheme, a.horizon, a.trials, a.seed + i)
        out["members"].append({"p": p.to_dict(), "entry_rate": rep.entry_rate,
                               "bankruptcy": rep.estimate, "wilson95_high": rep.wilson_95_high})
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
