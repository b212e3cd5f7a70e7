"""Two-point attack on the doubling scheme: certificate, exact value and Monte Carlo.

    python3 scripts/allzero_attack.py --eta 0.25 --horizons 9 50 200
"""

import argparse
import json

from insurelab.adversary import attack_allzero, exact_allzero_bankruptcy
from insurelab.harness import estimate_bankruptcy
from insurelab.schemes import doubling_scheme


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--eta", type=float, default=0.25, help="scheme eta and attack target")
    ap.add_argument("--horizons", type=int, nargs="*", default=[])
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()

    scheme = doubling_scheme(a.eta)
    cert = attack_allzero(scheme, a.eta)
    rows = []
    for h in sorted({cert.M, *a.horizons}):
        if h < cert.M:
            continue
        mc = estimate_bankruptcy(cert.adversarial_p, scheme, h, a.trials, a.seed)
        rows.append({"horizon": h, "exact": exact_allzero_bankruptcy(scheme, cert, h),
                     "mc": mc.estimate, "wilson95": [mc.wilson_95_low, mc.wilson_95_high]})
    print(json.dumps({"certificate": cert.to_dict(), "bankruptcy": rows}, indent=2))


if __name__ == "__main__":
    main()
