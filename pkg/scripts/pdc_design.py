"""PDC as a function of the ramp rate mu, against the h = inf bound mu / (mu + D(f0 || f_theta*)).

    python3 scripts/pdc_design.py [--theta-star 0.4] [--h inf]
"""

import argparse
import math

import numpy as np

from deqcd.detectors import DetectorParams
from deqcd.distributions import FamilySpec, kl
from deqcd.simulation import pdc_bound, estimate_pdc_renewal


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--theta-star", type=float, default=0.4)
    ap.add_argument("--h", type=float, default=math.inf)
    ap.add_argument("--cycles", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    fam = FamilySpec.gaussian_finite([args.theta_star], args.theta_star)
    d = kl(fam.pre, fam.control_density)
    print(f"{'mu':>8} {'pdc':>8} {'se':>8} {'bound':>8}")
    for mu in np.geomspace(0.01, 1.0, 9):
        est = estimate_pdc_renewal(fam, DetectorParams(1.0, mu=float(mu), h=args.h), args.cycles, args.seed)
        print(f"{mu:8.4f} {est.value:8.4f} {est.se:8.4f} {pdc_bound(float(mu), d):8.4f}")
    # mu that gives a bound of 1/2 is D(f0 || f_theta*) itself
    print(f"mu for a 0.5 bound: {d:.4f}")


if __name__ == "__main__":
    main()
