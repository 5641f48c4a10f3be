"""Delay gap between GDECuSum and GCuSum across thresholds, with the analytic gap bound.

    python3 scripts/delay_gap.py [--h 12.5] [--mu 0.08] [--trials 4000]
"""

import argparse

from deqcd.detectors import DetectorParams, DetectorSpec
from deqcd.distributions import FamilySpec
from deqcd.simulation import TrialConfig, delay_gap_bound, estimate_cadd, estimate_q_theta


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--h", type=float, default=12.5)
    ap.add_argument("--mu", type=float, default=0.08)
    ap.add_argument("--theta-true", type=float, default=0.6)
    ap.add_argument("--trials", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    fam = FamilySpec.gaussian_finite([0.4, 0.6, 0.8, 1.0], 0.4)
    q = estimate_q_theta(fam, args.theta_true, seed=args.seed)
    print(f"q = {q.value:.4f} (se {q.se:.4f}), gap bound = {delay_gap_bound(q.value, args.h, args.mu):.1f}")
    grid = [1, 5, 25, 100]
    for A in (2.0, 4.0, 6.0, 8.0, 10.0):
        gc = estimate_cadd(TrialConfig(fam, DetectorSpec("gcusum", DetectorParams(A)), theta_true=args.theta_true,
                                       seed=args.seed), grid, args.trials)
        gd_spec = DetectorSpec("gdecusum", DetectorParams(A, mu=args.mu, h=args.h))
        gd = estimate_cadd(TrialConfig(fam, gd_spec, theta_true=args.theta_true, seed=args.seed), grid,
                           args.trials, skip_probes=[25, 100])
        print(f"A={A:5.1f}  gcusum {gc.value:7.2f} @{gc.argmax:<8} gdecusum {gd.value:7.2f} @{gd.argmax:<8}"
              f" gap {gd.value - gc.value:6.2f}")


if __name__ == "__main__":
    main()
