#!/usr/bin/env python3
"""Print the working-point table and compare against the entangled register.

For each m level of a spin-J probe: the steepest kappa*T point of the
phi = pi fringe, the shift-resolution coefficient, and the resolution for a
given (N, tau, T).  The entangled N-ion comparison line follows.
"""

import argparse
import math

from ddspin.sensitivity import entangled_benchmark, optimal_working_point
from ddspin.spin_algebra import SpinSystem, as_twice


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--J", default="7/2")
    ap.add_argument("--phi", type=float, default=math.pi)
    ap.add_argument("--N", type=int, default=1)
    ap.add_argument("--tau", type=float, default=1.0, help="total time, s")
    ap.add_argument("--T", type=float, default=1.0, help="Ramsey time, s")
    args = ap.parse_args()

    sys = SpinSystem(as_twice(args.J))
    scale = math.sqrt(args.N * args.tau * args.T)
    print(f"J = {sys.twice_j}/2, phi = {args.phi:.6f}, "
          f"N = {args.N}, tau = {args.tau} s, T = {args.T} s")
    print(f"{'m':>6} {'chi_m rad':>10} {'coeff rad':>10} {'dkappa rad/s':>13}")
    for twice_m in range(sys.twice_j % 2 or 2, sys.twice_j + 1, 2):
        report = optimal_working_point(sys, twice_m, args.phi)
        print(f"{twice_m:>4}/2 {report.chi_m:>10.4f} "
              f"{report.delta_kappa_coeff:>10.4f} "
              f"{report.delta_kappa_coeff / scale:>13.4e}")
    if args.N >= 2 and args.N % 2 == 0:
        bench = entangled_benchmark(args.N)
        print(f"entangled N={args.N}: coeff {bench.delta_kappa_coeff:.4f}, "
              f"dkappa {bench.delta_kappa_coeff / math.sqrt(args.tau * args.T):.4e} rad/s")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
