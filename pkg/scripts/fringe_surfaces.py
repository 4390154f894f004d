#!/usr/bin/env python3
"""Generate the reference fringe surfaces as data files.

Writes P(kappa*T, phi) grids for the J = 7/2 stretch and central levels and
for the J = 5/2, m = -3/2 probe used in the two-ion demonstration, plus the
phi = pi slices with their steepest points marked.
"""

import argparse
import math
from pathlib import Path

import numpy as np

from ddspin.sensitivity import FringeFunction, optimal_working_point
from ddspin.sequence import fringe_grid, write_fringe_grid
from ddspin.spin_algebra import SpinSystem

SURFACES = [
    (7, -7), (7, -1),   # J = 7/2 stretch and central levels
    (5, -3),            # J = 5/2 demonstration probe
]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="fringe_data")
    ap.add_argument("--kt-points", type=int, default=161)
    ap.add_argument("--phi-points", type=int, default=128)
    args = ap.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for twice_j, twice_m in SURFACES:
        sys = SpinSystem(twice_j)
        kt = np.linspace(0.0, math.pi, args.kt_points)
        phi = np.linspace(0.0, 2 * math.pi, args.phi_points, endpoint=False)
        grid = fringe_grid(sys, twice_m, kt, phi)
        name = f"fringe_J{twice_j}half_m{twice_m}half"
        with open(out_dir / f"{name}.csv", "w") as fh:
            write_fringe_grid(fh, kt, phi, grid,
                              [f"J = {twice_j}/2, m = {twice_m}/2"])

        report = optimal_working_point(sys, twice_m, math.pi)
        fringe = FringeFunction(sys, twice_m, math.pi)
        with open(out_dir / f"{name}_slice_phi_pi.csv", "w") as fh:
            fh.write(f"# J = {twice_j}/2, m = {twice_m}/2, phi = pi\n")
            fh.write(f"# chi_m_rad = {report.chi_m:.17g}\n")
            fh.write(f"# p_at_chi_m = {fringe(report.chi_m):.17g}\n")
            fh.write("kappaT_rad,probability\n")
            for x in kt:
                fh.write(f"{x:.17g},{fringe(float(x)):.17g}\n")
        print(f"wrote {name}: chi_m = {report.chi_m:.4f} rad, "
              f"coeff = {report.delta_kappa_coeff:.4f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
