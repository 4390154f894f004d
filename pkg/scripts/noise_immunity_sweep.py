#!/usr/bin/env python3
"""Decoupling immunity sweep: mains pickup vs the noise-free fringe.

Steps the block count (pulse number) at fixed t_w with a 50 Hz detuning
tone on top of the static quadratic shift, and reports how far the noisy
fringe surface departs from the closed-form theory.  The echo structure
keeps the deviation at the percent level even for pickup amplitudes of
hundreds of hertz.
"""

import argparse
import math

import numpy as np

from ddspin.noise import NoiseModel, TimeGrid, ac_line_trace
from ddspin.sequence import (
    SequenceConfig,
    dd_sequence_schedule,
    fringe_probability,
    integrate_noisy,
)
from ddspin.spin_algebra import SpinSystem, as_twice


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--J", default="5/2")
    ap.add_argument("--m", default="-3/2")
    ap.add_argument("--t-w", type=float, default=150e-6)
    ap.add_argument("--kappa-hz", type=float, default=40.0)
    ap.add_argument("--line-amp-hz", type=float, default=300.0)
    ap.add_argument("--max-blocks", type=int, default=55)
    ap.add_argument("--phi-points", type=int, default=13)
    args = ap.parse_args()

    sys = SpinSystem(as_twice(args.J))
    twice_m = as_twice(args.m)
    kappa = 2 * math.pi * args.kappa_hz
    model = NoiseModel(line_harmonics=((50.0, 2 * math.pi * args.line_amp_hz, 0.0),))
    dt = args.t_w / 50.0
    longest = 4 * args.max_blocks * args.t_w
    trace = ac_line_trace(model, TimeGrid(0.0, dt, int(np.ceil(longest / dt)) + 2))
    phis = np.linspace(0.0, 2 * math.pi, args.phi_points, endpoint=False)
    index = sys.index_of(twice_m)

    print(f"{'pulses':>7} {'T_ms':>8} {'rms_dev':>9} {'max_dev':>9}")
    all_devs = []
    for n_blocks in range(1, args.max_blocks + 1):
        devs = []
        for phi in phis:
            cfg = SequenceConfig(sys, args.t_w, n_blocks, kappa, float(phi),
                                 twice_m)
            u = integrate_noisy(cfg, dd_sequence_schedule(cfg), trace).matrix
            p_noisy = abs(u[index, index]) ** 2
            p_theory = fringe_probability(sys, twice_m,
                                          kappa * cfg.total_time, float(phi))
            devs.append(p_noisy - p_theory)
        all_devs.extend(devs)
        print(f"{2 * n_blocks:>7} {1e3 * 4 * n_blocks * args.t_w:>8.2f} "
              f"{np.sqrt(np.mean(np.square(devs))):>9.5f} "
              f"{np.max(np.abs(devs)):>9.5f}")
    print(f"surface rms deviation: "
          f"{np.sqrt(np.mean(np.square(all_devs))):.5f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
