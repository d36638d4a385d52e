"""Residual of the integrated weighted energy identity under grid refinement."""

import argparse

import numpy as np

from micropolar.analysis import WeightSpec, energy_balance_residual
from micropolar.model import params_for_mach
from micropolar.solver import PerturbationSpec, Shape, build_initial, run
from micropolar.stationary import build_profile


def residual(p, n, t_end, amp, w):
    prof = build_profile(p, n=n)
    L = prof.grid.L
    init = build_initial(prof, PerturbationSpec(Shape.BUMP, amp, amp, amp, x_c=L / 4, width=L / 8)).state
    ts = np.linspace(0.0, t_end, int(round(t_end * n / 64)) + 1)
    traj = run(init, t_end, prof, p, observer=lambda s: s, output_times=ts)
    _, R = energy_balance_residual(traj.times, traj.records, prof, p, w)
    return float(np.max(np.abs(R)))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, nargs="+", default=[512, 1024, 2048])
    ap.add_argument("--t-end", type=float, default=1.0)
    ap.add_argument("--amp", type=float, default=0.01)
    ap.add_argument("--theta", type=float, default=2.0)
    ap.add_argument("--beta", type=float, default=0.05)
    args = ap.parse_args()

    p = params_for_mach(1.5, chi0=0.9, omega_b=0.05)
    w = WeightSpec(args.theta, args.beta)
    R = [residual(p, n, args.t_end, args.amp, w) for n in args.n]
    for i, (n, r) in enumerate(zip(args.n, R)):
        order = "" if i == 0 else f"  order {np.log(R[i - 1] / r) / np.log(n / args.n[i - 1]):.2f}"
        print(f"n={n:6d} max|R|={r:.3e}{order}")


if __name__ == "__main__":
    main()
