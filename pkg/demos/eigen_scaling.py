"""Frequency growth along the eigenfunction family sin(μx1)sin(μx2).

V = 4μ⁴ grows with μ, so the lift uses λ = 2||V||^{1/2} = 4μ² and the
upper bound on N(0, 1/4) grows like √λ = 2μ.  The measured slope of
log N against log μ stays well below 1, while the vanishing order at the
origin stays 2 for every μ.  The order is measured on the window
[r/8, r] with r = 0.1/μ, so that every ball stays inside one nodal cell.

    python3 demos/eigen_scaling.py [--points 65] [--mus 2 4 8]
"""

import argparse
import math

import numpy as np

from bilapfreq import frequency as fq
from bilapfreq.fields import GridSpec, ScalarField
from bilapfreq.solutions import build_system, builtin_case
from bilapfreq.vanishing import DEFAULT_THEOREM_CONSTANT, estimate_order, theorem_bound


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=65)
    ap.add_argument("--mus", type=float, nargs="+", default=[2, 4, 8])
    args = ap.parse_args()

    rows = []
    print(f"{'mu':>5s} {'lambda':>8s} {'N(0,1/4)':>10s} {'order':>7s} {'bound':>8s}")
    for mu in args.mus:
        case = builtin_case(f"eigen_mu{mu:g}")
        sys = build_system(case, args.points, 0.5)
        N = fq.build_profile(sys, (0.0, 0.0, 0.0), [0.225, 0.25, 0.275]).N[1]
        r = 0.1 / mu
        f = ScalarField.from_expression(case.u, GridSpec(2, 1.25 * r, 257))
        order = estimate_order(f, (0.0, 0.0), np.geomspace(r / 8, r, 12)).order
        bound = theorem_bound(case.V, DEFAULT_THEOREM_CONSTANT)
        rows.append((mu, N))
        print(f"{mu:5g} {sys.params.lam:8.1f} {N:10.4f} {order:7.4f} {bound:8.3f}")
    slope = np.polyfit(np.log([m for m, _ in rows]), np.log([n for _, n in rows]), 1)[0]
    print(f"\nlog-log slope of N against mu: {slope:.3f} (bound grows with slope 1)")
    print(f"N ratio mu={args.mus[-1]:g} vs mu={args.mus[0]:g}: {rows[-1][1] / rows[0][1]:.3f}, "
          f"mu ratio {args.mus[-1] / args.mus[0]:g}, log ratio "
          f"{math.log(rows[-1][1] / rows[0][1]) / math.log(args.mus[-1] / args.mus[0]):.3f}")


if __name__ == "__main__":
    main()
