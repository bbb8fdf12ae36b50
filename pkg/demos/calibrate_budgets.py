"""Calibrate the default constant budgets over the shipped case library.

Every lemma-type inequality only asserts that *some* constant exists, so the
package ships budgets equal to 10x the worst implied constant seen on the
library.  This script recomputes those numbers at the CLI's default geometry
(centre at the origin, r_max = 0.4, extent 0.5) on two resolutions and prints
the values frozen into ``inequalities.DEFAULT_BUDGETS`` and the order
constants in ``vanishing`` (worst ratio times 1.1).

    python3 demos/calibrate_budgets.py [--points 65 129]
"""

import argparse
import math
import warnings

import numpy as np

from bilapfreq import frequency as fq
from bilapfreq import inequalities as ineq
from bilapfreq.fields import GridSpec, ScalarField
from bilapfreq.solutions import build_system, builtin_case, list_cases
from bilapfreq.vanishing import estimate_order, order_from_frequency, theorem_bound

R_MAX = 0.4
EXTENT = 0.5


def lemma_constants(sys):
    z0 = (0.0,) * sys.dim
    reps = []
    reps += ineq.doubling_reports(sys, z0, R_MAX / 2, R_MAX)
    reps += ineq.h_doubling(sys, z0, R_MAX / 8, R_MAX / 2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        reps.append(ineq.changing_center(sys, z0, 16 * R_MAX / 9))
    reps.append(ineq.caccioppoli_check(sys, z0, R_MAX / 2))
    reps.append(ineq.sup_bound_check(sys, z0, R_MAX / 2))
    return {r.name: r.implied_constant for r in reps}


def resolved_order(case):
    """Order at the origin on a window small enough for the case's wavenumber."""
    mu = case.mu or 1.0
    r_max = min(0.4, 0.1 / mu) if case.mu else 0.4
    grid = GridSpec(case.n, 1.25 * r_max, 257)
    f = ScalarField.from_expression(case.u, grid)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return estimate_order(f, (0.0,) * case.n, np.geomspace(r_max / 8, r_max, 12)).order


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, nargs="+", default=[65, 129])
    args = ap.parse_args()

    worst: dict[str, float] = {}
    theorem_ratio = 0.0
    freq_ratio = 0.0
    for name in list_cases():
        if name == "zero":
            continue
        case = builtin_case(name)
        for P in args.points:
            sys = build_system(case, P, EXTENT)
            consts = lemma_constants(sys)
            line = "  ".join(f"{k}={v:.4g}" for k, v in consts.items())
            print(f"{name:12s} P={P:4d}  {line}")
            for k, v in consts.items():
                worst[k] = max(worst.get(k, 0.0), v)
        order = max(resolved_order(case), 0.0)
        theorem_ratio = max(theorem_ratio, order / theorem_bound(case.V, 1.0))
        prof = fq.build_profile(sys, (0.0,) * sys.dim, fq.geometric_radii(0.1, R_MAX, 12))
        rhs = order_from_frequency(prof, sys.params, case.V.grad_sup_norm, 1.0) - 2.0
        freq_ratio = max(freq_ratio, (order - 2.0) / rhs)
        print(f"{name:12s} order={order:.4f}  theorem ratio={order / theorem_bound(case.V, 1.0):.4f}"
              f"  frequency ratio={(order - 2.0) / rhs:.4f}")

    print("\nworst implied constants (budget = 10x):")
    for k, v in worst.items():
        print(f"  {k:16s} {v:.4g}  -> {10 * v:.3g}")
    print("order constants (default = 1.1x):")
    print(f"  theorem          {theorem_ratio:.4g}  -> {1.1 * theorem_ratio:.3g}")
    print(f"  frequency        {freq_ratio:.4g}  -> {1.1 * max(freq_ratio, 0.0):.3g}")
    if not math.isfinite(theorem_ratio):
        raise SystemExit("non-finite calibration")


if __name__ == "__main__":
    main()
