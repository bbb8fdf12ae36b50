"""Command-line runner: ``run``, ``verify``, ``profile`` and ``solve``.

Exit status: 0 when every requested check passes, 1 when some check fails,
2 for an invalid configuration, 3 for a runtime error (including an
unwritable output directory).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import frequency as fq
from . import inequalities as ineq
from .config import ConfigError, ExperimentConfig, load_config
from .decompose import calibrate_residual_constant, residual_biharmonic, residual_second
from .fields import GridSpec, PotentialSpec, ScalarField, as_expression, coordinate_symbols
from .lifting import check_potential_shift
from .quadrature import Ball
from .report import CheckReport
from .solutions import (CaseSpec, SolveConfig, build_system, builtin_case,
                        manufacture_potential, solve_biharmonic)
from .vanishing import (DEFAULT_FREQUENCY_CONSTANT, DEFAULT_THEOREM_CONSTANT, estimate_order,
                        order_from_frequency, theorem_bound)

__all__ = ["main", "run_experiment", "emit_reports", "RunResult", "PROFILE_HEADER",
           "write_field_dump", "read_field_dump"]

PROFILE_HEADER = ("r", "H", "I1", "I2", "I3", "I4", "I5", "I_form1", "I_form2", "h", "N")


@dataclass
class RunResult:
    reports: list[CheckReport] = field(default_factory=list)
    profiles: list[tuple[str, fq.FrequencyProfile]] = field(default_factory=list)
    tables: dict[str, list[tuple[float, ...]]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)


# ------------------------------------------------------------------ cases

def _potential(value, n: int) -> PotentialSpec:
    if isinstance(value, str):
        expr = as_expression(value, coordinate_symbols(n))
        if not expr.free_symbols:
            return PotentialSpec.constant(float(expr), n)
        return PotentialSpec.from_expression(expr, n)
    return PotentialSpec.constant(float(value), n)


def resolve_case(cfg: ExperimentConfig) -> CaseSpec:
    c = cfg.case
    if "name" in c:
        return builtin_case(c["name"], c.get("n"))
    if "manufactured" in c:
        n = c.get("n", 2)
        syms = coordinate_symbols(n)
        u = as_expression(c["manufactured"], syms)
        V, _ = manufacture_potential(u, n, c.get("floor"))
        return CaseSpec("manufactured", n, u, V, notes=f"V = Δ²u/u for u = {u}")
    s = cfg.solve
    syms = coordinate_symbols(2)
    u = as_expression(s["exact"], syms)
    return CaseSpec("solved", 2, u, _potential(s["potential"], 2),
                    notes="finite-difference solution with boundary data from the closed form")


def _solve(cfg: ExperimentConfig, case: CaseSpec, P: int):
    s = cfg.solve
    grid = GridSpec(2, cfg.extent, P)
    scfg = SolveConfig.from_exact(grid, case.V, case.u, tol=s["tol"], max_iter=s["max_iter"],
                                  method=s["method"])
    return solve_biharmonic(scfg)


def _radii(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.ratio is not None:
        return fq.geometric_radii(cfg.r_min, cfg.r_max, ratio=cfg.ratio)
    return fq.geometric_radii(cfg.r_min, cfg.r_max, count=cfg.count)


def _centers(cfg: ExperimentConfig, n: int) -> list[tuple[float, ...]]:
    cs = cfg.centers or [[0.0] * n]
    out = []
    for c in cs:
        if len(c) != n:
            raise ConfigError(f"center {c} does not have {n} coordinates")
        out.append(tuple(float(v) for v in c))
    return out


def _validate_geometry(cfg: ExperimentConfig, centers) -> None:
    h = 2.0 * cfg.extent / (cfg.points[0] - 1)
    reach = max(max(abs(v) for v in c) for c in centers) + cfg.r_max + 2.5 * h
    if reach > cfg.extent:
        raise ConfigError(f"radii.max = {cfg.r_max} plus centre offset and stencil clearance "
                          f"exceeds grid.extent = {cfg.extent} at the coarsest resolution")


# ------------------------------------------------------------------ checks

def _budget(cfg, key, default):
    return cfg.budgets.get(key, default)


ORDER_POINTS = 257


def _order_estimate(case: CaseSpec, cfg: ExperimentConfig, x0, u_field=None):
    """Sampled fields use the profile radii on their own grid.  Closed forms
    are resampled on a fine grid centred at ``x0`` with the window
    ``[r/8, r]``, ``r = min(radii.max, 0.1/mu)`` unless ``order.r_max`` is set."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if u_field is not None:
            return estimate_order(u_field, x0, _radii(cfg))
        r = cfg.order_r_max
        if r is None:
            r = min(cfg.r_max, 0.1 / case.mu) if case.mu else cfg.r_max
        syms = coordinate_symbols(case.n)
        shifted = case.u.xreplace({s: s + v for s, v in zip(syms, x0)})
        f = ScalarField.from_expression(shifted, GridSpec(case.n, 1.25 * r, ORDER_POINTS), syms)
        est = estimate_order(f, (0.0,) * case.n, np.geomspace(r / 8, r, 12))
        return replace(est, point=tuple(float(v) for v in x0))


def run_experiment(cfg: ExperimentConfig, want_checks: bool = True,
                   want_profiles: bool = True) -> RunResult:
    case = resolve_case(cfg)
    centers = _centers(cfg, case.n)
    _validate_geometry(cfg, centers)
    radii = _radii(cfg)
    checks = set(cfg.checks) if want_checks else set()
    res = RunResult()
    need_profiles = want_profiles or checks & {"H-prime", "I-prime", "monotonicity",
                                               "theorem-bound"}
    systems = {}
    solved = {}
    for P in cfg.points:
        if "solve" in cfg.case:
            solved[P] = _solve(cfg, case, P)
            systems[P] = build_system(case, P, cfg.extent, cfg.alpha_floor, u_field=solved[P].u)
        else:
            systems[P] = build_system(case, P, cfg.extent, cfg.alpha_floor)
    finest = cfg.points[-1]
    sysf = systems[finest]

    # order estimates first: a vanishing field should fail with the order
    # diagnosis rather than with the profile's H = 0
    orders = {}
    if checks & {"order", "theorem-bound"}:
        for i, c in enumerate(centers):
            orders[i] = _order_estimate(case, cfg, c, solved[finest].u if finest in solved else None)

    profiles: dict[tuple[int, int], fq.FrequencyProfile] = {}
    if need_profiles:
        for P in (cfg.points if "monotonicity" in checks else [finest]):
            for i, c in enumerate(centers):
                prof = fq.build_profile(systems[P], c + (0.0,), radii)
                profiles[(P, i)] = prof
                if want_profiles:
                    res.profiles.append((f"p{P}_c{i}", prof))

    rep = res.reports
    if "residuals" in checks:
        if len(cfg.points) >= 3:
            for which in ("second", "biharmonic"):
                out = calibrate_residual_constant(lambda P: systems[P], cfg.points, which=which)
                rep.append(out["report"])
        else:
            rep.append(residual_second(sysf, cfg.budgets["residual-second"]))
            rep.append(residual_biharmonic(sysf.u_tilde, sysf.potential, sysf.params,
                                           cfg.budgets["residual-biharmonic"]))
    if "potential-shift" in checks:
        rep.append(check_potential_shift(case.V, sysf.params, GridSpec(case.n, cfg.extent, finest)))
    if "frequency-scaling" in checks:
        rep.append(_frequency_scaling(cfg, finest, res))

    for i, c in enumerate(centers):
        z0 = c + (0.0,)
        ball = Ball(z0, cfg.r_max)
        prof = profiles.get((finest, i))
        if "H-prime" in checks:
            rep.append(fq.check_H_prime(prof, tol=_budget(cfg, "H-prime", 0.01)))
        if "I-prime" in checks:
            rep.append(fq.check_I_prime(prof, sysf, tol=_budget(cfg, "I-prime", 0.02)))
        if "cancellations" in checks:
            rep.append(fq.check_cancellations(sysf, ball, tol=_budget(cfg, "cancellations", 1e-12)))
        if "divergence-forms" in checks:
            rep.append(fq.check_divergence_forms(sysf, ball, tol=_budget(cfg, "divergence-forms", 0.01)))
        if "monotonicity" in checks:
            rep.append(_monotonicity(cfg, profiles, i, c))
        if "doubling" in checks:
            rep.extend(ineq.doubling_reports(sysf, z0, cfg.r_max / 2, cfg.r_max, cfg.budgets))
            rep.extend(ineq.h_doubling(sysf, z0, cfg.r_max / 8, cfg.r_max / 2, cfg.budgets))
            rep.extend(ineq.h_H_sandwich(sysf, z0, cfg.r_max / 2, cfg.r_max))
        if "changing-center" in checks:
            rep.append(ineq.changing_center(sysf, z0, 16 * cfg.r_max / 9, cfg.samples, cfg.seed,
                                            cfg.budgets))
        if "caccioppoli" in checks:
            rep.append(ineq.caccioppoli_check(sysf, z0, cfg.r_max / 2, cfg.budgets))
        if "sup-bound" in checks:
            rep.append(ineq.sup_bound_check(sysf, z0, cfg.r_max / 2, cfg.budgets))
        if "order" in checks or "theorem-bound" in checks:
            est = orders[i]
            meta = {"point": list(est.point), "slope": est.slope, "order": est.order,
                    "fit_residual": est.fit_residual, "dim": est.dim,
                    "window": [est.radii_used[0], est.radii_used[-1]]}
            if "order" in checks:
                expected = cfg.order_expected if cfg.order_expected is not None else case.expected_order
                if expected is None or i > 0:
                    rep.append(CheckReport("order", est.order, 1.0, implied_constant=est.order,
                                           passed=True, meta=dict(meta, expected=None)))
                else:
                    err = abs(est.order - expected)
                    rep.append(CheckReport("order", err, 1.0, budget=cfg.order_tolerance,
                                           meta=dict(meta, expected=expected)))
            if "theorem-bound" in checks:
                C = _budget(cfg, "theorem-constant", DEFAULT_THEOREM_CONSTANT)
                rep.append(CheckReport("theorem-bound", max(est.order, 0.0),
                                       theorem_bound(case.V, 1.0), budget=C,
                                       meta=dict(meta, bound=theorem_bound(case.V, C))))
                Cf = _budget(cfg, "frequency-constant", DEFAULT_FREQUENCY_CONSTANT)
                g = float(case.V.grad_sup_norm)
                rhs = order_from_frequency(prof, sysf.params, g, 1.0) - 2.0
                rep.append(CheckReport("frequency-order", est.order - 2.0, rhs, budget=Cf,
                                       meta=dict(meta, bound=order_from_frequency(
                                           prof, sysf.params, g, Cf),
                                           N_rmax=float(prof.N[-1]))))
    return res


def _monotonicity(cfg, profiles, i, c) -> CheckReport:
    Cs = [fq.fit_monotonicity_constant(profiles[(P, i)]) for P in cfg.points]
    finite = all(math.isfinite(C) for C in Cs)
    change = 0.0
    if len(Cs) >= 2 and finite:
        a, b = Cs[-2], Cs[-1]
        change = abs(a - b) / max(abs(a), abs(b), 1.0)
    elif not finite:
        change = math.inf
    budget = _budget(cfg, "monotonicity-change", 0.1)
    return CheckReport("monotonicity", Cs[-1], 1.0, implied_constant=Cs[-1],
                       passed=finite and change < budget,
                       meta={"center": list(c), "constants": Cs, "points": cfg.points,
                             "relative_change": change, "change_budget": budget,
                             "negative_frequency": bool(profiles[(cfg.points[-1], i)].negative_frequency)})


def _frequency_scaling(cfg: ExperimentConfig, P: int, res: RunResult) -> CheckReport:
    fam = cfg.family
    mus, r = fam["mus"], fam["radius"]
    rows = []
    for mu in mus:
        name = f"eigen_mu{mu:g}"
        sys_ = build_system(builtin_case(name), P, cfg.extent)
        N = fq.build_profile(sys_, (0.0, 0.0, 0.0), [r * 0.9, r, r * 1.1]).N[1]
        rows.append((float(mu), float(N)))
    slope = float(np.polyfit(np.log([m for m, _ in rows]), np.log([max(N, 1e-300) for _, N in rows]), 1)[0])
    res.tables["frequency_scaling"] = rows
    return CheckReport("frequency-scaling", slope, 1.0, budget=fam["max_slope"],
                       meta={"mus": list(mus), "N": [N for _, N in rows], "radius": r,
                             "points_per_axis": P})


# ------------------------------------------------------------------ output

def _fmt(x: float) -> str:
    return repr(float(x))


def emit_reports(res: RunResult, outdir: str | Path, checks: bool = True,
                 profiles: bool = True) -> list[Path]:
    """Write checks JSON, profile CSVs and plot-ready two-column data."""
    if not res.reports and not res.profiles and not res.tables:
        raise ValueError("no results to emit")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if profiles:
        for tag, prof in res.profiles:
            lines = [",".join(PROFILE_HEADER)]
            for row in prof.rows():
                lines.append(",".join(_fmt(row[k]) for k in PROFILE_HEADER))
            written.append(_write(out / f"profile_{tag}.csv", "\n".join(lines) + "\n"))
            H = prof.column("H")
            written.append(_write(out / f"logr_logH_{tag}.dat", "".join(
                f"{_fmt(math.log(r))} {_fmt(math.log(h))}\n" for r, h in zip(prof.radii, H))))
            written.append(_write(out / f"r_N_{tag}.dat", "".join(
                f"{_fmt(r)} {_fmt(n)}\n" for r, n in zip(prof.radii, prof.N))))
    if checks:
        for name, rows in res.tables.items():
            written.append(_write(out / f"{name}.csv", "mu,N\n" + "".join(
                ",".join(_fmt(v) for v in row) + "\n" for row in rows)))
        payload = json.dumps([r.to_dict() for r in res.reports], indent=2)
        written.append(_write(out / "checks.json", payload + "\n"))
    return written


def _write(path: Path, text: str) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def write_field_dump(u: ScalarField, path: str | Path) -> Path:
    """Header ``dim,points_per_axis,extent`` then node values in row-major order."""
    g = u.grid
    lines = [f"{g.dim},{g.points_per_axis},{_fmt(g.extent)}"]
    lines.extend(_fmt(v) for v in np.asarray(u.values).ravel(order="C"))
    return _write(Path(path), "\n".join(lines) + "\n")


def read_field_dump(path: str | Path) -> ScalarField:
    with open(path, encoding="utf-8") as fh:
        head = fh.readline().strip().split(",")
        vals = np.array([float(x) for x in fh.read().split()])
    grid = GridSpec(int(head[0]), float(head[2]), int(head[1]))
    return ScalarField(grid, vals.reshape(grid.shape))


# ------------------------------------------------------------------ entry

def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="bilapfreq", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, text in (("run", "full pipeline: profiles, checks and reports"),
                       ("verify", "checks only (checks.json)"),
                       ("profile", "frequency profile CSV and plot data only"),
                       ("solve", "finite-difference solve only (field dump)")):
        p = sub.add_parser(verb, help=text)
        p.add_argument("config", help="TOML experiment file")
        p.add_argument("-o", "--output", help="override the output directory")
        p.add_argument("-q", "--quiet", action="store_true", help="no per-check lines")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.output:
            cfg.output = args.output
        if args.verb == "solve" and "solve" not in cfg.case:
            raise ConfigError("'solve' needs a config with case.solve = true and a [solve] table")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.verb == "solve":
            case = resolve_case(cfg)
            result = _solve(cfg, case, cfg.points[-1])
            Path(cfg.output).mkdir(parents=True, exist_ok=True)
            path = write_field_dump(result.u, Path(cfg.output) / "field.txt")
            if not args.quiet:
                print(f"solved in {result.iterations} iterations, residual {result.residual:.3e}; "
                      f"wrote {path}")
            return 0
        res = run_experiment(cfg, want_checks=args.verb in ("run", "verify"),
                             want_profiles=args.verb in ("run", "profile"))
        emit_reports(res, cfg.output, checks=args.verb in ("run", "verify"),
                     profiles=args.verb in ("run", "profile"))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    if not args.quiet:
        for r in res.reports:
            print(r.line())
    return 0 if res.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
