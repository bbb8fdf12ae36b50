"""Experiment configuration: a TOML file with a closed set of keys.

Schema (every key except ``[case]`` and ``checks`` is optional)::

    output = "out"             # report directory
    seed = 0                   # changing-centre sample seed
    centers = [[0.0, 0.0]]     # base-domain points; t = 0 is appended
    checks = ["H-prime", "order"]

    [case]
    name = "harmonic_k1"       # builtin case, or
    # manufactured = "x1**4 + 1"; n = 2; floor = 0.5
    # solve = true  (then a [solve] table is required)
    n = 1                      # optional base dimension override

    [grid]
    points_per_axis = 129      # or an ascending list for refinement studies
    extent = 0.5
    alpha_floor = 0.0

    [radii]
    min = 0.1
    max = 0.4
    count = 12                 # or: ratio = 1.1

    [budgets]                  # per-check pass thresholds
    caccioppoli = 10.0

    [order]
    expected = 1.0             # optional; defaults to the case metadata
    tolerance = 0.05
    r_max = 0.05               # optional order window [r_max/8, r_max]

    [changing_center]
    samples = 8

    [family]                   # for the frequency-scaling check
    mus = [2, 4, 8]
    radius = 0.25
    max_slope = 1.2

    [solve]                    # Navier problem on the [grid] square (n = 2)
    exact = "x1**2 - x2**2"    # boundary data source
    potential = 0.0            # number or expression in x1, x2
    tol = 1e-12
    max_iter = 50
    method = "stationary"
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "CHECKS"]

CHECKS = ("residuals", "H-prime", "I-prime", "cancellations", "divergence-forms",
          "monotonicity", "doubling", "changing-center", "caccioppoli", "sup-bound",
          "order", "theorem-bound", "potential-shift", "frequency-scaling")

_TOP = {"output", "seed", "centers", "checks", "case", "grid", "radii", "budgets", "order",
        "changing_center", "family", "solve"}
_TABLES = {
    "case": {"name", "manufactured", "solve", "n", "floor"},
    "grid": {"points_per_axis", "extent", "alpha_floor"},
    "radii": {"min", "max", "count", "ratio"},
    "order": {"expected", "tolerance", "r_max"},
    "changing_center": {"samples"},
    "family": {"mus", "radius", "max_slope"},
    "solve": {"exact", "potential", "tol", "max_iter", "method"},
}
_BUDGET_KEYS = {"H-prime", "I-prime", "cancellations", "divergence-forms", "dou-1", "dou-2",
                "dou-3", "dou-4", "changing-center", "caccioppoli", "sup-bound",
                "residual-second", "residual-biharmonic", "monotonicity-change",
                "theorem-constant", "frequency-constant"}


class ConfigError(ValueError):
    """Invalid configuration (exit status 2)."""


@dataclass
class ExperimentConfig:
    case: dict[str, Any]
    checks: list[str]
    points: list[int] = field(default_factory=lambda: [129])
    extent: float = 0.5
    alpha_floor: float = 0.0
    r_min: float = 0.1
    r_max: float = 0.4
    count: int | None = 12
    ratio: float | None = None
    centers: list[list[float]] | None = None
    budgets: dict[str, float] = field(default_factory=dict)
    order_expected: float | None = None
    order_tolerance: float = 0.05
    order_r_max: float | None = None
    samples: int = 8
    family: dict[str, Any] = field(default_factory=lambda: {"mus": [2, 4, 8], "radius": 0.25,
                                                           "max_slope": 1.2})
    solve: dict[str, Any] | None = None
    output: str = "out"
    seed: int = 0


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _num(v, name: str) -> float:
    _require(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v),
             f"{name} must be a finite number")
    return float(v)


def _int(v, name: str) -> int:
    _require(isinstance(v, int) and not isinstance(v, bool), f"{name} must be an integer")
    return int(v)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} is not valid TOML: {exc}") from exc
    return parse_config(raw)


def parse_config(raw: dict[str, Any]) -> ExperimentConfig:
    unknown = set(raw) - _TOP
    _require(not unknown, f"unknown top-level keys: {sorted(unknown)}")
    for table, keys in _TABLES.items():
        if table in raw:
            _require(isinstance(raw[table], dict), f"[{table}] must be a table")
            bad = set(raw[table]) - keys
            _require(not bad, f"unknown keys in [{table}]: {sorted(bad)}")
    _require("case" in raw, "missing [case] table")
    _require("checks" in raw, "missing 'checks' list")
    checks = raw["checks"]
    _require(isinstance(checks, list) and len(checks) >= 1, "'checks' must be a nonempty list")
    for c in checks:
        _require(c in CHECKS, f"unknown check {c!r}; known: {', '.join(CHECKS)}")
    _require(len(set(checks)) == len(checks), "duplicate entries in 'checks'")

    case = dict(raw["case"])
    sources = [k for k in ("name", "manufactured", "solve") if k in case]
    _require(len(sources) == 1, "[case] needs exactly one of name, manufactured, solve")
    if "n" in case:
        _require(_int(case["n"], "case.n") in (1, 2), "case.n must be 1 or 2")
    if "floor" in case:
        _require("manufactured" in case, "case.floor only applies to manufactured cases")
        _require(_num(case["floor"], "case.floor") > 0, "case.floor must be positive")
    if "solve" in case:
        _require(case["solve"] is True, "case.solve must be true")
        _require("solve" in raw, "case.solve requires a [solve] table")

    cfg = ExperimentConfig(case=case, checks=list(checks))
    grid = raw.get("grid", {})
    if "points_per_axis" in grid:
        pts = grid["points_per_axis"]
        pts = pts if isinstance(pts, list) else [pts]
        cfg.points = [_int(p, "grid.points_per_axis") for p in pts]
    _require(len(cfg.points) >= 1, "grid.points_per_axis is empty")
    for p in cfg.points:
        _require(p >= 17 and p % 2 == 1, "grid.points_per_axis entries must be odd and >= 17")
    _require(all(a < b for a, b in zip(cfg.points, cfg.points[1:])),
             "grid resolutions must be strictly ascending")
    cfg.extent = _num(grid.get("extent", cfg.extent), "grid.extent")
    _require(cfg.extent > 0, "grid.extent must be positive")
    cfg.alpha_floor = _num(grid.get("alpha_floor", 0.0), "grid.alpha_floor")
    _require(cfg.alpha_floor >= 0, "grid.alpha_floor must be >= 0")

    radii = raw.get("radii", {})
    cfg.r_min = _num(radii.get("min", cfg.r_min), "radii.min")
    cfg.r_max = _num(radii.get("max", cfg.r_max), "radii.max")
    _require(0 < cfg.r_min < cfg.r_max, "need 0 < radii.min < radii.max")
    _require(not ("count" in radii and "ratio" in radii), "give radii.count or radii.ratio, not both")
    if "ratio" in radii:
        cfg.ratio = _num(radii["ratio"], "radii.ratio")
        cfg.count = None
        _require(cfg.ratio > 1, "radii.ratio must exceed 1")
    elif "count" in radii:
        cfg.count = _int(radii["count"], "radii.count")
    if cfg.count is not None:
        _require(cfg.count >= 4, "radii.count must be >= 4")

    if "centers" in raw:
        cs = raw["centers"]
        _require(isinstance(cs, list) and cs, "'centers' must be a nonempty list of points")
        cfg.centers = [[_num(v, "centers") for v in c] for c in cs]

    budgets = raw.get("budgets", {})
    _require(isinstance(budgets, dict), "[budgets] must be a table")
    bad = set(budgets) - _BUDGET_KEYS
    _require(not bad, f"unknown budget keys: {sorted(bad)}")
    cfg.budgets = {k: _num(v, f"budgets.{k}") for k, v in budgets.items()}

    order = raw.get("order", {})
    if "expected" in order:
        cfg.order_expected = _num(order["expected"], "order.expected")
    cfg.order_tolerance = _num(order.get("tolerance", cfg.order_tolerance), "order.tolerance")
    if "r_max" in order:
        cfg.order_r_max = _num(order["r_max"], "order.r_max")
        _require(cfg.order_r_max > 0, "order.r_max must be positive")

    cc = raw.get("changing_center", {})
    cfg.samples = _int(cc.get("samples", cfg.samples), "changing_center.samples")
    _require(cfg.samples >= 1, "changing_center.samples must be >= 1")

    fam = raw.get("family", {})
    if fam:
        mus = fam.get("mus", cfg.family["mus"])
        _require(isinstance(mus, list) and len(mus) >= 2, "family.mus needs at least two values")
        cfg.family = {"mus": [_num(m, "family.mus") for m in mus],
                      "radius": _num(fam.get("radius", 0.25), "family.radius"),
                      "max_slope": _num(fam.get("max_slope", 1.2), "family.max_slope")}
        _require(all(m > 0 for m in cfg.family["mus"]), "family.mus must be positive")

    if "solve" in raw:
        s = dict(raw["solve"])
        _require("exact" in s and isinstance(s["exact"], str), "solve.exact must be an expression string")
        pot = s.get("potential", 0.0)
        _require(isinstance(pot, (str, int, float)) and not isinstance(pot, bool),
                 "solve.potential must be a number or an expression string")
        s["tol"] = _num(s.get("tol", 1e-12), "solve.tol")
        s["max_iter"] = _int(s.get("max_iter", 50), "solve.max_iter")
        s.setdefault("method", "stationary")
        _require(s["method"] in ("stationary", "gmres"), "solve.method must be stationary or gmres")
        cfg.solve = s

    cfg.output = raw.get("output", cfg.output)
    _require(isinstance(cfg.output, str) and cfg.output, "'output' must be a path string")
    cfg.seed = _int(raw.get("seed", 0), "seed")
    if "residuals" in checks and len(cfg.points) < 3:
        _require("residual-second" in cfg.budgets and "residual-biharmonic" in cfg.budgets,
                 "residuals needs three resolutions (calibration) or explicit budgets "
                 "residual-second and residual-biharmonic")
    return cfg
