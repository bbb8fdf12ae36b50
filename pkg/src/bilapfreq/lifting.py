"""Lifting ``u(x)`` to ``u(x) exp(sqrt(lambda) t)`` and the parameter choices."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import GridSpec, PotentialSpec, ScalarField, _node_radius2
from .report import CheckReport

__all__ = ["LiftParams", "select_params", "check_potential_shift", "lift_solution"]


@dataclass(frozen=True)
class LiftParams:
    lam: float
    alpha: float

    def __post_init__(self):
        if self.lam < 0 or self.alpha < 0:
            raise ValueError("lambda and alpha must be nonnegative")

    @property
    def sqrt_lambda(self) -> float:
        return math.sqrt(self.lam)


def select_params(V: PotentialSpec, alpha_floor: float = 0.0) -> LiftParams:
    """``lambda = 2 ||V||^(1/2)`` and ``alpha = max(||grad V||, alpha_floor)``.

    ``alpha = 0`` is allowed (constant potentials); ``alpha_floor`` only
    exists for experiments with a strictly positive weight exponent.
    """
    return LiftParams(lam=2.0 * math.sqrt(V.sup_norm),
                      alpha=max(float(V.grad_sup_norm), float(alpha_floor)))


def check_potential_shift(V: PotentialSpec, p: LiftParams, grid: GridSpec,
                          tol: float = 1e-12) -> CheckReport:
    """Compare ``sup |V - lambda^2/4|`` on sampled nodes of ``B_1`` with ``||grad V||``.

    The report is an outcome, not an assertion: for potentials that change
    sign or vary over more than unit distance the bound can fail.
    """
    Vs = V.sample(grid)
    inside = (_node_radius2(grid, (0.0,) * grid.dim) <= V.domain_radius**2) & Vs.valid
    if not inside.any():
        raise ValueError("ball under-resolved: no valid potential node in the domain")
    lhs = float(np.max(np.abs(Vs.values[inside] - p.lam**2 / 4.0)))
    rhs = float(V.grad_sup_norm)
    return CheckReport(
        "potential-shift", lhs, rhs,
        implied_constant=(0.0 if lhs <= tol else (lhs / rhs if rhs > 0 else math.inf)),
        passed=lhs <= rhs + tol,
        meta={"lambda": p.lam, "lambda_sq_over_4": p.lam**2 / 4.0},
    )


def lift_solution(u: ScalarField, p: LiftParams, lifted_grid: GridSpec | None = None) -> ScalarField:
    """Values ``u(x) exp(sqrt(lambda) t)`` on the lifted grid."""
    base = u.grid
    if lifted_grid is None:
        lifted_grid = base.lifted()
    if (lifted_grid.dim != base.dim + 1 or lifted_grid.extent != base.extent
            or lifted_grid.points_per_axis != base.points_per_axis):
        raise ValueError("lifted grid does not extend the base grid by one axis")
    t = lifted_grid.axis
    factor = np.exp(p.sqrt_lambda * t)
    vals = u.values[..., None] * factor
    valid = np.broadcast_to(u.valid[..., None], lifted_grid.shape)
    src = None
    if u.source is not None:
        src = u.source if p.lam == 0 else f"({u.source})*exp({p.sqrt_lambda!r}*t)"
    return ScalarField(lifted_grid, vals, valid, source=src)
