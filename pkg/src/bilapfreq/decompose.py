"""The second-order system ``w = Δu - λu/2``, ``Δw - 3λw/2 = (V - λ²/4) u``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .fields import GridSpec, PotentialSpec, ScalarField, gradient, laplacian
from .lifting import LiftParams
from .report import CheckReport

__all__ = [
    "LiftedSystem",
    "compute_w",
    "residual_second",
    "residual_biharmonic",
    "lift_potential",
    "refinement_order",
    "calibrate_residual_constant",
]


def compute_w(u_tilde: ScalarField, p: LiftParams) -> ScalarField:
    return laplacian(u_tilde) - 0.5 * p.lam * u_tilde


def lift_potential(V: PotentialSpec, grid: GridSpec) -> tuple[ScalarField, list[ScalarField]]:
    """``V`` and ``grad V`` on a lifted grid, constant in ``t`` (zero t-derivative)."""
    if V.n != grid.dim - 1:
        raise ValueError(f"potential is {V.n}-dimensional, lifted grid is {grid.dim}")
    base = grid.base()
    Vb = V.sample(base)
    gb = V.sample_gradient(base)

    def up(f: ScalarField) -> ScalarField:
        return ScalarField(grid, np.broadcast_to(f.values[..., None], grid.shape),
                           np.broadcast_to(f.valid[..., None], grid.shape))

    Vl = up(Vb)
    grads = [up(g) for g in gb]
    grads.append(ScalarField(grid, np.zeros(grid.shape), Vl.valid))
    return Vl, grads


@dataclass(eq=False)
class LiftedSystem:
    """The pair ``(u, w)`` on the lifted grid with its parameters.

    Use :meth:`build` to construct it from a lifted field; ``w`` is then
    ``compute_w(u_tilde, params)``.  Derived fields are computed lazily.
    """

    u_tilde: ScalarField
    w: ScalarField
    params: LiftParams
    potential: PotentialSpec
    label: str = ""

    def __post_init__(self):
        if self.u_tilde.grid != self.w.grid:
            raise ValueError("u_tilde and w must share one grid")

    @classmethod
    def build(cls, u_tilde: ScalarField, params: LiftParams, potential: PotentialSpec,
              label: str = "") -> "LiftedSystem":
        return cls(u_tilde, compute_w(u_tilde, params), params, potential, label)

    @property
    def grid(self) -> GridSpec:
        return self.u_tilde.grid

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def boundary_rule(self) -> str:
        """Ball quadrature rule: a half-cell ramp when the H weight is
        trivial (alpha = 0), the sharp node indicator otherwise."""
        return "smooth" if self.params.alpha == 0 else "sharp"

    @cached_property
    def _potential_fields(self):
        return lift_potential(self.potential, self.grid)

    @property
    def V(self) -> ScalarField:
        return self._potential_fields[0]

    @property
    def grad_V(self) -> list[ScalarField]:
        return self._potential_fields[1]

    @cached_property
    def Q(self) -> ScalarField:
        """``V - λ²/4`` on the lifted grid."""
        return self.V - self.params.lam**2 / 4.0

    @cached_property
    def grad_u(self) -> list[ScalarField]:
        return gradient(self.u_tilde)

    @cached_property
    def grad_w(self) -> list[ScalarField]:
        return gradient(self.w)

    def scaled(self, c: float) -> "LiftedSystem":
        """The same system with ``u -> c u`` (and hence ``w -> c w``)."""
        return LiftedSystem.build(c * self.u_tilde, self.params, self.potential, self.label)


def _max_abs(field: ScalarField, region: float | None = None) -> float:
    sel = field.valid
    if region is not None:
        box = np.max(np.abs(np.stack(np.broadcast_arrays(*field.grid.coords()))), axis=0)
        sel = sel & (box <= region + 1e-12)
    if not sel.any():
        raise ValueError("no valid nodes left for the residual")
    return float(np.max(np.abs(field.values[sel])))


def residual_second(sys: LiftedSystem, budget: float = math.inf,
                    region: float | None = None) -> CheckReport:
    """``max |Δw - 3λw/2 - (V - λ²/4) u|`` on the doubly-interior region.

    ``implied_constant`` is ``max|r| / h²``; ``budget`` is the per-case
    constant from :func:`calibrate_residual_constant`.  ``region`` restricts
    the maximum to the box ``|z|_∞ <= region`` (a resolution-independent
    set for refinement studies; the doubly-interior layer moves with h).
    """
    lam = sys.params.lam
    r = laplacian(sys.w) - 1.5 * lam * sys.w - sys.Q * sys.u_tilde
    h = sys.grid.spacing
    res = _max_abs(r, region)
    return CheckReport("residual-second", res, h * h, budget=budget,
                       meta={"h": h, "scale": _max_abs(sys.u_tilde, region), "region": region})


def residual_biharmonic(u_tilde: ScalarField, V: PotentialSpec, p: LiftParams,
                        budget: float = math.inf, region: float | None = None) -> CheckReport:
    """``max |Δ(Δu) - 2λΔu - (V - λ²) u|`` using two compact Laplacians."""
    grid = u_tilde.grid
    Vl, _ = lift_potential(V, grid)
    lap = laplacian(u_tilde)
    r = laplacian(lap) - 2.0 * p.lam * lap - (Vl - p.lam**2) * u_tilde
    h = grid.spacing
    return CheckReport("residual-biharmonic", _max_abs(r, region), h * h, budget=budget,
                       meta={"h": h, "scale": _max_abs(u_tilde, region), "region": region})


def refinement_order(errors: Sequence[float], spacings: Sequence[float]) -> float:
    """Observed order between the last two resolutions."""
    e1, e2 = errors[-2], errors[-1]
    h1, h2 = spacings[-2], spacings[-1]
    if e1 <= 0 or e2 <= 0:
        return math.inf
    return math.log(e1 / e2) / math.log(h1 / h2)


def calibrate_residual_constant(make_system: Callable[[int], LiftedSystem],
                                points: Sequence[int], safety: float = 1.5,
                                which: str = "second") -> dict:
    """Fit ``C`` in ``max|r| <= C h²`` on all but the last resolution, assert on the last.

    ``make_system(points_per_axis)`` builds the system at one resolution.
    All residuals are measured on one box, the doubly-interior region of
    the coarsest grid.  Returns the fitted constant, the observed order and
    the final report.
    """
    if len(points) < 3:
        raise ValueError("need three resolutions: two to fit, one to assert")
    reports = []
    region = None
    for P in points:
        sys = make_system(P)
        if region is None:
            region = sys.grid.extent - 2 * sys.grid.spacing
        if which == "second":
            reports.append(residual_second(sys, region=region))
        else:
            reports.append(residual_biharmonic(sys.u_tilde, sys.potential, sys.params,
                                               region=region))
    fit = reports[:-1]
    C = safety * max(r.implied_constant for r in fit)
    last = reports[-1]
    final = CheckReport(last.name, last.lhs, last.rhs_without_constant, budget=C,
                        meta=dict(last.meta))
    errs = [r.lhs for r in reports]
    hs = [r.meta["h"] for r in reports]
    order = refinement_order(errs[:-1], hs[:-1])
    final.meta["fit_order"] = order
    final.meta["final_order"] = refinement_order(errs, hs)
    return {"constant": C, "order": order, "report": final, "errors": errs, "spacings": hs}
