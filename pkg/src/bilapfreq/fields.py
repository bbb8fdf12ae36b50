"""Uniform grids, sampled scalar fields and central-difference operators.

Every field lives on a centred box ``[-L, L]^d`` with an odd number of
nodes per axis, so the origin is always a node.  Derivative operators
use second-order central differences; nodes whose stencil leaves the
valid region are flagged invalid rather than extrapolated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import sympy as sp

__all__ = [
    "GridSpec",
    "ScalarField",
    "PotentialSpec",
    "coordinate_symbols",
    "as_expression",
    "sup_norm",
    "laplacian",
    "gradient",
    "divergence",
]


def coordinate_symbols(dim: int, lifted: bool = False) -> tuple[sp.Symbol, ...]:
    """Symbols ``x1..xd``; with ``lifted=True`` the last one is ``t``."""
    if lifted:
        return tuple(sp.Symbol(f"x{i + 1}", real=True) for i in range(dim - 1)) + (
            sp.Symbol("t", real=True),
        )
    return tuple(sp.Symbol(f"x{i + 1}", real=True) for i in range(dim))


def as_expression(expr, symbols) -> sp.Expr:
    """Sympify ``expr`` with names bound to ``symbols``.

    Plain symbols that share a name with one of ``symbols`` are replaced, so
    ``"x1**2"`` and ``Symbol("x1")**2`` both differentiate correctly.
    """
    by_name = {str(s): s for s in symbols}
    out = sp.sympify(expr, locals=by_name) if isinstance(expr, str) else sp.sympify(expr)
    swap = {f: by_name[f.name] for f in out.free_symbols
            if f.name in by_name and f != by_name[f.name]}
    return out.xreplace(swap) if swap else out


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid on ``[-extent, extent]^dim``.

    Parameters
    ----------
    dim : int
        Ambient dimension.  Lifted systems use 2 or 3; base fields of the
        one-dimensional fast mode use 1.
    extent : float
        Half-width ``L`` of the box.
    points_per_axis : int
        Odd node count per axis, at least 17.
    """

    dim: int
    extent: float
    points_per_axis: int

    def __post_init__(self):
        if self.dim < 1 or self.dim > 3:
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.points_per_axis < 17 or self.points_per_axis % 2 == 0:
            raise ValueError(
                f"points_per_axis must be odd and >= 17, got {self.points_per_axis}"
            )
        if not self.extent > 0:
            raise ValueError("extent must be positive")

    @classmethod
    def from_spacing(cls, dim: int, extent: float, spacing: float) -> "GridSpec":
        """Grid whose spacing is exactly ``2 * extent / (P - 1)`` for integer P."""
        n = 2.0 * extent / spacing
        if abs(n - round(n)) > 1e-9 * n:
            raise ValueError(f"extent {extent} is not a multiple of spacing {spacing}")
        return cls(dim, extent, int(round(n)) + 1)

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / (self.points_per_axis - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def mid(self) -> int:
        return (self.points_per_axis - 1) // 2

    @property
    def axis(self) -> np.ndarray:
        # built from integer offsets so the centre node is exactly 0 and the
        # axis is exactly symmetric
        return self.spacing * (np.arange(self.points_per_axis) - self.mid)

    def coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per axis (``ij`` ordering)."""
        ax = self.axis
        out = []
        for i in range(self.dim):
            shape = [1] * self.dim
            shape[i] = self.points_per_axis
            out.append(ax.reshape(shape))
        return out

    def lifted(self) -> "GridSpec":
        """Grid with one extra (t) axis of the same extent and resolution."""
        return GridSpec(self.dim + 1, self.extent, self.points_per_axis)

    def base(self) -> "GridSpec":
        return GridSpec(self.dim - 1, self.extent, self.points_per_axis)

    def nearest_index(self, point: Sequence[float]) -> tuple[int, ...]:
        h = self.spacing
        idx = tuple(int(round(p / h)) + self.mid for p in point)
        if any(i < 0 or i >= self.points_per_axis for i in idx):
            raise ValueError(f"point {tuple(point)} lies outside the grid box")
        return idx

    def node(self, index: Sequence[int]) -> tuple[float, ...]:
        h = self.spacing
        return tuple(float(h * (i - self.mid)) for i in index)

    def snap(self, point: Sequence[float]) -> tuple[float, ...]:
        """Nearest grid node to ``point``."""
        return self.node(self.nearest_index(point))


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Values of a scalar function on every node of a grid.

    ``valid`` marks nodes carrying meaningful values; derivative operators
    shrink it by one stencil layer.  Invalid nodes store 0.
    """

    grid: GridSpec
    values: np.ndarray
    valid: np.ndarray = None
    source: str | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} != grid shape {self.grid.shape}")
        valid = (
            np.ones(self.grid.shape, dtype=bool)
            if self.valid is None
            else np.asarray(self.valid, dtype=bool)
        )
        if valid.shape != self.grid.shape:
            raise ValueError("valid mask shape does not match grid")
        if not np.all(np.isfinite(values[valid])):
            raise ValueError("field values must be finite on valid nodes")
        values = np.where(valid, values, 0.0)
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "valid", _freeze(valid))

    @classmethod
    def from_expression(cls, expr, grid: GridSpec, symbols=None, valid=None) -> "ScalarField":
        """Sample a sympy expression at every node."""
        if symbols is None:
            symbols = coordinate_symbols(grid.dim)
        expr = as_expression(expr, symbols)
        fn = sp.lambdify(symbols, expr, modules="numpy")
        vals = np.broadcast_to(np.asarray(fn(*grid.coords()), dtype=float), grid.shape)
        return cls(grid, vals.copy(), valid, source=str(expr))

    @classmethod
    def from_function(cls, fn: Callable, grid: GridSpec, valid=None) -> "ScalarField":
        vals = np.broadcast_to(np.asarray(fn(*grid.coords()), dtype=float), grid.shape)
        return cls(grid, vals.copy(), valid)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape), source="0")

    def with_values(self, values, valid=None) -> "ScalarField":
        return ScalarField(self.grid, values, self.valid if valid is None else valid)

    def _binary(self, other, op):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return ScalarField(
                self.grid, op(self.values, other.values), self.valid & other.valid
            )
        return ScalarField(self.grid, op(self.values, float(other)), self.valid)

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values, self.valid)


def _node_radius2(grid: GridSpec, center) -> np.ndarray:
    return sum((c - z0) ** 2 for c, z0 in zip(grid.coords(), center))


def sup_norm(field: ScalarField, radius: float, center=None) -> float:
    """Largest ``|value|`` over valid nodes with ``|z - center| <= radius``."""
    grid = field.grid
    if radius > grid.extent * np.sqrt(grid.dim) + 1e-12:
        raise ValueError("radius exceeds the grid box")
    center = (0.0,) * grid.dim if center is None else tuple(center)
    inside = (_node_radius2(grid, center) <= radius * radius * (1 + 1e-12)) & field.valid
    if not inside.any():
        raise ValueError("ball under-resolved: no valid grid node inside")
    return float(np.max(np.abs(field.values[inside])))


def _erode(valid: np.ndarray) -> np.ndarray:
    """Nodes whose full (2d+1)-point cross stencil is valid and interior."""
    d = valid.ndim
    out = np.zeros_like(valid)
    core = (slice(1, -1),) * d
    acc = valid[core].copy()
    for i in range(d):
        for s in (slice(2, None), slice(None, -2)):
            sl = list(core)
            sl[i] = s
            acc &= valid[tuple(sl)]
    out[core] = acc
    return out


def _shifted(v: np.ndarray, axis: int, step: int) -> np.ndarray:
    d = v.ndim
    sl = [slice(1, -1)] * d
    sl[axis] = slice(1 + step, v.shape[axis] - 1 + step)
    return v[tuple(sl)]


def laplacian(field: ScalarField) -> ScalarField:
    """Compact (2d+1)-point Laplacian; one boundary layer is masked."""
    grid = field.grid
    if grid.points_per_axis < 5:
        raise ValueError("laplacian needs at least 5 points per axis")
    v = field.values
    h2 = grid.spacing**2
    core = (slice(1, -1),) * grid.dim
    acc = -2.0 * grid.dim * v[core]
    for i in range(grid.dim):
        acc = acc + _shifted(v, i, 1) + _shifted(v, i, -1)
    out = np.zeros(grid.shape)
    out[core] = acc / h2
    return ScalarField(grid, out, _erode(field.valid))


def gradient(field: ScalarField) -> list[ScalarField]:
    """Componentwise central differences, masked like :func:`laplacian`."""
    grid = field.grid
    if grid.points_per_axis < 5:
        raise ValueError("gradient needs at least 5 points per axis")
    v = field.values
    core = (slice(1, -1),) * grid.dim
    valid = _erode(field.valid)
    comps = []
    for i in range(grid.dim):
        out = np.zeros(grid.shape)
        out[core] = (_shifted(v, i, 1) - _shifted(v, i, -1)) / (2.0 * grid.spacing)
        comps.append(ScalarField(grid, out, valid))
    return comps


def divergence(components: Sequence[ScalarField]) -> ScalarField:
    """Central-difference divergence of a vector field."""
    grid = components[0].grid
    if len(components) != grid.dim:
        raise ValueError("need one component per axis")
    core = (slice(1, -1),) * grid.dim
    out = np.zeros(grid.shape)
    valid = np.ones(grid.shape, dtype=bool)
    acc = 0.0
    for i, c in enumerate(components):
        acc = acc + (_shifted(c.values, i, 1) - _shifted(c.values, i, -1)) / (2.0 * grid.spacing)
        valid &= c.valid
    out[core] = acc
    return ScalarField(grid, out, _erode(valid))


@dataclass(eq=False)
class PotentialSpec:
    """The potential ``V`` on the base domain ``B_1(0)`` in ``R^n``.

    ``sup_norm`` and ``grad_sup_norm`` are declared values; sampled norms on
    any grid must not exceed them.  ``mask`` (optional sympy boolean) marks
    where ``V`` is defined, e.g. away from zeros of a manufactured solution.
    """

    n: int
    expression: sp.Expr | None
    sup_norm: float
    grad_sup_norm: float
    mask: sp.Basic | None = None
    field: ScalarField | None = None
    domain_radius: float = 1.0
    label: str = ""

    def __post_init__(self):
        if self.expression is None and self.field is None:
            raise ValueError("PotentialSpec needs an expression or a sampled field")
        if self.sup_norm < 0 or self.grad_sup_norm < 0:
            raise ValueError("declared norms must be nonnegative")

    @classmethod
    def constant(cls, value: float, n: int) -> "PotentialSpec":
        return cls(n, sp.Float(value) if value else sp.Integer(0), abs(float(value)), 0.0,
                   label=f"{value}")

    @classmethod
    def from_expression(cls, expr, n: int, mask=None, domain_radius: float = 1.0,
                        label: str = "") -> "PotentialSpec":
        """Declare norms of a closed-form potential by dense sampling plus
        local refinement of the best samples over ``B_R(0) ∩ mask``."""
        syms = coordinate_symbols(n)
        expr = as_expression(expr, syms)
        if not (expr.free_symbols - set(syms)) == set():
            raise ValueError(f"potential uses unknown symbols {expr.free_symbols - set(syms)}")
        grad = [sp.diff(expr, s) for s in syms]
        sup = _declared_max(sp.Abs(expr), syms, mask, domain_radius)
        gsup = _declared_max(sp.sqrt(sum(g**2 for g in grad)), syms, mask, domain_radius)
        return cls(n, expr, sup, gsup, mask=mask, domain_radius=domain_radius,
                   label=label or str(expr))

    @classmethod
    def from_field(cls, field: ScalarField, domain_radius: float = 1.0) -> "PotentialSpec":
        """Potential known only through samples; norms are the sampled ones."""
        inside = _node_radius2(field.grid, (0.0,) * field.grid.dim) <= domain_radius**2
        sel = inside & field.valid
        g = gradient(field)
        gsel = sel & g[0].valid
        gnorm = np.sqrt(sum(c.values**2 for c in g))
        return cls(field.grid.dim, None,
                   float(np.max(np.abs(field.values[sel]))) if sel.any() else 0.0,
                   float(np.max(gnorm[gsel])) if gsel.any() else 0.0,
                   field=field, domain_radius=domain_radius, label="sampled")

    @cached_property
    def symbols(self):
        return coordinate_symbols(self.n)

    @cached_property
    def gradient_expressions(self):
        if self.expression is None:
            return None
        return [sp.diff(self.expression, s) for s in self.symbols]

    def _mask_values(self, grid: GridSpec, coords) -> np.ndarray:
        if self.mask is None:
            return np.ones(grid.shape, dtype=bool)
        fn = sp.lambdify(self.symbols, self.mask, modules="numpy")
        return np.broadcast_to(np.asarray(fn(*coords), dtype=bool), grid.shape).copy()

    def sample(self, grid: GridSpec) -> ScalarField:
        """``V`` on a base grid (``grid.dim == n``); masked nodes are invalid."""
        if grid.dim != self.n:
            raise ValueError(f"potential is {self.n}-dimensional, grid is {grid.dim}")
        if self.expression is None:
            if self.field.grid != grid:
                raise ValueError("sampled potential lives on a different grid")
            return self.field
        mask = self._mask_values(grid, grid.coords())
        fn = sp.lambdify(self.symbols, self.expression, modules="numpy")
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.broadcast_to(np.asarray(fn(*grid.coords()), dtype=float), grid.shape)
        mask &= np.isfinite(vals)
        return ScalarField(grid, np.where(mask, vals, 0.0), mask, source=str(self.expression))

    def sample_gradient(self, grid: GridSpec) -> list[ScalarField]:
        if self.expression is None:
            return gradient(self.sample(grid))
        base = self.sample(grid)
        out = []
        for g in self.gradient_expressions:
            fn = sp.lambdify(self.symbols, g, modules="numpy")
            with np.errstate(divide="ignore", invalid="ignore"):
                vals = np.broadcast_to(np.asarray(fn(*grid.coords()), dtype=float), grid.shape)
            ok = base.valid & np.isfinite(vals)
            out.append(ScalarField(grid, np.where(ok, vals, 0.0), ok))
        return out

    def sampled_norms(self, grid: GridSpec) -> tuple[float, float]:
        """Sampled ``(sup |V|, sup |grad V|)`` over nodes in ``B_R(0)``."""
        V = self.sample(grid)
        g = self.sample_gradient(grid)
        inside = _node_radius2(grid, (0.0,) * grid.dim) <= self.domain_radius**2
        sel = inside & V.valid
        gsel = inside & g[0].valid
        gnorm = np.sqrt(sum(c.values**2 for c in g))
        return (
            float(np.max(np.abs(V.values[sel]))) if sel.any() else 0.0,
            float(np.max(gnorm[gsel])) if gsel.any() else 0.0,
        )


_DENSE_POINTS = {1: 20001, 2: 1201, 3: 161}


def _declared_max(expr, syms, mask, radius) -> float:
    from scipy.optimize import minimize

    expr = as_expression(expr, syms)
    if not expr.free_symbols and mask is None:
        return abs(float(expr))
    n = len(syms)
    fn = sp.lambdify(syms, expr, modules="numpy")
    mfn = sp.lambdify(syms, mask, modules="numpy") if mask is not None else None
    ax = np.linspace(-radius, radius, _DENSE_POINTS[n])
    pts = np.meshgrid(*([ax] * n), indexing="ij")
    inside = sum(p**2 for p in pts) <= radius**2
    if mfn is not None:
        inside &= np.broadcast_to(np.asarray(mfn(*pts), dtype=bool), inside.shape)
    if not inside.any():
        raise ValueError("potential domain is empty")
    if not expr.free_symbols:
        return abs(float(expr))
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.broadcast_to(np.asarray(fn(*pts), dtype=float), inside.shape)
    vals = np.where(inside & np.isfinite(vals), vals, -np.inf)
    best = float(np.max(vals))
    flat = np.argsort(vals, axis=None)[-8:]

    def neg(x):
        if np.sum(x**2) > radius**2:
            return np.inf
        if mfn is not None and not bool(mfn(*x)):
            return np.inf
        val = float(fn(*x))
        return -val if np.isfinite(val) else np.inf

    for f in flat:
        x0 = np.array([p.flat[f] for p in np.broadcast_arrays(*pts)])
        res = minimize(neg, x0, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        if np.isfinite(res.fun):
            best = max(best, -float(res.fun))
    return best
