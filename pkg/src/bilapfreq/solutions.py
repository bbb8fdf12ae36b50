"""Test solutions: a closed-form case library, manufactured potentials and a
finite-difference solver for ``Δ²u = Vu`` on a square."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla
import sympy as sp

from .decompose import LiftedSystem
from .fields import (GridSpec, PotentialSpec, ScalarField, _DENSE_POINTS, as_expression,
                     coordinate_symbols, laplacian)
from .lifting import LiftParams, lift_solution, select_params

__all__ = [
    "CaseSpec",
    "SolveConfig",
    "SolveResult",
    "builtin_case",
    "list_cases",
    "manufacture_potential",
    "bilaplacian_expr",
    "solve_biharmonic",
    "build_system",
]



@dataclass(eq=False)
class CaseSpec:
    """A closed-form solution of ``Δ²u = Vu`` with analytic metadata.

    ``lifted`` optionally gives the lifted field directly, in the symbols
    ``(x1, .., xn, t)``.  It is used for ``n = 1`` harmonic polynomials of
    degree >= 2, which are solutions of the lifted system with ``λ = 0``
    but not lifts of a one-variable function.
    """

    name: str
    n: int
    u: sp.Expr
    V: PotentialSpec
    k: int | None = None
    mu: float | None = None
    expected_order: float | None = None
    lifted: sp.Expr | None = None
    seed: int | None = None
    notes: str = ""

    def expected_N(self, alpha: float) -> float | None:
        """``2k(α+1)`` for homogeneous harmonic cases, else ``None``."""
        if self.k is None or not self.name.startswith("harmonic"):
            return None
        return 2.0 * self.k * (alpha + 1.0)


def bilaplacian_expr(u, n: int) -> sp.Expr:
    syms = coordinate_symbols(n)
    lap = sum(sp.diff(u, s, 2) for s in syms)
    return sum(sp.diff(lap, s, 2) for s in syms)


def _sup_on_ball(expr, n: int, radius: float = 1.0) -> float:
    syms = coordinate_symbols(n)
    fn = sp.lambdify(syms, sp.Abs(expr), modules="numpy")
    ax = np.linspace(-radius, radius, _DENSE_POINTS[n])
    pts = np.meshgrid(*([ax] * n), indexing="ij")
    inside = sum(p**2 for p in pts) <= radius**2
    vals = np.broadcast_to(np.asarray(fn(*pts), dtype=float), inside.shape)
    return float(np.max(vals[inside]))


def manufacture_potential(u, n: int, floor: float | None = None, domain_radius: float = 1.0,
                          label: str = "") -> tuple[PotentialSpec, sp.Basic]:
    """``V = Δ²u / u`` where ``|u| >= floor``.

    ``floor`` defaults to ``0.1 * sup |u|`` over ``B_R(0)``.  Returns the
    potential and the sympy mask; norms are taken over the masked ball.
    """
    u = as_expression(u, coordinate_symbols(n))
    if floor is None:
        floor = 0.1 * _sup_on_ball(u, n, domain_radius)
    if not floor > 0:
        raise ValueError("floor must be positive")
    V = sp.simplify(bilaplacian_expr(u, n) / u)
    mask = sp.Abs(u) >= floor
    try:
        spec = PotentialSpec.from_expression(V, n, mask=mask, domain_radius=domain_radius,
                                             label=label or f"manufactured({u})")
    except ValueError as exc:
        if "empty" in str(exc):
            raise ValueError("masked region is empty: |u| < floor everywhere") from exc
        raise
    return spec, mask


def _harmonic_poly(k: int, a, b) -> sp.Expr:
    return sp.expand(sp.re(sp.expand((a + sp.I * b) ** k)))


def _random_band_limited(seed: int, n: int = 2, terms: int = 4) -> sp.Expr:
    rng = np.random.default_rng(seed)
    x = coordinate_symbols(n)
    u = sp.Integer(3)
    for _ in range(terms):
        kvec = rng.integers(-2, 3, size=n)
        amp = float(rng.uniform(0.05, 0.2))
        phase = float(rng.uniform(0.0, 2.0 * math.pi))
        arg = sum(int(kc) * xs for kc, xs in zip(kvec, x)) + sp.Float(phase)
        u += sp.Float(amp) * sp.cos(arg)
    return u


_FIXED = ("zero", "harmonic_k1", "harmonic_k2", "harmonic_k3", "eigen_mu2", "eigen_mu4",
          "eigen_mu8", "quartic", "biharm_x1sq", "random_s1")


def list_cases() -> list[str]:
    """Names of the shipped library (parameterized families accept other values)."""
    return list(_FIXED)


def builtin_case(name: str, n: int | None = None) -> CaseSpec:
    """Case by name.  Families: ``harmonic_k<k>``, ``eigen_mu<mu>``, ``random_s<seed>``.

    ``n`` overrides the base dimension where that makes sense.
    """
    m = re.fullmatch(r"harmonic_k(\d+)", name)
    if m:
        k = int(m.group(1))
        if k < 1:
            raise ValueError("harmonic degree must be >= 1")
        n = (1 if k == 1 else 2) if n is None else n
        x = coordinate_symbols(n)
        if n == 1:
            t = coordinate_symbols(2, lifted=True)[1]
            u = x[0] ** k
            lifted = None if k == 1 else _harmonic_poly(k, x[0], t)
        else:
            u = _harmonic_poly(k, x[0], x[1])
            lifted = None
        return CaseSpec(name, n, u, PotentialSpec.constant(0.0, n), k=k, expected_order=k,
                        lifted=lifted, notes="homogeneous harmonic polynomial")
    m = re.fullmatch(r"eigen_mu(\d+(?:\.\d+)?)", name)
    if m:
        mu = float(m.group(1))
        n = 2 if n is None else n
        if n != 2:
            raise ValueError("eigen cases are two-dimensional")
        x = coordinate_symbols(2)
        mu_s = sp.nsimplify(mu)
        u = sp.sin(mu_s * x[0]) * sp.sin(mu_s * x[1])
        return CaseSpec(name, 2, u, PotentialSpec.constant(4.0 * mu**4, 2), k=2, mu=mu,
                        expected_order=2, notes="separable eigenfunction, V = 4 mu^4")
    m = re.fullmatch(r"random_s(\d+)", name)
    if m:
        seed = int(m.group(1))
        n = 2 if n is None else n
        u = _random_band_limited(seed, n)
        V, _ = manufacture_potential(u, n, label=f"random band-limited (seed {seed})")
        return CaseSpec(name, n, u, V, k=0, expected_order=0, seed=seed,
                        notes="seeded band-limited field with manufactured V")
    if name == "zero":
        n = 2 if n is None else n
        return CaseSpec(name, n, sp.Integer(0), PotentialSpec.constant(0.0, n),
                        notes="identically zero (error paths)")
    if name == "quartic":
        n = 2 if n is None else n
        x = coordinate_symbols(n)
        u = x[0] ** 4 + 1
        V, _ = manufacture_potential(u, n, label="24/(x1^4+1)")
        return CaseSpec(name, n, u, V, k=0, expected_order=0,
                        notes="manufactured quartic, V = 24/(x1^4+1)")
    if name == "biharm_x1sq":
        n = 1 if n is None else n
        x = coordinate_symbols(n)
        return CaseSpec(name, n, x[0] ** 2, PotentialSpec.constant(0.0, n), k=2,
                        expected_order=2, notes="biharmonic x1^2, w = 2")
    raise ValueError(f"unknown case {name!r}; available: {', '.join(_FIXED)} "
                     "(families harmonic_k<k>, eigen_mu<mu>, random_s<seed>)")


def build_system(case: CaseSpec, points_per_axis: int = 129, extent: float = 0.5,
                 alpha_floor: float = 0.0, u_field: ScalarField | None = None) -> LiftedSystem:
    """Lift a case onto the ``(n+1)``-dimensional grid and form ``(ũ, w)``.

    ``u_field`` replaces the closed form by sampled base values (e.g. a
    solver result on the matching base grid).
    """
    base = GridSpec(case.n, extent, points_per_axis)
    grid = base.lifted()
    params = select_params(case.V, alpha_floor)
    if case.lifted is not None and u_field is None:
        if params.lam != 0:
            raise ValueError("direct lifted expressions require lambda = 0")
        ut = ScalarField.from_expression(case.lifted, grid, coordinate_symbols(grid.dim, True))
    else:
        u = u_field if u_field is not None else ScalarField.from_expression(case.u, base)
        if u.grid != base:
            raise ValueError("u_field does not live on the case's base grid")
        ut = lift_solution(u, params, grid)
    return LiftedSystem.build(ut, params, case.V, label=case.name)


# ---------------------------------------------------------------- solver


@dataclass(eq=False)
class SolveConfig:
    """Discrete Navier problem: ``u`` and ``Δu`` given on the square boundary.

    ``boundary_u`` and ``boundary_lap`` are full grid arrays; only their
    boundary faces are read.
    """

    grid: GridSpec
    V: PotentialSpec
    boundary_u: np.ndarray
    boundary_lap: np.ndarray
    tol: float = 1e-12
    max_iter: int = 50
    method: str = "stationary"

    def __post_init__(self):
        if self.grid.dim != 2:
            raise ValueError("the solver is two-dimensional")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.method not in ("stationary", "gmres"):
            raise ValueError(f"unknown method {self.method!r}")
        for a in (self.boundary_u, self.boundary_lap):
            if np.shape(a) != self.grid.shape:
                raise ValueError("boundary arrays must match the grid shape")

    @classmethod
    def from_exact(cls, grid: GridSpec, V: PotentialSpec, u_exact, **kw) -> "SolveConfig":
        """Boundary data from a closed form ``u`` and its Laplacian."""
        x = coordinate_symbols(2)
        u_exact = as_expression(u_exact, x)
        lap = sum(sp.diff(u_exact, s, 2) for s in x)
        bu = ScalarField.from_expression(u_exact, grid).values
        bl = ScalarField.from_expression(lap, grid).values
        return cls(grid, V, np.array(bu), np.array(bl), **kw)


@dataclass
class SolveResult:
    u: ScalarField
    residual: float
    scale: float
    history: list[float] = field(default_factory=list)
    iterations: int = 0


def _laplace_1d(m: int, h: float) -> sps.csr_matrix:
    return sps.diags([np.ones(m - 1), -2.0 * np.ones(m), np.ones(m - 1)], [-1, 0, 1]) / h**2


def _assemble(cfg: SolveConfig):
    """Coupled operator on interior ``(u, v)`` and its right side."""
    g = cfg.grid
    P, h = g.points_per_axis, g.spacing
    m = P - 2
    T = _laplace_1d(m, h)
    I = sps.identity(m, format="csr")
    L = (sps.kron(T, I) + sps.kron(I, T)).tocsc()
    Vf = cfg.V.sample(g)
    if not Vf.valid[1:-1, 1:-1].all():
        raise ValueError("potential undefined at interior solver nodes")
    Vd = sps.diags(Vf.values[1:-1, 1:-1].ravel())
    Id = sps.identity(m * m, format="csc")
    A = sps.bmat([[L, -Id], [-Vd, L]], format="csc")

    def boundary_rhs(b):
        # contributions of known boundary values to the interior 5-point stencil
        full = np.array(b, dtype=float)
        full[1:-1, 1:-1] = 0.0
        r = np.zeros((m, m))
        r += full[:-2, 1:-1] + full[2:, 1:-1] + full[1:-1, :-2] + full[1:-1, 2:]
        return -(r / h**2).ravel()

    rhs = np.concatenate([boundary_rhs(cfg.boundary_u), boundary_rhs(cfg.boundary_lap)])
    return A, L, rhs, Vf


def _inf(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def solve_biharmonic(cfg: SolveConfig) -> SolveResult:
    """Solve ``Δ_h(Δ_h u) = V u`` with Navier boundary data.

    The coupled system ``L u - v = b_u``, ``L v - V u = b_v`` is solved either
    by a stationary iteration (iterative refinement preconditioned with a
    sparse LU of the coupled operator; default, bit-reproducible) or by
    GMRES with a block-triangular Laplacian preconditioner.  The contract
    is ``max |Δ_h²u - Vu| <= tol * scale`` on the doubly-interior nodes,
    ``scale = (64/h⁴ + ||V||) * max|u|``.
    """
    g = cfg.grid
    m = g.points_per_axis - 2
    A, L, rhs, Vf = _assemble(cfg)
    history: list[float] = []
    bnorm = _inf(rhs)

    if cfg.method == "stationary":
        lu = spla.splu(A)
        x = np.zeros_like(rhs)
        it = 0
        anorm = float(abs(A).sum(axis=1).max())
        while True:
            r = rhs - A @ x
            rel = _inf(r) / max(anorm * _inf(x) + bnorm, np.finfo(float).tiny)
            history.append(rel)
            if rel <= cfg.tol or it >= cfg.max_iter:
                break
            x = x + lu.solve(r)
            it += 1
    else:
        lu_L = spla.splu(L.tocsc())
        N = m * m

        def prec(b):
            v = lu_L.solve(b[N:] + 0.0)
            u = lu_L.solve(b[:N] + v)
            return np.concatenate([u, v])

        M = spla.LinearOperator(A.shape, matvec=prec)

        def cb(res):
            history.append(float(res))

        x, info = spla.gmres(A, rhs, M=M, rtol=cfg.tol, atol=0.0, restart=50,
                             maxiter=cfg.max_iter, callback=cb, callback_type="pr_norm")
        it = len(history)

    u = np.array(cfg.boundary_u, dtype=float)
    u[1:-1, 1:-1] = x[: m * m].reshape(m, m)
    uf = ScalarField(g, u)
    h = g.spacing
    resid_field = laplacian(laplacian(uf)) - Vf * uf
    resid = _inf(resid_field.values[resid_field.valid])
    scale = (64.0 / h**4 + cfg.V.sup_norm) * max(_inf(u), np.finfo(float).tiny)
    if not resid <= cfg.tol * scale:
        raise RuntimeError(
            f"solver did not converge: residual {resid:.3e} > {cfg.tol:.1e} * {scale:.3e} "
            f"after {it} iterations; history {history}")
    return SolveResult(uf, resid, scale, history, it)
