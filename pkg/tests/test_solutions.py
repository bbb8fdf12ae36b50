import math

import numpy as np
import pytest
import sympy as sp

from bilapfreq.fields import GridSpec, PotentialSpec, ScalarField, coordinate_symbols
from bilapfreq.solutions import (SolveConfig, bilaplacian_expr, builtin_case, list_cases,
                                 manufacture_potential, solve_biharmonic)

X = coordinate_symbols(2)
ZERO2 = PotentialSpec.constant(0.0, 2)


# ---------------------------------------------------------------- library

def test_library_names():
    names = list_cases()
    for n in ("harmonic_k1", "harmonic_k2", "harmonic_k3", "eigen_mu2", "eigen_mu8",
              "random_s1", "quartic", "biharm_x1sq", "zero"):
        assert n in names


def test_unknown_case_message_lists_library():
    with pytest.raises(ValueError, match="unknown case 'nope'; available: .*harmonic_k1"):
        builtin_case("nope")


def test_family_members_resolve():
    assert builtin_case("harmonic_k5").expected_N(1.0) == pytest.approx(20.0)
    assert builtin_case("eigen_mu4").V.sup_norm == pytest.approx(4 * 4.0**4)
    with pytest.raises(ValueError):
        builtin_case("eigen_mu2", n=1)
    with pytest.raises(ValueError):
        builtin_case("harmonic_k0")


def test_eigen_potential():
    c = builtin_case("eigen_mu2")
    assert c.V.sup_norm == 64.0 and c.V.grad_sup_norm == 0.0
    assert sp.simplify(bilaplacian_expr(c.u, 2) - 64 * c.u) == 0


@pytest.mark.parametrize("name", [n for n in list_cases() if n != "zero"])
def test_library_solves_its_equation(name):
    c = builtin_case(name)
    g = GridSpec(c.n, 0.5, 33)
    lhs = ScalarField.from_expression(bilaplacian_expr(c.u, c.n), g)
    rhs = c.V.sample(g) * ScalarField.from_expression(c.u, g)
    ok = lhs.valid & rhs.valid
    assert np.max(np.abs(lhs.values[ok] - rhs.values[ok])) < 1e-8 * (1 + np.max(np.abs(lhs.values)))


@pytest.mark.parametrize("name", [n for n in list_cases() if n != "zero"])
def test_sampled_norms_within_declared(name):
    c = builtin_case(name)
    g = GridSpec(c.n, 0.5, 33)
    V = c.V.sample(g)
    assert np.max(np.abs(V.values[V.valid])) <= c.V.sup_norm * (1 + 1e-12)


# ---------------------------------------------------------------- manufactured potentials

def test_manufactured_eigen_is_constant():
    V, _ = manufacture_potential(sp.sin(2 * X[0]) * sp.sin(2 * X[1]), 2, floor=0.1)
    assert V.sup_norm == pytest.approx(64.0) and V.grad_sup_norm == pytest.approx(0.0, abs=1e-9)


def test_manufactured_harmonic_is_zero():
    V, _ = manufacture_potential(X[0] ** 2 - X[1] ** 2 + 3, 2, floor=0.5)
    assert V.sup_norm == 0.0


def test_manufactured_quartic():
    V, mask = manufacture_potential(X[0] ** 4 + 1, 2, floor=0.5)
    assert V.sup_norm == pytest.approx(24.0)
    assert bool(mask.subs({X[0]: 0, X[1]: 0}))


def test_manufactured_errors():
    with pytest.raises(ValueError, match="masked region is empty"):
        manufacture_potential(X[0] * 1e-3, 2, floor=1.0)
    with pytest.raises(ValueError, match="floor must be positive"):
        manufacture_potential(X[0] + 1, 2, floor=0.0)


# ---------------------------------------------------------------- solver

def _solve(expr, P, V=ZERO2, **kw):
    g = GridSpec(2, 0.5, P)
    res = solve_biharmonic(SolveConfig.from_exact(g, V, expr, **kw))
    exact = ScalarField.from_expression(expr, g).values
    return res, float(np.max(np.abs(res.u.values - exact)))


@pytest.mark.parametrize("expr", ["x1**2 - x2**2 + 0.5*x1*x2 + 1", "x1**3 + x1*x2**2 - x2"])
def test_solver_exact_on_low_degree(expr):
    # Δ_h is exact on cubics, so the discrete solution equals the closed form
    res, err = _solve(expr, 33)
    assert err < 1e-11
    assert res.residual <= 1e-12 * res.scale


def test_solver_second_order_on_eigen():
    V = PotentialSpec.constant(64.0, 2)
    _, e1 = _solve("sin(2*x1)*sin(2*x2)", 33, V)
    _, e2 = _solve("sin(2*x1)*sin(2*x2)", 65, V)
    assert 3.5 <= e1 / e2 <= 4.5


def test_solver_gmres_matches_stationary():
    V = PotentialSpec.constant(64.0, 2)
    a, _ = _solve("sin(2*x1)*sin(2*x2)", 33, V)
    b, _ = _solve("sin(2*x1)*sin(2*x2)", 33, V, method="gmres", tol=1e-10, max_iter=200)
    assert np.max(np.abs(a.u.values - b.u.values)) < 1e-6


def test_solver_nonconvergence_reports_history():
    with pytest.raises(RuntimeError, match="did not converge.*history"):
        _solve("sin(2*x1)*sin(2*x2)", 33, PotentialSpec.constant(64.0, 2), tol=1e-30, max_iter=1)


def test_solver_is_deterministic():
    V = PotentialSpec.constant(64.0, 2)
    a, _ = _solve("sin(2*x1)*sin(2*x2)", 33, V)
    b, _ = _solve("sin(2*x1)*sin(2*x2)", 33, V)
    assert np.array_equal(a.u.values, b.u.values) and a.history == b.history


def test_solver_config_validation():
    g = GridSpec(2, 0.5, 17)
    z = np.zeros(g.shape)
    with pytest.raises(ValueError, match="two-dimensional"):
        SolveConfig(GridSpec(1, 0.5, 17), ZERO2, np.zeros(17), np.zeros(17))
    with pytest.raises(ValueError, match="tolerance"):
        SolveConfig(g, ZERO2, z, z, tol=0.0)
    with pytest.raises(ValueError, match="max_iter"):
        SolveConfig(g, ZERO2, z, z, max_iter=0)
    with pytest.raises(ValueError, match="unknown method"):
        SolveConfig(g, ZERO2, z, z, method="cg")
    with pytest.raises(ValueError, match="shape"):
        SolveConfig(g, ZERO2, np.zeros((3, 3)), z)


def test_solver_zero_data_gives_zero():
    g = GridSpec(2, 0.5, 17)
    z = np.zeros(g.shape)
    res = solve_biharmonic(SolveConfig(g, PotentialSpec.constant(64.0, 2), z, z))
    assert np.all(res.u.values == 0.0) and not math.isnan(res.residual)
