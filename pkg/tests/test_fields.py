import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from bilapfreq.fields import (GridSpec, PotentialSpec, ScalarField, coordinate_symbols, divergence,
                              gradient, laplacian, sup_norm)


@pytest.fixture(scope="module")
def grid2():
    return GridSpec(2, 1.0, 129)


def interior(f: ScalarField) -> np.ndarray:
    return f.values[f.valid]


# ---------------------------------------------------------------- GridSpec

def test_grid_spacing_and_origin_node():
    g = GridSpec(2, 0.5, 129)
    assert g.spacing == pytest.approx(1 / 128)
    assert g.axis[g.mid] == 0.0
    assert g.shape == (129, 129)
    assert g.lifted().dim == 3 and g.lifted().base() == g


@pytest.mark.parametrize("points", [16, 18, 15])
def test_grid_rejects_bad_point_counts(points):
    with pytest.raises(ValueError):
        GridSpec(2, 1.0, points)


def test_grid_rejects_dimension_and_extent():
    with pytest.raises(ValueError):
        GridSpec(4, 1.0, 17)
    with pytest.raises(ValueError):
        GridSpec(2, 0.0, 17)


def test_snap_moves_to_nearest_node():
    g = GridSpec(2, 0.5, 17)
    assert g.snap((0.01, -0.2)) == pytest.approx((0.0, -0.1875))


# ---------------------------------------------------------------- sup_norm

def test_sup_norm_zero_field(grid2):
    assert sup_norm(ScalarField.zeros(grid2), 0.5) == 0.0


def test_sup_norm_linear(grid2):
    f = ScalarField.from_expression("x1", grid2)
    assert abs(sup_norm(f, 0.5) - 0.5) <= grid2.spacing


def test_sup_norm_product_of_sines(grid2):
    f = ScalarField.from_expression("sin(2*x1)*sin(2*x2)", grid2)
    val = sup_norm(f, 1.0)
    # dense-sampling oracle on the unit disc
    th = np.linspace(0, 2 * np.pi, 4001)
    rr = np.linspace(0, 1, 2001)
    R, T = np.meshgrid(rr, th)
    dense = np.max(np.abs(np.sin(2 * R * np.cos(T)) * np.sin(2 * R * np.sin(T))))
    assert val <= 1.0
    assert val >= math.sin(math.pi / 4) ** 2 * (1 - 4 * grid2.spacing)
    assert val <= dense + 1e-12


def test_sup_norm_without_nodes_is_under_resolved(grid2):
    h = grid2.spacing
    with pytest.raises(ValueError, match="ball under-resolved"):
        sup_norm(ScalarField.zeros(grid2), h / 10, center=(h / 2, h / 2))


# ---------------------------------------------------------------- operators

def test_laplacian_of_constant(grid2):
    lap = laplacian(ScalarField.from_expression("3.5", grid2))
    assert np.all(interior(lap) == 0.0)
    assert not lap.valid[0, :].any() and not lap.valid[:, -1].any()


def test_laplacian_exact_on_quadratic(grid2):
    lap = laplacian(ScalarField.from_expression("x1**2 + x2**2", grid2))
    assert np.max(np.abs(interior(lap) - 4.0)) < 1e-9


def test_laplacian_exact_on_quadratic_3d():
    g = GridSpec(3, 0.5, 33)
    lap = laplacian(ScalarField.from_expression("x1**2 + x2**2 + x3**2", g))
    assert np.max(np.abs(interior(lap) - 6.0)) < 1e-9


def _lap_error(P):
    g = GridSpec(2, 1.0, P)
    f = ScalarField.from_expression("sin(2*x1)*sin(2*x2)", g)
    err = laplacian(f) - (-8.0) * f
    return float(np.max(np.abs(interior(err))))


def test_laplacian_second_order_refinement():
    e1, e2, e3 = _lap_error(33), _lap_error(65), _lap_error(129)
    assert math.log2(e1 / e2) >= 1.9
    assert math.log2(e2 / e3) >= 1.9
    assert 3.5 <= e2 / e3 <= 4.5


def test_gradient_constant_linear_quadratic(grid2):
    zero = gradient(ScalarField.from_expression("2.0", grid2))
    assert all(np.all(interior(c) == 0.0) for c in zero)
    gx = gradient(ScalarField.from_expression("x1", grid2))
    assert np.max(np.abs(interior(gx[0]) - 1.0)) < 1e-12
    assert np.max(np.abs(interior(gx[1]))) == 0.0
    gq = gradient(ScalarField.from_expression("x1**2", grid2))
    x1 = grid2.coords()[0] * np.ones(grid2.shape)
    assert np.max(np.abs(interior(gq[0]) - 2 * x1[gq[0].valid])) < 1e-12
    assert np.max(np.abs(interior(gq[1]))) == 0.0


def test_divergence_of_gradient_matches_laplacian_on_quadratics(grid2):
    # div(grad) is the wide (2h) stencil; it agrees with the compact
    # Laplacian wherever both are exact
    f = ScalarField.from_expression("x1**2 - 3*x1*x2 + 2*x2**2 + x1", grid2)
    a, b = divergence(gradient(f)), laplacian(f)
    m = a.valid & b.valid
    assert np.max(np.abs(a.values[m] - b.values[m])) < 1e-8


@given(a=st.floats(-5, 5), b=st.floats(-5, 5))
def test_operators_are_linear(a, b):
    g = GridSpec(2, 1.0, 17)
    f = ScalarField.from_expression("sin(3*x1)*x2", g)
    k = ScalarField.from_expression("exp(x1)*cos(x2)", g)
    comb = a * f + b * k
    lhs, rhs = laplacian(comb), a * laplacian(f) + b * laplacian(k)
    scale = 1 + abs(a) + abs(b)
    assert np.max(np.abs(lhs.values - rhs.values)) <= 1e-9 * scale * 256
    for gl, gf, gk in zip(gradient(comb), gradient(f), gradient(k)):
        assert np.max(np.abs(gl.values - (a * gf + b * gk).values)) <= 1e-10 * scale * 16


# ---------------------------------------------------------------- fields

def test_field_rejects_nonfinite_values(grid2):
    vals = np.zeros(grid2.shape)
    vals[3, 3] = np.nan
    with pytest.raises(ValueError):
        ScalarField(grid2, vals)


def test_field_values_immutable(grid2):
    f = ScalarField.zeros(grid2)
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


def test_fields_on_different_grids_do_not_mix(grid2):
    with pytest.raises(ValueError):
        ScalarField.zeros(grid2) + ScalarField.zeros(GridSpec(2, 1.0, 17))


# ---------------------------------------------------------------- potentials

def test_potential_declared_norms_dominate_samples():
    x1, x2 = coordinate_symbols(2)
    V = PotentialSpec.from_expression(64 + x1 * sp.sin(3 * x2), 2)
    for P in (33, 65):
        s, g = V.sampled_norms(GridSpec(2, 1.0, P))
        assert s <= V.sup_norm + 1e-12
        assert g <= V.grad_sup_norm + 1e-12


def test_constant_potential_norms():
    V = PotentialSpec.constant(64.0, 2)
    assert V.sup_norm == 64.0 and V.grad_sup_norm == 0.0


def test_potential_with_unknown_symbol():
    with pytest.raises(ValueError):
        PotentialSpec.from_expression(sp.Symbol("y"), 2)


def test_string_and_plain_symbol_expressions_bind_to_coordinates():
    from bilapfreq.fields import as_expression
    x = coordinate_symbols(2)
    for e in ("x1**3 + x1*x2**2", sp.Symbol("x1") ** 3 + sp.Symbol("x1") * sp.Symbol("x2") ** 2):
        expr = as_expression(e, x)
        assert sp.diff(expr, x[0], 2) + sp.diff(expr, x[1], 2) == 8 * x[0]
