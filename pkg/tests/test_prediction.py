"""Child prediction stencils: tables, consistency, polynomial exactness."""

import numpy as np
import pytest

from mrfv.prediction import (PredictionScheme, coarsen_all, coarsen_axis,
                             refine_all, refine_axis)


def cell_averages_1d(func_primitive, n, lo=0.0, hi=1.0):
    """Exact cell averages from an antiderivative."""
    edges = np.linspace(lo, hi, n + 1)
    prim = func_primitive(edges)
    return (prim[1:] - prim[:-1]) / np.diff(edges)


def test_centered_coefficients():
    s = PredictionScheme()
    assert s.order == 3
    assert s.axis_coefficients(3, 8, 0) == ((-1, 0, 1), (0.125, 1.0, -0.125))
    assert s.axis_coefficients(3, 8, 1) == ((-1, 0, 1), (-0.125, 1.0, 0.125))


def test_edge_coefficients():
    s = PredictionScheme()
    assert s.axis_coefficients(0, 8, 0) == ((0, 1, 2), (1.375, -0.5, 0.125))
    assert s.axis_coefficients(0, 8, 1) == ((0, 1, 2), (0.625, 0.5, -0.125))
    assert s.axis_coefficients(7, 8, 0) == ((-2, -1, 0), (-0.125, 0.5, 0.625))
    assert s.axis_coefficients(7, 8, 1) == ((-2, -1, 0), (0.125, -0.5, 1.375))


def test_short_axis_coefficients():
    s = PredictionScheme()
    assert s.axis_coefficients(0, 2, 0) == ((0, 1), (1.25, -0.25))
    assert s.axis_coefficients(1, 2, 1) == ((-1, 0), (-0.25, 1.25))
    assert s.axis_coefficients(0, 1, 0) == ((0,), (1.0,))
    assert s.axis_coefficients(0, 1, 1) == ((0,), (1.0,))


@pytest.mark.parametrize("pos,n", [(0, 1), (0, 2), (1, 2), (0, 5), (2, 5), (4, 5)])
def test_child_mean_consistency(pos, n):
    # averaging the two predicted children must reproduce the parent exactly,
    # whatever stencil variant applies
    s = PredictionScheme()
    offs0, c0 = s.axis_coefficients(pos, n, 0)
    offs1, c1 = s.axis_coefficients(pos, n, 1)
    assert offs0 == offs1
    mean = {o: 0.5 * (a + b) for o, a, b in zip(offs0, c0, c1)}
    for o, c in mean.items():
        assert c == (1.0 if o == 0 else 0.0)


def test_refine_axis_quadratic_exact():
    # order-3 prediction reproduces quadratics, one-sided edge stencils included
    prim = lambda x: x ** 3 / 3.0          # antiderivative of x^2
    coarse = cell_averages_1d(prim, 8)
    fine = refine_axis(coarse, 0)
    assert np.allclose(fine, cell_averages_1d(prim, 16), atol=1e-15)


def test_refine_axis_linear_exact_two_cells():
    prim = lambda x: 1.5 * x ** 2 + 2.0 * x   # antiderivative of 3x + 2
    coarse = cell_averages_1d(prim, 2)
    fine = refine_axis(coarse, 0)
    assert np.allclose(fine, cell_averages_1d(prim, 4), atol=1e-15)


def test_refine_axis_single_cell():
    assert np.array_equal(refine_axis(np.array([4.0]), 0), [4.0, 4.0])


def test_refine_axis_cubic_residual():
    # cubics are not reconstructed exactly; the defect must be nonzero but
    # shrink by ~2^3 per level in the interior
    prim = lambda x: x ** 4 / 4.0
    err = []
    for n in (16, 32):
        fine = refine_axis(cell_averages_1d(prim, n), 0)
        exact = cell_averages_1d(prim, 2 * n)
        err.append(np.max(np.abs(fine - exact)[4:-4]))
    assert err[0] > 1e-9
    assert err[0] / err[1] == pytest.approx(8.0, rel=0.15)


@pytest.mark.parametrize("n", [1, 2, 4, 8])
def test_coarsen_inverts_refine(n):
    rng = np.random.default_rng(1234 + n)
    a = rng.standard_normal(n)
    assert np.allclose(coarsen_axis(refine_axis(a, 0), 0), a, atol=1e-15)


def test_coarsen_axis_plain_average():
    a = np.array([1.0, 3.0, -2.0, 6.0])
    assert np.array_equal(coarsen_axis(a, 0), [2.0, 2.0])


def test_refine_axis_moves_only_one_axis():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((4, 3))
    out = refine_axis(a, 0)
    assert out.shape == (8, 3)
    out = refine_axis(a, 1)
    assert out.shape == (4, 6)


def test_tensor_roundtrip_2d():
    rng = np.random.default_rng(99)
    a = rng.standard_normal((4, 8))
    fine = refine_all(a)
    assert fine.shape == (8, 16)
    assert np.allclose(coarsen_all(fine), a, atol=1e-14)


def test_child_value_matches_tensor_product():
    rng = np.random.default_rng(5)
    patch = rng.standard_normal((3, 3))
    s = PredictionScheme()
    for bits in [(0, 0), (1, 0), (0, 1), (1, 1)]:
        expect = 0.0
        for ox in (-1, 0, 1):
            for oy in (-1, 0, 1):
                cx = s.axis_coefficients(1, 8, bits[0])[1][ox + 1]
                cy = s.axis_coefficients(1, 8, bits[1])[1][oy + 1]
                expect += cx * cy * patch[ox + 1, oy + 1]
        assert s.child_value(patch, bits) == pytest.approx(expect, abs=1e-15)


def test_child_value_quadratic_2d():
    # exact cell averages of x^2 + x y on a 3x3 coarse patch, unit cells
    # centered at integer coordinates; average over a unit cell at (cx, cy)
    # is cx^2 + 1/12 + cx cy
    def avg(cx, cy, h):
        return cx * cx + h * h / 12.0 + cx * cy

    patch = np.array([[avg(x, y, 1.0) for y in (-1, 0, 1)] for x in (-1, 0, 1)])
    s = PredictionScheme()
    # child (0, 0) of the center cell occupies [-0.5, 0] x [-0.5, 0]
    got = s.child_value(patch, (0, 0))
    assert got == pytest.approx(avg(-0.25, -0.25, 0.5), abs=1e-14)
    got = s.child_value(patch, (1, 1))
    assert got == pytest.approx(avg(0.25, 0.25, 0.5), abs=1e-14)
