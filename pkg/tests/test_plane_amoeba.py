import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import polygamma

from amoebalab.laurent import LaurentPolynomial, newton_polygon
from amoebalab.numerics import fd_hessian
from amoebalab.plane_amoeba import (AmoebaError, area_report, in_amoeba, log_preimages, ma_hessian,
                                    membership_raster, order_map, ronkin_gradient, ronkin_value)


def mahler_line():
    # m(1 + z1 + z2) = 3 sqrt(3) / (4 pi) L(chi_-3, 2), L = (psi'(1/3) - psi'(2/3)) / 9
    L = (polygamma(1, 1 / 3) - polygamma(1, 2 / 3)) / 9
    return 3 * math.sqrt(3) / (4 * math.pi) * L


def brute_ronkin(f, x, n=3200):
    """Midpoint rule for the torus average of ``log|f|``, in row chunks."""
    t = 2 * math.pi * (np.arange(n) + 0.5) / n
    z2 = np.exp(x[1] + 1j * t)
    total = 0.0
    for chunk in np.array_split(t, 16):
        z1 = np.exp(x[0] + 1j * chunk)[:, None]
        total += np.log(np.abs(f(z1, z2[None, :]))).sum()
    return total / n**2


def test_monomial_and_constant():
    assert ronkin_value(LaurentPolynomial({(1, 0): 1}), (0.7, -3)) == pytest.approx(0.7, abs=1e-14)
    assert ronkin_value(LaurentPolynomial({(0, 0): 3}), (1, 2)) == pytest.approx(math.log(3), abs=1e-14)


def test_line_at_origin_is_mahler_measure(line):
    assert mahler_line() == pytest.approx(0.3230659472, abs=1e-10)
    assert ronkin_value(line, (0, 0)) == pytest.approx(mahler_line(), abs=1e-6)


def test_ronkin_matches_torus_average():
    f = LaurentPolynomial({(0, 0): 1, (1, 0): 2 - 1j, (0, 1): 0.4, (1, 1): 3, (-1, 1): 0.2})
    for x in [(0.3, -0.2), (-1.5, 1.0), (2.0, -3.0)]:
        assert ronkin_value(f, x) == pytest.approx(brute_ronkin(f, x), abs=1e-6)


def test_ronkin_needs_nodes(line):
    with pytest.raises(AmoebaError):
        ronkin_value(line, (0, 0), nodes=16)


def test_order_map_examples(line):
    assert order_map(line, (-10, -10)) == (0, 0)
    assert order_map(line, (10, 0)) == (1, 0)
    assert order_map(line, (0, 10)) == (0, 1)
    assert order_map(line, (0, 0)) == "interior"


def test_order_map_detects_inner_component():
    # a dominant interior coefficient opens a bounded complement component
    f = LaurentPolynomial({(0, 0): 1, (2, 1): 1, (1, 2): 1, (1, 1): -8})
    assert order_map(f, (0, 0)) == (1, 1)


def test_translation_covariance(line):
    g = line.shifted(2, -1)
    for x in [(-10, -10), (10, 0), (0.4, 0.1)]:
        assert ronkin_value(g, x) == pytest.approx(ronkin_value(line, x) + 2 * x[0] - x[1], abs=1e-9)
        o = order_map(line, x)
        if o != "interior":
            assert order_map(g, x) == (o[0] + 2, o[1] - 1)


def test_gradient_lies_in_newton_polygon(line):
    poly = newton_polygon(line)
    rng = np.random.default_rng(3)
    for x in rng.uniform(-3, 3, size=(15, 2)):
        assert poly.contains(ronkin_gradient(line, x), tol=1e-6)


def test_affine_linearity_on_a_complement_component(line):
    a, b = np.array([-4.0, -6.0]), np.array([-5.0, -3.5])
    ga, gb = ronkin_gradient(line, a), ronkin_gradient(line, b)
    assert np.allclose(ga, gb, atol=1e-6)
    assert ronkin_value(line, b) - ronkin_value(line, a) == pytest.approx(ga @ (b - a), abs=1e-6)


def test_membership_raster_examples(line):
    r = membership_raster(line, (-12, 4, -12, 4), 64)
    x, y = r.axes()
    cell = lambda p: r.cells[np.argmin(abs(x - p[0])), np.argmin(abs(y - p[1]))]  # noqa: E731
    assert not cell((-10, -10))
    assert cell((0, 0))
    with pytest.raises(AmoebaError):
        membership_raster(line, (-1, 1, -1, 1), 8)


def test_membership_raster_hyperbola_is_antidiagonal():
    f = LaurentPolynomial({(1, 1): 1, (0, 0): -1})
    r = membership_raster(f, (-2, 2, -2, 2), 32)
    x, y = r.axes()
    X, Y = np.meshgrid(x, y, indexing="ij")
    near = np.abs(X + Y) <= r.spacing[0] + 1e-12
    assert r.cells[~near].sum() == 0
    assert np.all(r.cells[np.abs(X + Y) < 1e-9])


def test_ma_hessian_at_origin(line):
    h = ma_hessian(line, (0, 0))
    expected = 2 / (math.pi * math.sqrt(3)) * np.array([[1, -0.5], [-0.5, 1]])
    assert np.allclose(h.as_array(), expected, atol=1e-9)
    assert h.det == pytest.approx(1 / math.pi**2, abs=1e-9)
    assert len(log_preimages(line, (0, 0))) == 2


def test_ma_hessian_matches_finite_differences(line):
    x = (0.3, 0.1)
    fd = fd_hessian(lambda p: ronkin_value(line, p, nodes=512), x, 1e-3)
    assert np.allclose(ma_hessian(line, x).as_array(), fd.as_array(), atol=1e-4)


def test_ma_hessian_determinant_lower_bound(line):
    rng = np.random.default_rng(5)
    count = 0
    for x in rng.uniform(-1.5, 1.0, size=(40, 2)):
        if not in_amoeba(line, x):
            continue
        count += 1
        assert ma_hessian(line, x).det >= 1 / math.pi**2 - 1e-9
    assert count > 10


def test_ma_hessian_zero_off_amoeba(line):
    assert ma_hessian(line, (-5, -5)).det == 0


def test_area_report_line(line):
    rep = area_report(line, (-9, 7, -9, 7), resolution=128)
    assert rep.amoeba_area == pytest.approx(math.pi**2 / 2, rel=0.01)
    assert rep.ratio == pytest.approx(1, abs=0.01)


def test_area_report_non_harnack_square():
    f = LaurentPolynomial({(0, 0): 1, (1, 0): 1, (0, 1): 1, (1, 1): 3})
    rep = area_report(f, (-9, 8, -9, 8), resolution=128)
    assert rep.ratio < 1


def test_area_report_degenerate():
    rep = area_report(LaurentPolynomial({(1, 1): 1, (0, 0): -1}))
    assert rep.degenerate and rep.amoeba_area == 0 and math.isnan(rep.ratio)


def test_area_report_window_too_small(line):
    with pytest.raises(AmoebaError, match="window too small"):
        area_report(line, (-1, 1, -1, 1), resolution=32)


coef = st.floats(0.2, 5.0)


@settings(max_examples=15, deadline=None)
@given(coef, coef, coef, coef, st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2),
       st.floats(-2, 2), st.floats(0.05, 0.95))
def test_ronkin_convex_along_segments(c0, c1, c2, c3, a1, a2, b1, b2, lam):
    f = LaurentPolynomial({(0, 0): c0, (1, 0): c1, (0, 1): -c2, (1, 1): c3})
    a, b = np.array([a1, a2]), np.array([b1, b2])
    mid = lam * a + (1 - lam) * b
    left = ronkin_value(f, mid)
    right = lam * ronkin_value(f, a) + (1 - lam) * ronkin_value(f, b)
    assert left <= right + 1e-8
