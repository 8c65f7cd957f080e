import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amoebalab.laurent import (LaurentError, LaurentPolynomial, fiber_roots, log_gauss_R,
                               newton_polygon)


def test_parse_text_and_json_agree(line):
    js = LaurentPolynomial.from_json(line.to_json())
    assert js == line
    assert LaurentPolynomial.from_text("2+1i : -1 3  # comment\n\n") == LaurentPolynomial({(-1, 3): 2 + 1j})


@pytest.mark.parametrize("text", ["1 + z1", "1 : 0", "x : 0 0"])
def test_parse_rejects_garbage(text):
    with pytest.raises(LaurentError):
        LaurentPolynomial.from_text(text)


def test_rejects_zero_and_huge_exponents():
    with pytest.raises(LaurentError, match="zero polynomial"):
        LaurentPolynomial({(0, 0): 0, (1, 2): 0})
    with pytest.raises(LaurentError, match="32 bits"):
        LaurentPolynomial({(2**31, 0): 1})


def test_newton_polygon_examples(line):
    tri = newton_polygon(line)
    assert tri.area == pytest.approx(0.5)
    assert {tuple(v) for v in tri.vertices} == {(0, 0), (1, 0), (0, 1)}
    assert newton_polygon(LaurentPolynomial({(3, -2): 5})).degenerate
    sq = newton_polygon(LaurentPolynomial({(0, 0): 1, (1, 0): 1, (0, 1): 1, (1, 1): 1}))
    assert sq.area == pytest.approx(1.0)


def _support_hull_area(points):
    from scipy.spatial import ConvexHull
    pts = np.asarray(points, float)
    if len(pts) < 3 or np.linalg.matrix_rank(pts[1:] - pts[0]) < 2:
        return 0.0
    return ConvexHull(pts).volume


small_terms = st.dictionaries(
    st.tuples(st.integers(-2, 2), st.integers(-2, 2)),
    st.integers(1, 4), min_size=1, max_size=4)


@settings(max_examples=40, deadline=None)
@given(small_terms, small_terms)
def test_newton_polygon_of_product_is_minkowski_sum(a, b):
    f, g = LaurentPolynomial(a), LaurentPolynomial(b)
    # positive integer coefficients cannot cancel, so the product support is the full sumset
    fg = f * g
    sumset = [(p[0] + q[0], p[1] + q[1]) for p in a for q in b]
    assert newton_polygon(fg).area == pytest.approx(_support_hull_area(sumset), abs=1e-12)
    assert set(fg.terms) == set(sumset)


def test_fiber_roots_examples(line):
    r = fiber_roots(line, 0.0, math.pi)
    assert len(r.roots) == 0 and r.zero_multiplicity == 1
    r = fiber_roots(line, 0.0, 2 * math.pi / 3)
    assert abs(abs(r.roots[0]) - 1) < 1e-14
    f = LaurentPolynomial({(0, 2): 1, (1, 0): -1})
    r = fiber_roots(f, 2.0, 0.7)
    assert np.allclose(np.log(np.abs(r.roots)), 1.0, atol=1e-13)


def test_fiber_roots_counts_degree_spread():
    f = LaurentPolynomial({(0, -1): 1, (1, 0): 2, (0, 2): -1 + 1j, (2, 1): 0.5})
    rng = np.random.default_rng(1)
    for x1, t in rng.uniform(-2, 2, size=(20, 2)):
        r = fiber_roots(f, x1, t)
        assert len(r.roots) + r.zero_multiplicity + r.infinite_multiplicity == 3
        z1 = cmath.exp(x1 + 1j * t)
        assert np.allclose(f(z1, r.roots), 0, atol=1e-10)


def test_fiber_roots_needs_z2():
    with pytest.raises(LaurentError, match="does not depend"):
        fiber_roots(LaurentPolynomial({(1, 0): 1, (0, 0): 1}), 0.0, 0.0)


def test_log_gauss_R_examples(line):
    assert log_gauss_R(line, (1, -2)) == pytest.approx(2)
    w = cmath.exp(2j * math.pi / 3)
    assert log_gauss_R(line, (w, -1 - w)) == pytest.approx(0.5 - 1j * math.sqrt(3) / 2)
    # on z1 z2 = 1 we have log z1 = -log z2, so dlog z1 / dlog z2 = -1
    assert log_gauss_R(LaurentPolynomial({(1, 1): 1, (0, 0): -1}), (2, 0.5)) == pytest.approx(-1)


def test_log_gauss_R_matches_implicit_derivative():
    f = LaurentPolynomial({(0, 0): 1, (1, 0): 2, (0, 1): -1, (1, 1): 0.5, (-1, 2): 0.3j})
    z1 = 0.8 * cmath.exp(0.4j)
    r = fiber_roots(f, math.log(abs(z1)), cmath.phase(z1))
    z2 = complex(r.roots[0])
    # follow the root branch along z1 -> z1 e^h and difference log z2
    h = 1e-6
    moved = fiber_roots(f, math.log(abs(z1)) + h, cmath.phase(z1))
    z2h = complex(moved.roots[np.argmin(np.abs(moved.roots - z2))])
    dlog2 = cmath.log(z2h / z2) / h
    assert log_gauss_R(f, (z1, z2)) == pytest.approx(1 / dlog2, rel=1e-5)


def test_log_gauss_R_errors(line):
    with pytest.raises(LaurentError, match="not on the curve"):
        log_gauss_R(line, (1, 1))
    with pytest.raises(LaurentError, match="pole"):
        log_gauss_R(line, (0, -1))


@settings(max_examples=30, deadline=None)
@given(st.complex_numbers(min_magnitude=1e-3, max_magnitude=1e3, allow_nan=False, allow_infinity=False),
       st.floats(0.1, 3.0), st.floats(0.1, 6.0))
def test_log_gauss_R_scale_invariant(scale, r, t):
    f = LaurentPolynomial({(0, 0): 1, (1, 0): 2, (0, 1): -1, (1, 1): 0.5})
    z1 = r * cmath.exp(1j * t)
    z2 = -(1 + 2 * z1) / (-1 + 0.5 * z1)
    if abs(-1 + 0.5 * z1) < 1e-3:
        return
    assert log_gauss_R(f * scale, (z1, z2)) == pytest.approx(log_gauss_R(f, (z1, z2)), rel=1e-9)
