import cmath
import functools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from amoebalab import gen_amoeba as ga
from amoebalab.gen_amoeba import AmoebaData, AmoebaError
from amoebalab.numerics import fd_hessian
from amoebalab.plane_amoeba import ronkin_value
from amoebalab.riemann import PuncturedCurve

SIXTH = cmath.exp(1j * math.pi / 3)


def interior_points(data, rng, count, box=1.5):
    """Random ``chi`` images of upper-side points close to the tentacle hub."""
    out = []
    center = ga.translation_offset(data)
    while len(out) < count:
        if data.curve.genus == 1:
            z = complex(rng.uniform(0, 1), rng.uniform(0.05, 0.45) * data.curve.T)
        else:
            z = complex(rng.uniform(-1.5, 2.5), rng.uniform(0.1, 1.5))
        if data.curve.distance_to_punctures(z) < 0.05:
            continue
        x = ga.chi_map(data, z)
        if np.all(np.abs(x - center) < box):
            out.append(x)
    return out


def test_chi_map_standard(standard_data):
    a, b = 0.3 + 2j, -4 + 0.1j
    d = ga.chi_map(standard_data, a) - ga.chi_map(standard_data, b)
    assert np.allclose(d, [math.log(abs(a) / abs(b)), math.log(abs(a - 1) / abs(b - 1))], atol=1e-13)
    # base point 2 carries chi = 0, so chi(2) = (log 2, 0) holds up to the base constant
    assert np.allclose(ga.chi_map(standard_data, 4) - ga.chi_map(standard_data, 2),
                       [math.log(2), math.log(3)], atol=1e-13)
    with pytest.raises(Exception, match="pole"):
        ga.chi_map(standard_data, 1.0)


def test_rank_deficient_rows_rejected():
    curve = PuncturedCurve(0, (0j, 1 + 0j, None), m_curve=True)
    with pytest.raises(AmoebaError, match="rank"):
        AmoebaData.from_residues(curve, [[1, 0, -1], [2, 0, -2]])


def test_from_json_round_trip(standard_data):
    d = AmoebaData.from_json({"genus": 0, "punctures": [[0, 0], [1, 0], "inf"],
                              "residues": [[1, 0, -1], [0, 1, -1]], "m_curve": True})
    assert np.allclose(d.residues, standard_data.residues)
    with pytest.raises(AmoebaError, match="malformed"):
        AmoebaData.from_json({"genus": 0})


def test_critical_locus_standard_is_real_axis(standard_data):
    loc = ga.critical_locus(standard_data, resolution=120)
    pts = np.vstack([pl.vertices for pl in loc.polylines])
    assert len(pts) > 50
    assert np.max(np.abs(pts[:, 1])) < 1e-6


def test_critical_locus_genus1_is_the_two_ovals(harnack_genus1):
    loc = ga.critical_locus(harnack_genus1, resolution=120)
    im = np.concatenate([pl.vertices[:, 1] for pl in loc.polylines])
    frac = np.mod(im / harnack_genus1.curve.T, 0.5)
    assert np.all(np.minimum(frac, 0.5 - frac) < 1e-6)
    assert np.any(np.abs(im - 0.5) < 1e-6) and np.any(np.abs(im) < 1e-6)


def test_preimages_of_the_symmetric_point(standard_data):
    x = ga.chi_map(standard_data, SIXTH)
    pre = ga.chi_preimages(standard_data, x)
    assert len(pre) == 2
    pts = sorted((r.point for r in pre), key=lambda z: z.imag)
    assert pts[0] == pytest.approx(SIXTH.conjugate(), abs=1e-8)
    assert pts[1] == pytest.approx(SIXTH, abs=1e-8)
    assert sorted(r.sign for r in pre) == [-1, 1]
    h = ga.rho_hessian(standard_data, x)
    assert h.det * math.pi**2 == pytest.approx(1, abs=1e-8)


def test_preimage_signs_pair_up(standard_data, harnack_genus1):
    rng = np.random.default_rng(2)
    for data in (standard_data, harnack_genus1):
        for x in interior_points(data, rng, 4):
            pre = ga.chi_preimages(data, x, with_conjugates=False)
            assert len(pre) >= 2
            assert sum(r.sign for r in pre) == 0
            for r in pre:
                assert r.sign == -int(np.sign(r.R.imag))


def test_no_preimages_deep_in_complement(standard_data):
    c = ga.translation_offset(standard_data)
    assert len(ga.chi_preimages(standard_data, c + [-8, -8])) == 0


def test_gradient_constant_on_complement_component(standard_data, harnack_genus1):
    c = ga.translation_offset(standard_data)
    g1 = ga.rho_gradient(standard_data, c + [-6, -7])
    g2 = ga.rho_gradient(standard_data, c + [-9, -5])
    assert np.allclose(g1, g2, atol=1e-8)
    # the bounded component of the genus-1 amoeba is enclosed by the image of the empty oval
    ring = ga.chi_array(harnack_genus1, np.linspace(0, 1, 200, endpoint=False) + 0.5j)
    hole = ring.mean(axis=0)
    ga_, gb = (ga.rho_gradient(harnack_genus1, hole + d) for d in ([0.05, 0.0], [-0.03, 0.05]))
    assert np.allclose(ga_, gb, atol=1e-8)
    assert np.allclose(ga_, [0.3, 0.4], atol=1e-8)


def test_gradient_matches_finite_differences(generic_genus0):
    rng = np.random.default_rng(4)
    h = 1e-5
    for x in interior_points(generic_genus0, rng, 3):
        g = ga.rho_gradient(generic_genus0, x)
        fd = [(ga.rho_value(generic_genus0, x + e) - ga.rho_value(generic_genus0, x - e)) / (2 * h)
              for e in (np.array([h, 0]), np.array([0, h]))]
        assert np.allclose(g, fd, atol=1e-5)


def test_rho_matches_plane_ronkin_up_to_affine(standard_data, line):
    rng = np.random.default_rng(6)
    c = ga.translation_offset(standard_data)
    xs = [c + rng.uniform(-2, 2, 2) for _ in range(8)]
    # chi = Log(z, z - 1) + offset and |z - 1| = |-1 - z|, so the image is the line amoeba
    rho = np.array([ga.rho_value(standard_data, x) for x in xs])
    ron = np.array([ronkin_value(line, x - c) for x in xs])
    M = np.column_stack([np.ones(len(xs)), np.array(xs)])
    coef, *_ = np.linalg.lstsq(M, rho - ron, rcond=None)
    assert np.max(np.abs(M @ coef - (rho - ron))) < 1e-4


def test_rho_slow_mode_and_path_independence(harnack_genus1):
    x = ga.chi_map(harnack_genus1, 0.25 + 0.2j)
    v = ga.rho_value(harnack_genus1, x, slow_mode=True)
    # integrate along the other axis-parallel path: first x2, then x1
    ax = harnack_genus1.anchor_x
    mid = np.array([ax[0], x[1]])
    alt = ga.rho_path_integral(harnack_genus1, mid, ax) + ga.rho_path_integral(harnack_genus1, x, mid)
    assert alt == pytest.approx(v, abs=1e-7)


def test_hessian_matches_finite_differences(harnack_genus1):
    rng = np.random.default_rng(8)
    for x in interior_points(harnack_genus1, rng, 3, box=1.0):
        h = ga.rho_hessian(harnack_genus1, x).as_array()
        fd = fd_hessian(lambda p: ga.rho_value(harnack_genus1, p), x, 1.5e-4).as_array()
        assert np.max(np.abs(h - fd)) <= 1e-4 * np.max(np.abs(h))


def test_hessian_summands_and_lower_bound(generic_genus0):
    rng = np.random.default_rng(9)
    for x in interior_points(generic_genus0, rng, 5):
        pre = ga.chi_preimages(generic_genus0, x, with_conjugates=False)
        for r in pre:
            t = ga.hessian_term(r.R)
            assert t.trace > 0
            assert t.det * (2 * math.pi) ** 2 == pytest.approx(1, abs=1e-10)
        h = ga.rho_hessian(generic_genus0, x)
        assert h.h11 > 0 and h.det > 0
        if len(pre) >= 2:
            assert h.det >= 1 / math.pi**2 - 1e-9


@functools.lru_cache(maxsize=None)
def _genus1_for_hypothesis():
    curve = PuncturedCurve(1, (0.1 + 0j, 0.4 + 0j, 0.7 + 0j), tau=1j, m_curve=True)
    return AmoebaData.from_residues(curve, [[1, 0, -1], [0, 1, -1]])


@settings(max_examples=10, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 0.9))
def test_rho_convex_along_segments(a1, a2, b1, b2, lam):
    data = _genus1_for_hypothesis()
    c = ga.translation_offset(data)
    a, b = c + [a1, a2], c + [b1, b2]
    mid = lam * a + (1 - lam) * b
    val = ga.rho_value(data, mid)
    assert val <= lam * ga.rho_value(data, a) + (1 - lam) * ga.rho_value(data, b) + 1e-7


def test_delta_polygon_example():
    curve = PuncturedCurve(0, (0j, 1 + 0j, None))
    data = AmoebaData.from_residues(curve, [[1, -0.5, -0.5], [0.5, 0.5, -1]])
    poly = ga.delta_polygon(data)
    assert poly.max_deviation < 1e-6
    assert len(poly.polygon.vertices) == 3
    assert poly.polygon.area > 0
    assert sorted(poly.vertex_assignments) == [0, 1, 2]


def test_polygon_cyclic_relabel():
    A = np.array([[1, 0.5], [-0.5, 0.5], [-0.5, -1.0]])
    verts, stable = ga.polygon_closed_form(A)
    shifted, _ = ga.polygon_closed_form(np.roll(A, 1, axis=0))
    assert stable
    for k in range(3):
        assert np.allclose(shifted[(k + 1) % 3], verts[k])


def test_polygon_tie_breaking_is_stable():
    # two parallel tentacles: the sector between them is degenerate
    A = np.array([[1.0, 0.0], [1.0, 0.0], [-1.0, 1.0], [-1.0, -1.0]])
    verts, stable = ga.polygon_closed_form(A)
    assert stable
    assert len(verts) == 4


def test_far_field_gradient_standard(standard_data):
    A = standard_data.residues
    assert np.allclose(ga.far_field_gradient(A, [-1, -1]), [0, 0])
    assert np.allclose(ga.far_field_gradient(A, [1, -0.2]), [1, 0])
    assert np.allclose(ga.far_field_gradient(A, [-0.2, 1]), [0, 1])


def test_harnack_classification(standard_data, harnack_genus1, misordered_genus1):
    assert ga.harnack_classify(standard_data).is_harnack
    assert ga.harnack_classify(harnack_genus1).is_harnack
    rep = ga.harnack_classify(misordered_genus1)
    assert not rep.is_harnack and rep.reasons[0].startswith("(iii)")
    # swapping the roles of punctures 0 and 1 reverses the orientation of the polygon
    swapped = AmoebaData.from_residues(standard_data.curve, [[0, 1, -1], [1, 0, -1]])
    rep = ga.harnack_classify(swapped)
    assert not rep.is_harnack and rep.reasons[0].startswith("(iii)")
    assert rep.harnack_up_to_orientation
    split = PuncturedCurve(1, (0.1 + 0j, 0.4 + 0j, 0.7 + 0.5j), tau=1j, m_curve=True)
    rep = ga.harnack_classify(AmoebaData.from_residues(split, [[1, 0, -1], [0, 1, -1]]))
    assert not rep.is_harnack and rep.reasons[0].startswith("(ii)")
    plain = PuncturedCurve(0, (0j, 1 + 0j, None))
    rep = ga.harnack_classify(AmoebaData.from_residues(plain, [[1, 0, -1], [0, 1, -1]]))
    assert rep.reasons[0].startswith("(i)")


def test_area_report_standard(standard_data):
    rep = ga.area_report(standard_data, resolution=64)
    assert rep.polygon_area == pytest.approx(0.5)
    assert rep.ratio == pytest.approx(1, abs=0.01)


def test_ma_mass_equals_polygon_area(generic_genus0):
    poly = ga.delta_polygon(generic_genus0, brute_force=False).polygon
    assert len(poly.vertices) == 4
    assert ga.ma_mass(generic_genus0) == pytest.approx(poly.area, rel=0.01)


def test_gl2_equivariance(generic_genus0):
    rng = np.random.default_rng(10)
    for _ in range(3):
        C = rng.normal(size=(2, 2))
        if abs(np.linalg.det(C)) < 0.2:
            continue
        moved = ga.gl2_transform(generic_genus0, C)
        for z in rng.normal(size=4) + 1j * rng.normal(size=4):
            assert np.allclose(ga.chi_map(moved, z), C @ ga.chi_map(generic_genus0, z), atol=1e-9)


def test_injectivity(standard_data, harnack_genus1, misordered_genus1):
    rep = ga.injectivity_test(standard_data, samples=10000, gradient_samples=30)
    assert rep.collisions == 0 and rep.fold_samples == 0
    assert rep.gradient_outside_polygon == 0
    rep = ga.injectivity_test(harnack_genus1, samples=3000, gradient_samples=0)
    assert rep.fold_samples == 0
    assert len(rep.gradient_holes) == 1
    poly = ga.delta_polygon(harnack_genus1, brute_force=False).polygon
    assert poly.contains(rep.gradient_holes[0])
    assert ga.injectivity_test(misordered_genus1, samples=3000, gradient_samples=0).fold_samples > 0


def test_complement_components_are_convex(generic_genus0):
    window = ga.default_window(generic_genus0)
    r = ga.membership_raster(generic_genus0, window, 96, normalized=False)
    free = ~ndimage.binary_dilation(r.cells)
    labels, count = ndimage.label(free)
    assert count >= 4
    rng = np.random.default_rng(11)
    for k in range(1, count + 1):
        idx = np.argwhere(labels == k)
        if len(idx) < 20:
            continue
        for _ in range(100):
            a, b = idx[rng.integers(len(idx), size=2)]
            m = (a + b) / 2
            i, j = np.floor(m).astype(int), np.ceil(m).astype(int)
            # the dilation above already grants one cell of slack
            assert not r.cells[i[0], i[1]] or not r.cells[j[0], j[1]]
