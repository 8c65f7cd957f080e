import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from amoebalab.riemann import (INF, CurveError, Lattice, PuncturedCurve, R_ratio,
                               build_in_differential, differential_zeros, y_conjugate)

G0 = PuncturedCurve(0, (0j, 1 + 0j, INF), m_curve=True)
G1 = PuncturedCurve(1, (0.2 + 0j, 0.7 + 0j), tau=1j)


def wp_theta(z, tau):
    """Weierstrass p for periods (1, tau) from Jacobi thetas (mpmath)."""
    q = mpmath.exp(1j * mpmath.pi * tau)
    t2, t3 = mpmath.jtheta(2, 0, q), mpmath.jtheta(3, 0, q)
    u = mpmath.pi * z
    main = (mpmath.pi * t2 * t3 * mpmath.jtheta(4, u, q) / mpmath.jtheta(1, u, q)) ** 2
    return complex(main - mpmath.pi**2 / 3 * (t2**4 + t3**4))


def circle_integral(dz, center, radius, nodes=400):
    t = 2 * np.pi * np.arange(nodes) / nodes
    z = center + radius * np.exp(1j * t)
    return complex(np.mean(dz.density_array(z) * 1j * (z - center)) * 2 * np.pi)


@pytest.mark.parametrize("tau", [1j, 0.3 + 0.8j, 2.5j])
def test_wp_matches_theta_formula(tau):
    lat = Lattice(tau)
    for z in [0.13 + 0.21j, 0.4 - 0.3j, -0.7 + 0.9 * tau]:
        assert lat.wp(z) == pytest.approx(wp_theta(z, tau), rel=1e-10)


def test_zeta_quasi_periods_and_legendre():
    lat = Lattice(0.2 + 1.1j)
    z = 0.31 + 0.17j
    assert lat.zeta(z + 1) - lat.zeta(z) == pytest.approx(lat.eta1, abs=1e-10)
    assert lat.zeta(z + lat.tau) - lat.zeta(z) == pytest.approx(lat.eta2, abs=1e-10)
    # Legendre relation for periods (1, tau): eta1 tau - eta2 = 2 pi i
    assert lat.eta1 * lat.tau - lat.eta2 == pytest.approx(2j * math.pi, abs=1e-12)
    h = 1e-5
    dzeta = (lat.zeta(z + h) - lat.zeta(z - h)) / (2 * h)
    assert dzeta == pytest.approx(-lat.wp(z), rel=1e-8)


def test_curve_validation():
    with pytest.raises(CurveError, match="unsupported genus"):
        PuncturedCurve(2, (0j, 1 + 0j))
    with pytest.raises(CurveError, match="distinct"):
        PuncturedCurve(1, (0.2 + 0j, 1.2 + 0j), tau=1j)
    with pytest.raises(CurveError, match="fixed oval"):
        PuncturedCurve(0, (0j, 1j, INF), m_curve=True)
    with pytest.raises(CurveError):
        build_in_differential(PuncturedCurve(0, (0j,)), [0.0])
    with pytest.raises(CurveError, match="sum to zero"):
        build_in_differential(G0, [1, 1, 1])


def test_genus0_densities():
    dz = build_in_differential(PuncturedCurve(0, (0j, INF)), [1, -1])
    assert dz.density(0.3 + 0.4j) == pytest.approx(1 / (0.3 + 0.4j))
    dz = build_in_differential(G0, [1, 0, -1])
    assert dz.density(2 - 1j) == pytest.approx(1 / (2 - 1j))


def test_genus0_x_harmonic_differences():
    dz = build_in_differential(G0, [1, 0, -1])
    a, b = 0.3 + 2j, -4 + 0.1j
    assert dz.x_harmonic(a) - dz.x_harmonic(b) == pytest.approx(math.log(abs(a) / abs(b)), abs=1e-14)
    dz = build_in_differential(G0, [1, -1, 0])
    expect = math.log(abs(a) / abs(a - 1)) - math.log(abs(b) / abs(b - 1))
    assert dz.x_harmonic(a) - dz.x_harmonic(b) == pytest.approx(expect, abs=1e-14)
    with pytest.raises(CurveError, match="pole"):
        dz.x_harmonic(1e-14)


def test_genus1_periods_imaginary_and_x_single_valued():
    dz = build_in_differential(G1, [1, -1])
    A, B = dz.periods()
    assert abs(A.real) < 1e-10 and abs(B.real) < 1e-10
    rng = np.random.default_rng(0)
    for z in rng.uniform(0, 1, 10) + 1j * rng.uniform(0, 1, 10):
        x = dz.x_harmonic(z)
        assert dz.x_harmonic(z + 1) == pytest.approx(x, abs=1e-9)
        assert dz.x_harmonic(z + 1j) == pytest.approx(x, abs=1e-9)
        assert dz.density(z + 1 + 1j) == pytest.approx(dz.density(z), abs=1e-9)


def test_genus1_periods_on_skew_lattice():
    curve = PuncturedCurve(1, (0.1 + 0.2j, 0.5 - 0.1j, 0.8 + 0.6j), tau=0.4 + 0.9j)
    dz = build_in_differential(curve, [2, -0.5, -1.5])
    A, B = dz.periods()
    assert max(abs(A.real), abs(B.real)) < 1e-10


def test_residues_by_contour():
    curve = PuncturedCurve(1, (0.1 + 0.2j, 0.5 - 0.1j, 0.8 + 0.6j), tau=1.3j)
    a = [2, -0.5, -1.5]
    dz = build_in_differential(curve, a)
    for p, r in zip(curve.punctures, a):
        assert circle_integral(dz, p, 0.05) == pytest.approx(2j * math.pi * r, abs=1e-9)
        assert dz.residue_numeric(curve.punctures.index(p)) == pytest.approx(r, abs=1e-9)


def test_y_conjugate_examples():
    dz = build_in_differential(PuncturedCurve(0, (0j, INF)), [1, -1])
    t = np.linspace(0, math.pi, 400)
    assert y_conjugate(dz, np.exp(1j * t)) == pytest.approx(math.pi, abs=1e-9)
    loop = 3 + 0.5 * np.exp(1j * np.linspace(0, 2 * math.pi, 50))
    assert y_conjugate(dz, loop) == pytest.approx(0, abs=1e-10)
    g0 = build_in_differential(G0, [0.7, -1.2, 0.5])
    around = 1 + 0.3 * np.exp(1j * np.linspace(0, 2 * math.pi, 60))
    assert y_conjugate(g0, around) == pytest.approx(2 * math.pi * -1.2, abs=1e-9)
    with pytest.raises(CurveError):
        y_conjugate(dz, [1e-8, 1])


def test_R_ratio_examples():
    d1 = build_in_differential(G0, [1, 0, -1])
    d2 = build_in_differential(G0, [0, 1, -1])
    assert R_ratio(d1, d2, 2) == pytest.approx(0.5)
    assert R_ratio(d1, d2, 1j) == pytest.approx(1 + 1j)
    for z in [0.3 + 0.2j, -2 - 1j, 5 + 0.01j]:
        assert R_ratio(d1, d2, z).imag == pytest.approx(z.imag / abs(z) ** 2, abs=1e-14)


def test_R_ratio_common_zero():
    d = build_in_differential(G0, [1, 1, -2])
    with pytest.raises(CurveError, match="common zero"):
        R_ratio(d, d.combine(2.0, d, 0.0), 0.5)


def test_zeros_genus0():
    z = differential_zeros(build_in_differential(G0, [1, 1, -2]))
    assert len(z) == 1 and z.points[0] == pytest.approx(0.5)
    # two simple poles on the sphere: degree of the canonical class is -2, so no zeros
    assert len(differential_zeros(build_in_differential(G0, [1, -1, 0]))) == 0


def test_zeros_genus1_m_curve():
    curve = PuncturedCurve(1, (0.1 + 0j, 0.4 + 0j, 0.7 + 0j), tau=1j, m_curve=True)
    dz = build_in_differential(curve, [1, 0.5, -1.5])
    zs = differential_zeros(dz)
    assert len(zs) == 3
    assert all(zs.simple)
    ovals = sorted(curve.oval_index(p, eps=1e-7) for p in zs.points)
    # one zero on the puncture oval between the same-sign poles, two on the empty oval
    assert ovals == [0, 1, 1]
    for p in zs.points:
        assert abs(dz.density(p)) < 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_zero_count_random(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    pts = tuple(complex(*rng.uniform(0, 1, 2)) for _ in range(n))
    curve = PuncturedCurve(1, pts, tau=complex(rng.uniform(-0.3, 0.3), rng.uniform(0.7, 1.5)))
    if n > 2 and min(abs(curve.lattice.reduce(a - b)[0])
                     for i, a in enumerate(pts) for b in pts[:i]) < 0.1:
        return
    a = rng.normal(size=n)
    a[-1] = -a[:-1].sum()
    dz = build_in_differential(curve, a)
    assert len(differential_zeros(dz)) == n


def test_reality_on_fixed_ovals():
    curve = PuncturedCurve(1, (0.1 + 0j, 0.4 + 0j, 0.7 + 0j), tau=1.2j, m_curve=True)
    dz = build_in_differential(curve, [1, 0.5, -1.5])
    for s in np.linspace(0.02, 0.98, 25):
        for z in (s, s + 0.6j):
            if curve.distance_to_punctures(z) > 1e-3:
                assert abs(dz.density(z).imag) <= 1e-10 * max(1, abs(dz.density(z)))


def test_linearity():
    a, b = [1, 0.5, -1.5], [0.2, -1, 0.8]
    curve = PuncturedCurve(1, (0.1 + 0.1j, 0.4 + 0.3j, 0.7 + 0j), tau=1j)
    da, db = build_in_differential(curve, a), build_in_differential(curve, b)
    dc = build_in_differential(curve, 2 * np.array(a) - 3 * np.array(b))
    for z in [0.3 + 0.5j, 0.9 + 0.1j]:
        assert dc.density(z) == pytest.approx(2 * da.density(z) - 3 * db.density(z), abs=1e-12)


def test_gl2_acts_by_mobius_on_R():
    curve = PuncturedCurve(1, (0.1 + 0.1j, 0.4 + 0.3j, 0.7 + 0j), tau=1j)
    d1 = build_in_differential(curve, [1, 0.5, -1.5])
    d2 = build_in_differential(curve, [0.2, -1, 0.8])
    rng = np.random.default_rng(7)
    for _ in range(5):
        C = rng.normal(size=(2, 2))
        e1 = d1.combine(C[0, 0], d2, C[0, 1])
        e2 = d1.combine(C[1, 0], d2, C[1, 1])
        z = complex(*rng.uniform(0, 1, 2))
        R = R_ratio(d1, d2, z)
        mob = (C[0, 0] * R + C[0, 1]) / (C[1, 0] * R + C[1, 1])
        assert R_ratio(e1, e2, z) == pytest.approx(mob, rel=1e-9)
