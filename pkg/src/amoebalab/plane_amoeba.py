"""Classical amoebas of Laurent polynomials in two variables.

The Ronkin function is reduced to a one-dimensional integral with Jensen's
formula: for fixed ``z1 = exp(x1 + i t)`` the torus average of ``log|f|``
over ``|z2| = exp(x2)`` equals ``log|lead| + k x2 + sum max(x2, log|r|)``
over the ``z2``-roots ``r``.  The outer integrand is smooth except at the
angles where a root crosses ``|z2| = exp(x2)``; those are located and the
integral is split there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .config import DEFAULT, Tolerances
from .laurent import LaurentError, LaurentPolynomial, log_gauss_R, newton_polygon
from .numerics import (GridRaster, SymMatrix2, ZERO2, interval_union_length,
                       periodic_quadrature, poly_roots_batch, richardson)

TWO_PI = 2 * math.pi
_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)


class AmoebaError(ValueError):
    pass


@dataclass(frozen=True)
class RonkinSample:
    x: np.ndarray
    value: float
    gradient: np.ndarray


# ---------------------------------------------------------------------------
# fibers over the circle |z1| = exp(x1)


class _Fibers:
    """Batched z2-roots of ``f(exp(x1 + i t), .)`` for many angles ``t``."""

    def __init__(self, f: LaurentPolynomial, x1: float):
        self.f = f
        self.x1 = x1
        self.jmin, jmax = f.z2_span()
        if jmax == self.jmin:
            raise AmoebaError("f does not depend on z2")
        e = f.exponents
        self._i = e[:, 0]
        self._k = e[:, 1] - self.jmin
        self._c = f.coefficients
        self.degree = jmax - self.jmin
        # lowest power that is present for every angle (monomials in z2 only)
        present = np.zeros(self.degree + 1, dtype=bool)
        present[self._k] = True
        self.low = int(np.argmax(present))

    def coeffs(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        z1 = np.exp(self.x1 + 1j * t)
        C = np.zeros((len(t), self.degree + 1), dtype=complex)
        for i, k, c in zip(self._i, self._k, self._c):
            C[:, k] += c * z1**i
        return C

    def log_moduli(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Sorted ``log|r|`` of the nonzero roots and ``log|lead|`` per angle."""
        C = self.coeffs(t)
        core = C[:, self.low:]
        lead = core[:, -1]
        scale = np.max(np.abs(core), axis=1)
        if np.any(np.abs(lead) <= 1e-14 * scale) or np.any(np.abs(core[:, 0]) <= 1e-14 * scale):
            raise AmoebaError("fiber degenerate at a sample angle; shift the nodes")
        roots = poly_roots_batch(core)
        return np.sort(np.log(np.abs(roots)), axis=1), np.log(np.abs(lead))

    def roots(self, t: float) -> np.ndarray:
        C = self.coeffs([t])[:, self.low:]
        return poly_roots_batch(C)[0]


def _crossing_angles(fib: _Fibers, x2: float, samples: int = 256):
    """Angles where some root crosses ``|z2| = exp(x2)``, refined by bisection."""
    t = TWO_PI * (np.arange(samples) + 0.5) / samples
    lm, _ = fib.log_moduli(t)
    count = np.sum(lm < x2, axis=1)
    nxt = np.roll(count, -1)
    idx = np.nonzero(count != nxt)[0]
    # also refine intervals where a root passes very close without a sign flip
    gap = np.min(np.abs(lm - x2), axis=1)
    near = np.nonzero((gap < 4 * TWO_PI / samples * (1 + np.abs(lm).max(axis=1)) * 0.05)
                      & (count == nxt))[0]
    out = []
    for k in idx:
        out.extend(_bisect_count(fib, x2, t[k], t[k] + TWO_PI / samples, count[k], nxt[k]))
    for k in near:
        out.extend(_local_scan(fib, x2, t[k], t[k] + TWO_PI / samples))
    out = sorted(a % TWO_PI for a in out)
    dedup = []
    for a in out:
        if not dedup or a - dedup[-1] > 1e-10:
            dedup.append(a)
    if len(dedup) > 1 and dedup[0] + TWO_PI - dedup[-1] <= 1e-10:
        dedup.pop()
    return dedup


def _bisect_count(fib, x2, a, b, ca, cb):
    if abs(int(ca) - int(cb)) > 1:
        # several roots cross in one interval: split until they separate
        m = 0.5 * (a + b)
        if b - a < 1e-13:
            return [m] * abs(int(ca) - int(cb))
        cm = int(np.sum(fib.log_moduli([m])[0] < x2))
        return _bisect_count(fib, x2, a, m, ca, cm) + _bisect_count(fib, x2, m, b, cm, cb)
    if ca == cb:
        return []
    for _ in range(60):
        m = 0.5 * (a + b)
        cm = int(np.sum(fib.log_moduli([m])[0] < x2))
        if cm == ca:
            a = m
        else:
            b = m
        if b - a < 1e-15:
            break
    return [0.5 * (a + b)]


def _local_scan(fib, x2, a, b, n: int = 32):
    t = np.linspace(a, b, n + 1)
    lm, _ = fib.log_moduli(t)
    count = np.sum(lm < x2, axis=1)
    out = []
    for k in np.nonzero(count[:-1] != count[1:])[0]:
        out.extend(_bisect_count(fib, x2, t[k], t[k + 1], count[k], count[k + 1]))
    return out


def _inner_jensen(fib: _Fibers, x2: float, t) -> np.ndarray:
    lm, llead = fib.log_moduli(t)
    return llead + (fib.jmin + fib.low) * x2 + np.sum(np.maximum(lm, x2), axis=1)


def _pieces(crossings):
    if not crossings:
        return []
    c = list(crossings)
    return list(zip(c, c[1:] + [c[0] + TWO_PI]))


def ronkin_value(f: LaurentPolynomial, x, nodes: int = 256, tol: Tolerances = DEFAULT) -> float:
    """Ronkin function ``(2 pi i)^-2 int_{Log^-1(x)} log|f| dz1 dz2 / (z1 z2)``."""
    if nodes < 32:
        raise AmoebaError("need at least 32 nodes")
    x1, x2 = map(float, x)
    if f.z2_span()[0] == f.z2_span()[1]:
        # independent of z2: swap roles, or constant
        if f.exponents[:, 0].min() == f.exponents[:, 0].max():
            (i, j), c = next(iter(f.terms.items()))
            return math.log(abs(c)) + i * x1 + j * x2
        return ronkin_value(f.swapped(), (x2, x1), nodes, tol)
    fib = _Fibers(f, x1)
    cross = _crossing_angles(fib, x2, nodes)
    if not cross:
        # shifted nodes keep clear of the special angles where a coefficient vanishes
        return periodic_quadrature(lambda t: _inner_jensen(fib, x2, t), nodes, offset=0.381966)

    def integrate(n_gl):
        xg, wg = np.polynomial.legendre.leggauss(n_gl)
        total = 0.0
        for a, b in _pieces(cross):
            t = 0.5 * (b - a) * xg + 0.5 * (a + b)
            total += 0.5 * (b - a) * np.dot(wg, _inner_jensen(fib, x2, t))
        return total / TWO_PI

    coarse, fine = integrate(24), integrate(48)
    if abs(fine - coarse) > max(tol.ronkin_agreement, 1e-9 * abs(fine)):
        fine = integrate(96)
    return float(fine)


def _partial_x2(f: LaurentPolynomial, x, nodes: int = 256) -> tuple[float, list]:
    """``dR/dx2`` as the angular average of the number of roots inside the circle."""
    x1, x2 = map(float, x)
    jmin, jmax = f.z2_span()
    if jmin == jmax:
        return float(jmin), []
    fib = _Fibers(f, x1)
    cross = _crossing_angles(fib, x2, nodes)
    base = fib.jmin + fib.low
    if not cross:
        lm, _ = fib.log_moduli([0.1234])
        return float(base + np.sum(lm < x2)), []
    total = 0.0
    for a, b in _pieces(cross):
        lm, _ = fib.log_moduli([a + 0.381966 * (b - a)])
        total += (b - a) * (base + np.sum(lm < x2))
    return total / TWO_PI, cross


def ronkin_gradient(f: LaurentPolynomial, x, nodes: int = 256) -> np.ndarray:
    x1, x2 = map(float, x)
    g2, _ = _partial_x2(f, (x1, x2), nodes)
    g1, _ = _partial_x2(f.swapped(), (x2, x1), nodes)
    return np.array([g1, g2])


def ronkin_sample(f: LaurentPolynomial, x, nodes: int = 256) -> RonkinSample:
    x = np.asarray(x, dtype=float)
    return RonkinSample(x, ronkin_value(f, x, nodes), ronkin_gradient(f, x, nodes))


def in_amoeba(f: LaurentPolynomial, x, nodes: int = 256) -> bool:
    """Complement test: some fiber root modulus crosses ``exp(x2)``."""
    x1, x2 = map(float, x)
    if f.z2_span()[0] == f.z2_span()[1]:
        return in_amoeba(f.swapped(), (x2, x1), nodes)
    return bool(_crossing_angles(_Fibers(f, x1), x2, nodes))


def order_map(f: LaurentPolynomial, x, nodes: int = 256,
              tol: Tolerances = DEFAULT) -> Union[tuple, str]:
    if in_amoeba(f, x, nodes):
        return "interior"
    g = ronkin_gradient(f, x, nodes)
    r = np.round(g)
    if np.all(np.abs(g - r) <= tol.order_integrality):
        return (int(r[0]), int(r[1]))
    return "interior"


# ---------------------------------------------------------------------------
# column cross-sections and rasters


def column_intervals(f: LaurentPolynomial, x1: float, samples: int = 512) -> list:
    """``Log``-image of the curve over ``|z1| = exp(x1)`` as a list of x2-intervals.

    The k-th smallest root modulus is continuous in the angle, so the image is
    the union over k of its range; extremes are sharpened by a parabolic fit.
    """
    if f.z2_span()[0] == f.z2_span()[1]:
        return []
    fib = _Fibers(f, x1)
    t = TWO_PI * (np.arange(samples) + 0.25) / samples
    lm, _ = fib.log_moduli(t)
    out = []
    for col in lm.T:
        lo, hi = _sharp_extreme(col, np.argmin(col), -1), _sharp_extreme(col, np.argmax(col), 1)
        out.append((lo, hi))
    return out


def _sharp_extreme(v, k, sign):
    n = len(v)
    a, b, c = v[(k - 1) % n], v[k], v[(k + 1) % n]
    denom = a - 2 * b + c
    if denom == 0 or not np.isfinite(denom):
        return float(b)
    est = b - (c - a) ** 2 / (8 * denom)
    return float(max(est, b) if sign > 0 else min(est, b))


def _window_axes(window, resolution):
    x1min, x1max, x2min, x2max = map(float, window)
    n1, n2 = (resolution, resolution) if np.isscalar(resolution) else resolution
    d1, d2 = (x1max - x1min) / n1, (x2max - x2min) / n2
    return (x1min + d1 * (np.arange(n1) + 0.5), x2min + d2 * (np.arange(n2) + 0.5), d1, d2)


def raster_from_columns(column_fn, window, resolution) -> GridRaster:
    """Mark cells whose x2-extent meets one of the column intervals."""
    xs, ys, d1, d2 = _window_axes(window, resolution)
    cells = np.zeros((len(xs), len(ys)), dtype=bool)
    for i, x1 in enumerate(xs):
        for lo, hi in column_fn(x1):
            cells[i] |= (ys + 0.5 * d2 >= lo) & (ys - 0.5 * d2 <= hi)
    return GridRaster(np.array([xs[0], ys[0]]), (d1, d2), cells)


def membership_raster(f: LaurentPolynomial, window, resolution, samples: int = 512) -> GridRaster:
    if min(np.atleast_1d(resolution)) < 16:
        raise AmoebaError("resolution must be at least 16 per axis")
    if f.z2_span()[0] == f.z2_span()[1]:
        r = raster_from_columns(lambda x2: column_intervals(f.swapped(), x2, samples),
                                (window[2], window[3], window[0], window[1]),
                                resolution if np.isscalar(resolution) else resolution[::-1])
        return GridRaster(r.origin[::-1], r.spacing[::-1], r.cells.T.copy())
    return raster_from_columns(lambda x1: column_intervals(f, x1, samples), window, resolution)


def column_area(column_fn, window, columns: int) -> float:
    """Integrate the clipped x2-measure of each column (midpoint rule in x1)."""
    x1min, x1max, x2min, x2max = map(float, window)
    d1 = (x1max - x1min) / columns
    xs = x1min + d1 * (np.arange(columns) + 0.5)
    return float(d1 * sum(interval_union_length(column_fn(x), x2min, x2max) for x in xs))


# ---------------------------------------------------------------------------
# Monge-Ampere density


def _refine_crossing(f: LaurentPolynomial, x, theta: float, z2: complex):
    """Newton on ``theta`` so that the tracked root has ``log|z2| = x2`` exactly."""
    x1, x2 = map(float, x)
    e = f.exponents
    c = f.coefficients
    for _ in range(30):
        z1 = math.e**x1 * complex(math.cos(theta), math.sin(theta))
        for _ in range(8):  # root polish at fixed theta
            mono = c * z1 ** e[:, 0] * z2 ** e[:, 1]
            val = mono.sum()
            d2 = np.dot(e[:, 1], mono) / z2
            if d2 == 0:
                break
            step = val / d2
            z2 -= step
            if abs(step) <= 1e-16 * abs(z2):
                break
        mono = c * z1 ** e[:, 0] * z2 ** e[:, 1]
        d1 = np.dot(e[:, 0], mono) / z1
        d2 = np.dot(e[:, 1], mono) / z2
        dz2 = -(d1 * 1j * z1) / d2
        h = math.log(abs(z2)) - x2
        dh = (dz2 / z2).real
        if dh == 0:
            break
        dtheta = -h / dh
        dtheta = max(-0.05, min(0.05, dtheta))
        theta += dtheta
        z2 = z2 + dz2 * dtheta
        if abs(dtheta) < 1e-15 and abs(h) < 1e-15:
            break
    z1 = math.e**x1 * complex(math.cos(theta), math.sin(theta))
    for _ in range(4):
        mono = c * z1 ** e[:, 0] * z2 ** e[:, 1]
        d2 = np.dot(e[:, 1], mono) / z2
        z2 -= mono.sum() / d2
    return theta, z1, z2


def log_preimages(f: LaurentPolynomial, x, nodes: int = 256) -> list:
    """Points of ``{f = 0}`` with ``Log(z) = x``, as ``(z1, z2)`` pairs."""
    x1, x2 = map(float, x)
    fib = _Fibers(f, x1)
    out = []
    for th in _crossing_angles(fib, x2, nodes):
        roots = fib.roots(th)
        k = int(np.argmin(np.abs(np.log(np.abs(roots)) - x2)))
        _, z1, z2 = _refine_crossing(f, x, th, complex(roots[k]))
        out.append((z1, z2))
    return out


def hessian_term(R: complex) -> SymMatrix2:
    """One summand ``(1/2pi) |Im R|^-1 [[1, -Re R], [-Re R, |R|^2]]``.

    The off-diagonal sign is the one that matches finite differences of the
    Ronkin function with ``R = dlog z1 / dlog z2``; the determinant of every
    summand is ``(2 pi)^-2`` regardless.
    """
    s = 1.0 / (TWO_PI * abs(R.imag))
    return SymMatrix2(s, -s * R.real, s * abs(R) ** 2)


def ma_hessian(f: LaurentPolynomial, x, nodes: int = 256, tol: Tolerances = DEFAULT) -> SymMatrix2:
    pre = log_preimages(f, x, nodes)
    total = ZERO2
    for p in pre:
        try:
            R = log_gauss_R(f, p, tol)
        except LaurentError as exc:
            raise AmoebaError(f"critical point of amoeba map: {exc}") from exc
        if abs(R.imag) < tol.critical_im_r:
            raise AmoebaError("critical point of amoeba map")
        total = total + hessian_term(R)
    return total


# ---------------------------------------------------------------------------
# tentacles and area


def tentacle_lines(f: LaurentPolynomial) -> list:
    """Asymptotic lines ``{x : n . x = b}`` for each Newton-polygon edge.

    Along an edge from lattice point ``u`` to ``v`` the two monomials balance:
    ``log|c_u| + u.x = log|c_v| + v.x``.  Returns ``(direction, normal, b)``
    with the outward edge normal as tentacle direction.
    """
    poly = newton_polygon(f)
    if poly.degenerate:
        return []
    out = []
    v = poly.vertices
    for a, b in zip(v, np.roll(v, -1, axis=0)):
        ca = abs(f.terms[(int(round(a[0])), int(round(a[1])))])
        cb = abs(f.terms[(int(round(b[0])), int(round(b[1])))])
        e = b - a
        outward = np.array([e[1], -e[0]]) / np.linalg.norm(e)
        normal = (a - b)  # (u - v) . x = log|c_v| - log|c_u|
        out.append((outward, normal, math.log(cb) - math.log(ca)))
    return out


def canonical_offset(f: LaurentPolynomial) -> np.ndarray:
    """Intersection of the first two non-parallel tentacle lines."""
    lines = tentacle_lines(f)
    for i in range(len(lines)):
        for j in range(i + 1, len(lines)):
            A = np.array([lines[i][1], lines[j][1]], dtype=float)
            if abs(np.linalg.det(A)) > 1e-12:
                return np.linalg.solve(A, [lines[i][2], lines[j][2]])
    return np.zeros(2)


@dataclass
class AreaReport:
    amoeba_area: float
    polygon_area: float
    ratio: float
    degenerate: bool = False
    coarse_area: float = float("nan")
    fine_area: float = float("nan")

    def as_dict(self):
        return dict(self.__dict__)


def _check_window(column_fn, row_fn, window, frac: float = 0.05):
    x1min, x1max, x2min, x2max = map(float, window)
    for x1 in (x1min, x1max):
        if interval_union_length(column_fn(x1), x2min, x2max) > frac * (x2max - x2min):
            raise AmoebaError("window too small: amoeba body reaches the x1 boundary")
    for x2 in (x2min, x2max):
        if interval_union_length(row_fn(x2), x1min, x1max) > frac * (x1max - x1min):
            raise AmoebaError("window too small: amoeba body reaches the x2 boundary")


def area_report(f: LaurentPolynomial, window=(-8, 8, -8, 8), resolution: int = 256,
                samples: int = 512) -> AreaReport:
    poly = newton_polygon(f)
    if poly.degenerate:
        return AreaReport(0.0, 0.0, float("nan"), degenerate=True)
    col = lambda x1: column_intervals(f, x1, samples)  # noqa: E731
    row = lambda x2: column_intervals(f.swapped(), x2, samples)  # noqa: E731
    _check_window(col, row, window)
    coarse = column_area(col, window, resolution)
    fine = column_area(col, window, 2 * resolution)
    area = richardson(coarse, fine)
    return AreaReport(area, poly.area, area / (math.pi**2 * poly.area),
                      coarse_area=coarse, fine_area=fine)
