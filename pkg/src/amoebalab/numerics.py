"""Numerical kernel: polynomial roots, periodic quadrature, convex hulls,
level-set tracing and finite-difference Hessians."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .config import DEFAULT, Tolerances


class NumericsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# value types


@dataclass(frozen=True)
class Polygon2D:
    """Counterclockwise convex polygon; may degenerate to a segment or point."""

    vertices: np.ndarray  # shape (k, 2)

    @property
    def degenerate(self) -> bool:
        return len(self.vertices) < 3

    @property
    def area(self) -> float:
        if self.degenerate:
            return 0.0
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    def contains(self, point, tol: float = 1e-9) -> bool:
        p = np.asarray(point, dtype=float)
        v = self.vertices
        if len(v) == 1:
            return bool(np.linalg.norm(p - v[0]) <= tol)
        if len(v) == 2:
            d = v[1] - v[0]
            s = np.clip(np.dot(p - v[0], d) / np.dot(d, d), 0.0, 1.0)
            return bool(np.linalg.norm(v[0] + s * d - p) <= tol)
        for a, b in zip(v, np.roll(v, -1, axis=0)):
            e = b - a
            cross = e[0] * (p[1] - a[1]) - e[1] * (p[0] - a[0])
            if cross < -tol * np.linalg.norm(e):
                return False
        return True


@dataclass(frozen=True)
class GridRaster:
    origin: np.ndarray  # lower-left cell center
    spacing: tuple  # (dx1, dx2)
    cells: np.ndarray  # indexed [i1, i2]

    def __post_init__(self):
        if min(self.spacing) <= 0:
            raise NumericsError("raster spacing must be positive")
        if self.cells.ndim != 2 or min(self.cells.shape) < 2:
            raise NumericsError("raster must be at least 2x2")

    def axes(self):
        n1, n2 = self.cells.shape
        return (self.origin[0] + self.spacing[0] * np.arange(n1),
                self.origin[1] + self.spacing[1] * np.arange(n2))

    @property
    def cell_area(self) -> float:
        return self.spacing[0] * self.spacing[1]


@dataclass(frozen=True)
class SymMatrix2:
    h11: float
    h12: float
    h22: float

    @classmethod
    def from_array(cls, m) -> "SymMatrix2":
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), 0.5 * float(m[0, 1] + m[1, 0]), float(m[1, 1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.h11, self.h12], [self.h12, self.h22]])

    @property
    def det(self) -> float:
        return self.h11 * self.h22 - self.h12 * self.h12

    @property
    def trace(self) -> float:
        return self.h11 + self.h22

    def is_positive_definite(self) -> bool:
        return self.h11 > 0 and self.det > 0

    def __add__(self, other: "SymMatrix2") -> "SymMatrix2":
        return SymMatrix2(self.h11 + other.h11, self.h12 + other.h12, self.h22 + other.h22)

    def scaled(self, s: float) -> "SymMatrix2":
        return SymMatrix2(s * self.h11, s * self.h12, s * self.h22)

    def allclose(self, other: "SymMatrix2", atol: float = 0.0, rtol: float = 0.0) -> bool:
        return bool(np.allclose(self.as_array(), other.as_array(), atol=atol, rtol=rtol))


ZERO2 = SymMatrix2(0.0, 0.0, 0.0)


# ---------------------------------------------------------------------------
# polynomial roots


def _trim(coefficients) -> np.ndarray:
    c = np.asarray(coefficients, dtype=complex).ravel()
    nz = np.nonzero(c)[0]
    if nz.size == 0:
        raise NumericsError("zero polynomial")
    return c[: nz[-1] + 1]


def _aberth(c: np.ndarray, maxiter: int = 200) -> tuple[np.ndarray, bool]:
    """Aberth-Ehrlich simultaneous iteration; ``c`` ascending, monic not required."""
    n = len(c) - 1
    desc = c[::-1]
    ddesc = np.polyder(desc)
    # Bini-style start: points on a circle of the geometric-mean root radius.
    scale = abs(c[0] / c[-1]) ** (1.0 / n) if c[0] != 0 else 1.0
    scale = scale if np.isfinite(scale) and scale > 0 else 1.0
    z = scale * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))
    eye = np.eye(n, dtype=bool)
    for _ in range(maxiter):
        p = np.polyval(desc, z)
        dp = np.polyval(ddesc, z)
        with np.errstate(all="ignore"):
            w = p / dp
            diff = z[:, None] - z[None, :]
            diff[eye] = 1.0
            inv = 1.0 / diff
            inv[eye] = 0.0
            s = inv.sum(axis=1)
            step = w / (1.0 - w * s)
        if not np.all(np.isfinite(step)):
            return z, False
        z = z - step
        if np.all(np.abs(step) <= 4 * np.finfo(float).eps * (1.0 + np.abs(z))):
            return z, True
    return z, False


def _newton_polish(c: np.ndarray, z: np.ndarray, steps: int = 2) -> np.ndarray:
    desc = c[::-1]
    ddesc = np.polyder(desc)
    for _ in range(steps):
        dp = np.polyval(ddesc, z)
        ok = dp != 0
        nz = z.copy()
        nz[ok] = z[ok] - np.polyval(desc, z[ok]) / dp[ok]
        better = np.abs(np.polyval(desc, nz)) < np.abs(np.polyval(desc, z))
        z = np.where(better, nz, z)
    return z


def _residual_ok(c: np.ndarray, z: np.ndarray, tol: float) -> bool:
    n = len(c) - 1
    res = np.abs(np.polyval(c[::-1], z)) / (1.0 + np.abs(z)) ** n
    return bool(np.all(res <= tol * np.max(np.abs(c))))


def poly_roots(coefficients: Sequence[complex], tol: Tolerances = DEFAULT) -> np.ndarray:
    """Roots of ``sum c[k] z**k`` (coefficients in ascending order).

    Aberth iteration first; falls back to companion-matrix eigenvalues when
    the iteration stalls or misses the residual bound.
    """
    c = _trim(coefficients)
    n = len(c) - 1
    if n < 1:
        raise NumericsError("degree must be at least 1")
    if n == 1:
        return np.array([-c[0] / c[1]])
    z, converged = _aberth(c)
    if converged:
        z = _newton_polish(c, z, steps=1)
    if not converged or not _residual_ok(c, z, tol.root_residual):
        z = _newton_polish(c, np.roots(c[::-1]).astype(complex))
    return z


# ---------------------------------------------------------------------------
# quadrature


def _eval(fn: Callable, nodes: np.ndarray) -> np.ndarray:
    try:
        vals = np.asarray(fn(nodes))
        if vals.shape == nodes.shape:
            return vals
    except Exception:
        pass
    return np.array([fn(t) for t in nodes])


def periodic_quadrature(integrand: Callable, nodes: int, offset: float = 0.0) -> float:
    """Mean of ``integrand`` over ``[0, 2*pi)`` with the N-point trapezoid rule.

    ``offset`` shifts every node by that fraction of the spacing."""
    if nodes < 8:
        raise NumericsError("need at least 8 nodes")
    theta = 2 * np.pi * (np.arange(nodes) + offset) / nodes
    vals = _eval(integrand, theta)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise NumericsError(f"non-finite integrand at node {k} (theta={theta[k]!r})")
    return float(np.mean(vals))


def gauss_legendre(fn: Callable, a: float, b: float, n: int = 16) -> float:
    x, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (b - a) * x + 0.5 * (a + b)
    return float(0.5 * (b - a) * np.dot(w, _eval(fn, t)))


# ---------------------------------------------------------------------------
# convex hull


def convex_hull(points, tol: Tolerances = DEFAULT) -> Polygon2D:
    """Andrew's monotone chain; collinear points are dropped."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise NumericsError("convex hull of no points")
    # merge near-duplicates
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    uniq: list = []
    for p in pts[order]:
        if not uniq or np.max(np.abs(p - uniq[-1])) > tol.hull_duplicate:
            uniq.append(p)
    if len(uniq) <= 2:
        if len(uniq) == 2 and np.max(np.abs(uniq[0] - uniq[1])) <= tol.hull_duplicate:
            uniq = uniq[:1]
        return Polygon2D(np.array(uniq))
    scale = max(1.0, float(np.max(np.abs(pts))))
    eps = tol.hull_duplicate * scale * scale

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in uniq:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= eps:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(uniq):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= eps:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) == 2 and np.max(np.abs(hull[0] - hull[1])) <= tol.hull_duplicate:
        hull = hull[:1]
    return Polygon2D(np.array(hull))


def minkowski_sum(p: Polygon2D, q: Polygon2D) -> Polygon2D:
    sums = (p.vertices[:, None, :] + q.vertices[None, :, :]).reshape(-1, 2)
    return convex_hull(sums)


def sqrt_det_superadditive(m1: SymMatrix2, m2: SymMatrix2, tol: Tolerances = DEFAULT) -> bool:
    lhs = math.sqrt(max((m1 + m2).det, 0.0))
    return lhs >= math.sqrt(max(m1.det, 0.0)) + math.sqrt(max(m2.det, 0.0)) - tol.superadditivity


# ---------------------------------------------------------------------------
# level-set tracing


@dataclass
class Polyline:
    vertices: np.ndarray  # (k, 2)
    closed: bool

    @property
    def length(self) -> float:
        v = self.vertices
        if self.closed:
            v = np.vstack([v, v[:1]])
        return float(np.sum(np.linalg.norm(np.diff(v, axis=0), axis=1)))


@dataclass
class LevelSet:
    polylines: list
    near_critical: bool = False
    max_residual: float = 0.0
    notes: list = field(default_factory=list)


def _field_on(field_fn: Callable, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    try:
        v = np.asarray(field_fn(x, y), dtype=float)
        if v.shape == np.broadcast(x, y).shape:
            return v
    except Exception:
        pass
    return np.vectorize(lambda a, b: float(field_fn(a, b)))(x, y)


def trace_level_set(field_fn: Callable, window, level: float, resolution,
                    exclude: Sequence = (), tol: Tolerances = DEFAULT) -> LevelSet:
    """Polylines approximating ``{field_fn(x, y) == level}`` inside ``window``.

    ``window`` is ``(x1min, x1max, x2min, x2max)``; ``resolution`` an int or a
    pair of grid sizes.  ``exclude`` lists ``(center_x, center_y, radius)``
    disks (punctures) that are masked out.  Marching squares locates the
    crossings on grid edges; each vertex is then bisected along its edge.
    """
    from skimage import measure

    n1, n2 = (resolution, resolution) if np.isscalar(resolution) else resolution
    x1min, x1max, x2min, x2max = map(float, window)
    xs = np.linspace(x1min, x1max, int(n1))
    ys = np.linspace(x2min, x2max, int(n2))
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    vals = _field_on(field_fn, X, Y) - level
    mask = np.isfinite(vals)
    for cx, cy, r in exclude:
        mask &= (X - cx) ** 2 + (Y - cy) ** 2 > r * r
    vals = np.where(mask, vals, 0.0)
    contours = measure.find_contours(vals, 0.0, mask=mask)

    out = []
    worst = 0.0
    near_critical = False
    dx, dy = xs[1] - xs[0], ys[1] - ys[0]
    for c in contours:
        closed = len(c) > 2 and np.allclose(c[0], c[-1])
        if closed:
            c = c[:-1]
        r, s = c[:, 0], c[:, 1]
        on_row = np.abs(r - np.round(r)) < 1e-9
        # endpoints of the grid edge containing each vertex
        i0 = np.where(on_row, np.round(r), np.floor(r)).astype(int)
        j0 = np.where(on_row, np.floor(s), np.round(s)).astype(int)
        i1 = np.where(on_row, i0, np.minimum(i0 + 1, len(xs) - 1))
        j1 = np.where(on_row, np.minimum(j0 + 1, len(ys) - 1), j0)
        a = np.stack([xs[i0], ys[j0]], axis=1)
        b = np.stack([xs[i1], ys[j1]], axis=1)
        fa = _field_on(field_fn, a[:, 0], a[:, 1]) - level
        fb = _field_on(field_fn, b[:, 0], b[:, 1]) - level
        t = np.clip(np.where(on_row, s - j0, r - i0), 0.0, 1.0)
        pts = a + t[:, None] * (b - a)
        bracket = np.isfinite(fa) & np.isfinite(fb) & (np.sign(fa) != np.sign(fb))
        lo, hi, flo = a.copy(), b.copy(), fa.copy()
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            fm = _field_on(field_fn, mid[:, 0], mid[:, 1]) - level
            left = np.sign(fm) == np.sign(flo)
            lo = np.where(left[:, None], mid, lo)
            flo = np.where(left, fm, flo)
            hi = np.where(left[:, None], hi, mid)
        refined = 0.5 * (lo + hi)
        pts = np.where(bracket[:, None], refined, pts)
        res = np.abs(_field_on(field_fn, pts[:, 0], pts[:, 1]) - level)
        if res.size:
            worst = max(worst, float(np.max(res)))
        # gradient magnitude along the curve flags nearby critical points
        gx = (_field_on(field_fn, pts[:, 0] + 1e-6 * dx, pts[:, 1])
              - _field_on(field_fn, pts[:, 0] - 1e-6 * dx, pts[:, 1])) / (2e-6 * dx)
        gy = (_field_on(field_fn, pts[:, 0], pts[:, 1] + 1e-6 * dy)
              - _field_on(field_fn, pts[:, 0], pts[:, 1] - 1e-6 * dy)) / (2e-6 * dy)
        vspan = float(np.nanmax(np.abs(vals))) or 1.0
        if np.any(np.hypot(gx, gy) * max(dx, dy) < 1e-3 * vspan / max(n1, n2)):
            near_critical = True
        out.append(Polyline(pts, bool(closed)))
    result = LevelSet(out, near_critical, worst)
    if worst > tol.level_residual:
        result.notes.append(f"max vertex residual {worst:.2e} exceeds tolerance")
    if near_critical:
        warnings.warn("level close to a critical value; level set may self-intersect",
                      RuntimeWarning, stacklevel=2)
    return result


# ---------------------------------------------------------------------------
# finite differences


def fd_hessian(f: Callable, x, h: float = 1e-3) -> SymMatrix2:
    x = np.asarray(x, dtype=float)
    e1, e2 = np.array([h, 0.0]), np.array([0.0, h])
    f0 = f(x)
    vals = {
        "p1": f(x + e1), "m1": f(x - e1), "p2": f(x + e2), "m2": f(x - e2),
        "pp": f(x + e1 + e2), "pm": f(x + e1 - e2), "mp": f(x - e1 + e2), "mm": f(x - e1 - e2),
    }
    if not all(np.isfinite(v) for v in [f0, *vals.values()]):
        raise NumericsError("non-finite sample in finite-difference stencil")
    h11 = (vals["p1"] - 2 * f0 + vals["m1"]) / h**2
    h22 = (vals["p2"] - 2 * f0 + vals["m2"]) / h**2
    h12 = (vals["pp"] - vals["pm"] - vals["mp"] + vals["mm"]) / (4 * h**2)
    return SymMatrix2(float(h11), float(h12), float(h22))


def fd_gradient(f: Callable, x, h: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.empty(2)
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def interval_union_length(intervals, lo: float = -np.inf, hi: float = np.inf) -> float:
    """Total length of a union of closed intervals, clipped to ``[lo, hi]``."""
    segs = sorted((max(a, lo), min(b, hi)) for a, b in intervals if min(b, hi) > max(a, lo))
    total, cur_a, cur_b = 0.0, None, None
    for a, b in segs:
        if cur_b is None or a > cur_b:
            if cur_b is not None:
                total += cur_b - cur_a
            cur_a, cur_b = a, b
        else:
            cur_b = max(cur_b, b)
    if cur_b is not None:
        total += cur_b - cur_a
    return total


def richardson(coarse: float, fine: float, ratio: float = 2.0, order: float = 1.0) -> float:
    k = ratio**order
    return (k * fine - coarse) / (k - 1.0)


def poly_roots_batch(coefficients, tol: Tolerances = DEFAULT, maxiter: int = 200) -> np.ndarray:
    """Row-wise roots of a stack of polynomials of equal degree.

    ``coefficients`` has shape ``(m, d + 1)`` in ascending order with nonzero
    leading column.  Vectorized Aberth iteration; rows that stall or miss the
    residual bound are redone by :func:`poly_roots`.
    """
    C = np.asarray(coefficients, dtype=complex)
    m, d1 = C.shape
    n = d1 - 1
    if n < 1:
        return np.zeros((m, 0), dtype=complex)
    if np.any(C[:, -1] == 0):
        raise NumericsError("leading coefficient vanishes in batch")
    if n == 1:
        return (-C[:, 0] / C[:, 1])[:, None]
    if n == 2:
        a, b, c = C[:, 2], C[:, 1], C[:, 0]
        disc = np.sqrt(b * b - 4 * a * c)
        sgn = np.where((np.conj(b) * disc).real >= 0, 1.0, -1.0)
        q = -0.5 * (b + sgn * disc)
        with np.errstate(all="ignore"):
            r1 = np.where(q != 0, q / a, 0.0)
            r2 = np.where(q != 0, c / q, 0.0)
        return np.stack([r1, r2], axis=1)

    def horner(z):
        p = np.zeros_like(z)
        dp = np.zeros_like(z)
        for k in range(n, -1, -1):
            dp = dp * z + p
            p = p * z + C[:, k:k + 1]
        return p, dp

    with np.errstate(all="ignore"):
        scale = np.abs(C[:, :1] / C[:, -1:]) ** (1.0 / n)
    scale = np.where(np.isfinite(scale) & (scale > 0), scale, 1.0)
    z = scale * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))[None, :]
    eye = np.eye(n, dtype=bool)[None]
    done = np.zeros(m, dtype=bool)
    for _ in range(maxiter):
        p, dp = horner(z)
        with np.errstate(all="ignore"):
            w = p / dp
            diff = z[:, :, None] - z[:, None, :]
            diff = np.where(eye, 1.0, diff)
            s = np.where(eye, 0.0, 1.0 / diff).sum(axis=2)
            step = w / (1.0 - w * s)
        step = np.where(np.isfinite(step), step, 0.0)
        step[done] = 0.0
        z = z - step
        done |= np.all(np.abs(step) <= 4 * np.finfo(float).eps * (1.0 + np.abs(z)), axis=1)
        if done.all():
            break
    p, _ = horner(z)
    res = np.abs(p) / (1.0 + np.abs(z)) ** n
    bad = ~done | ~np.all(res <= tol.root_residual * np.max(np.abs(C), axis=1, keepdims=True), axis=1)
    for r in np.nonzero(bad)[0]:
        z[r] = poly_roots(C[r], tol)
    return z
