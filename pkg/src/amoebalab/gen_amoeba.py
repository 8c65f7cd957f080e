"""Amoebas of punctured curves under a pair of imaginary-normalized differentials.

The amoeba map is ``chi(p) = (x1(p), x2(p))`` with ``x_j = Re zeta_j``.  The
generalized Ronkin function ``rho`` is evaluated through the level sets of
``x1``: sweeping ``{x1 = c}`` by gradient lines labelled with ``y1`` (see
:mod:`amoebalab.level_flows`),

    2 pi d2 rho(c, v)  = |{y1 on {x1 = c} : x2 <= v}|,
    2 pi rho(c, v)     = J(c) + int (v - x2)_+ dy1 + 2 pi phi(c),

where ``J`` and ``phi`` are closed forms in the residues and the regular parts
of ``x_j`` at the punctures.  ``d1 rho`` is the same measure with the roles of
the two coordinates exchanged.  Points of ``{x1 = c}`` where ``x2 = v`` are
exactly the preimages of ``(c, v)``.

Sign conventions (fixed against finite differences): ``rho`` is convex, and
its Hessian at a regular amoeba point is

    (1 / 2 pi) sum_p |Im R|^-1 [[1, -Re R], [-Re R, |R|^2]],  R = dzeta1 / dzeta2.

A preimage has sign ``-sign(Im R)``; with ``y1`` the sweep label,
``2 pi d2 rho = sum_{-} y1 - sum_{+} y1 + Pi1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate

from .config import DEFAULT, Tolerances
from .level_flows import FlowError, LevelColumn, LevelFlows, _hermite
from .numerics import (ZERO2, GridRaster, Polygon2D, SymMatrix2, convex_hull,
                       interval_union_length, richardson, trace_level_set)
from .plane_amoeba import AmoebaError, AreaReport, column_area, raster_from_columns
from .riemann import (INDifferential, PuncturedCurve, ResidueVector, differential_zeros, is_inf,
                      y_conjugate)

TWO_PI = 2 * math.pi


# ---------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class PreimageRecord:
    point: complex
    sign: int
    y1: float
    y2: float
    R: complex


class PreimageSet(list):
    """Preimages of a point; ``periods`` carries the full-cycle terms ``(Pi1, Pi2)``."""

    periods: tuple = (0.0, 0.0)


class AmoebaData:
    """A punctured curve with two imaginary-normalized differentials."""

    def __init__(self, curve: PuncturedCurve, dzeta1: INDifferential, dzeta2: INDifferential,
                 anchor=None, tol: Tolerances = DEFAULT, nodes: int = 256):
        if dzeta1.curve != curve or dzeta2.curve != curve:
            raise AmoebaError("differentials must live on the given curve")
        A = np.array([dzeta1.residues.a, dzeta2.residues.a], dtype=float)
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[0] == 0 or sv[1] <= 1e-12 * sv[0]:
            raise AmoebaError("degenerate residues: rank < 2 (the amoeba is a curve)")
        self.curve = curve
        self.dzeta1, self.dzeta2 = dzeta1, dzeta2
        self.tol = tol
        self.nodes = int(nodes)
        self.anchor = complex(anchor) if anchor is not None else dzeta1.base
        if curve.distance_to_punctures(self.anchor) <= tol.pole_distance:
            raise AmoebaError("anchor must be a regular point")
        self._columns: dict = {}

    @classmethod
    def from_residues(cls, curve: PuncturedCurve, rows, anchor=None, base_point=None,
                      tol: Tolerances = DEFAULT, nodes: int = 256) -> "AmoebaData":
        rows = np.asarray(rows, dtype=float)
        if rows.shape != (2, curve.n):
            raise AmoebaError(f"residues must be 2 x {curve.n}")
        d1 = INDifferential(curve, ResidueVector(tuple(rows[0])), base_point, tol)
        d2 = INDifferential(curve, ResidueVector(tuple(rows[1])), d1.base, tol)
        return cls(curve, d1, d2, anchor, tol, nodes)

    @classmethod
    def from_json(cls, obj, tol: Tolerances = DEFAULT) -> "AmoebaData":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            curve = curve_from_json(obj)
            rows = obj["residues"]
            anchor = obj.get("anchor")
            anchor = complex(anchor[0], anchor[1]) if anchor is not None else None
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise AmoebaError(f"malformed curve JSON: {exc}") from exc
        return cls.from_residues(curve, rows, anchor=anchor, tol=tol)

    @property
    def residues(self) -> np.ndarray:
        """``n x 2`` array of ``(a_{alpha,1}, a_{alpha,2})``."""
        return np.array([self.dzeta1.residues.a, self.dzeta2.residues.a], dtype=float).T

    @cached_property
    def regular_parts(self) -> np.ndarray:
        """``n x 2`` regular parts of ``(x1, x2)`` at the punctures."""
        return np.array([[self.dzeta1.regular_part(k), self.dzeta2.regular_part(k)]
                         for k in range(self.curve.n)])

    @cached_property
    def flows1(self) -> LevelFlows:
        return LevelFlows(self.dzeta1, self.dzeta2, self.nodes)

    @cached_property
    def flows2(self) -> LevelFlows:
        return LevelFlows(self.dzeta2, self.dzeta1, self.nodes)

    def column(self, which: int, c: float) -> LevelColumn:
        key = (which, float(c))
        col = self._columns.get(key)
        if col is None:
            flows = self.flows1 if which == 1 else self.flows2
            try:
                col = flows.column(float(c))
            except FlowError as exc:
                raise AmoebaError(f"critical value: {exc}") from exc
            if len(self._columns) > 256:
                self._columns.clear()
            self._columns[key] = col
        return col

    @cached_property
    def anchor_x(self) -> np.ndarray:
        return chi_map(self, self.anchor)


def curve_from_json(obj) -> PuncturedCurve:
    genus = int(obj["genus"])
    tau = obj.get("tau", [0.0, 1.0])
    pts = []
    for p in obj["punctures"]:
        if p is None or (isinstance(p, str) and p.lower() in ("inf", "infinity")):
            pts.append(None)
        elif isinstance(p, (list, tuple)):
            pts.append(complex(float(p[0]), float(p[1])))
        else:
            pts.append(complex(p))
    return PuncturedCurve(genus, tuple(pts), complex(tau[0], tau[1]), bool(obj.get("m_curve", False)))


def gl2_transform(data: AmoebaData, C) -> AmoebaData:
    """New data with differentials ``dzeta'_i = sum_j C[i, j] dzeta_j``."""
    C = np.asarray(C, dtype=float)
    d1 = data.dzeta1.combine(C[0, 0], data.dzeta2, C[0, 1])
    d2 = data.dzeta1.combine(C[1, 0], data.dzeta2, C[1, 1])
    return AmoebaData(data.curve, d1, d2, data.anchor, data.tol, data.nodes)


# ---------------------------------------------------------------------------
# the map and its critical locus


def chi_map(data: AmoebaData, p) -> np.ndarray:
    p = complex(p)
    return np.array([data.dzeta1.x_harmonic(p), data.dzeta2.x_harmonic(p)])


def chi_array(data: AmoebaData, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.stack([data.dzeta1.x_array(z), data.dzeta2.x_array(z)], axis=-1)


@dataclass
class CriticalLocus:
    polylines: list
    isolated: list
    notes: list = field(default_factory=list)


def default_curve_window(curve: PuncturedCurve):
    if curve.genus == 1:
        T = curve.T
        return (-0.02, 1.02, -0.02 * T, 1.02 * T)
    fin = [abs(p) for p in curve.punctures if not is_inf(p)]
    r = 2 * max(fin + [1.0]) + 1
    return (-r, r, -r, r)


def critical_locus(data: AmoebaData, window=None, resolution: int = 200) -> CriticalLocus:
    """``{Im R = 0}`` traced as ``Im(f1 conj f2) = 0`` plus common zeros of the differentials."""
    window = window or default_curve_window(data.curve)

    def field_fn(x, y):
        z = x + 1j * y
        return (data.dzeta1.density_array(z) * np.conj(data.dzeta2.density_array(z))).imag

    span = max(window[1] - window[0], window[3] - window[2])
    excl = []
    for p in data.curve.punctures:
        if is_inf(p):
            continue
        shifts = [0j]
        if data.curve.genus == 1:
            shifts = [m + k * data.curve.tau for m in (-1, 0, 1) for k in (-1, 0, 1)]
        for sh in shifts:
            q = p + sh
            excl.append((q.real, q.imag, 0.01 * span))
    ls = trace_level_set(field_fn, window, 0.0, resolution, exclude=excl)
    iso = []
    z1 = differential_zeros(data.dzeta1).points
    for q in z1:
        if is_inf(q):
            continue
        if abs(data.dzeta2.density(q)) < 1e-8 * (1 + abs(data.dzeta2.density(q + 1e-3))):
            iso.append(q)
    return CriticalLocus(ls.polylines, iso, list(ls.notes))


# ---------------------------------------------------------------------------
# preimages, gradient, Hessian, value


def _crossing_records(data: AmoebaData, x):
    c, v = float(x[0]), float(x[1])
    col = data.column(1, c)
    cr = col.crossings(v)
    return col, cr


def chi_preimages(data: AmoebaData, x, with_conjugates: bool = True) -> PreimageSet:
    """All ``p`` with ``chi(p) = x``, with signs, sweep labels and ``R``."""
    tol = data.tol
    col, cr = _crossing_records(data, x)
    out = PreimageSet()
    fl = data.flows1
    for _, s, st in cr:
        z = complex(fl.points(st)[0])
        R = complex(1.0 / fl.ratio(st)[0])
        if abs(R.imag) < tol.critical_im_r * max(1.0, abs(R)):
            raise AmoebaError("critical value: a preimage lies on the critical locus")
        y2 = _y2_along_line(data, st, s, z) if with_conjugates else float("nan")
        out.append(PreimageRecord(z, -int(np.sign(R.imag)), s, y2, R))
    G2 = col.measure_below(float(x[1]), cr)
    G1 = data.column(2, float(x[1])).measure_below(float(x[0]))
    pi1 = G2 - sum(-r.sign * r.y1 for r in out)
    out.periods = (pi1, G1)
    return out


def _y2_along_line(data: AmoebaData, st, s: float, z: complex) -> float:
    """``Im zeta2`` continued from the source of the sweep line through ``z``."""
    fl = data.flows1
    k = None
    for cand in fl.sources:
        a = fl.charts[cand].a
        if -math.pi * a - 1e-12 <= s <= 3 * math.pi * a:
            k = cand
            break
    if k is None:
        return float("nan")
    # march down the line into the source chart, then read the local branch of zeta2
    try:
        ch = fl.charts[k]
        c = data.dzeta1.x_harmonic(z)
        lo = ch.h + ch.a * math.log(ch.r) - 1.0
        path = [z]
        cur = st
        lev = c
        while lev > lo:
            dl = min(0.25, lev - lo)
            cur = fl.advance(cur, -dl)
            lev -= dl
            path.append(complex(fl.points(cur)[0]))
        y = y_conjugate(data.dzeta2, path[::-1], data.tol)
        start = data.dzeta2.local_primitive(k, path[-1]).imag
        return float(start + y)
    except Exception:  # noqa: BLE001 - conjugate values are diagnostic only
        return float("nan")


def rho_gradient(data: AmoebaData, x) -> np.ndarray:
    c, v = float(x[0]), float(x[1])
    G2 = data.column(1, c).measure_below(v)
    G1 = data.column(2, v).measure_below(c)
    return np.array([G1, G2]) / TWO_PI


def hessian_term(R: complex) -> SymMatrix2:
    s = 1.0 / (TWO_PI * abs(R.imag))
    return SymMatrix2(s, -s * R.real, s * abs(R) ** 2)


def rho_hessian(data: AmoebaData, x) -> SymMatrix2:
    # no preimages: rho is affine there and the Hessian vanishes
    pre = chi_preimages(data, x, with_conjugates=False)
    total = ZERO2
    for r in pre:
        total = total + hessian_term(r.R)
    return total


def _affine_parts(data: AmoebaData, c: float) -> tuple[float, float]:
    """Closed forms ``J(c)`` and ``phi(c)`` of the level-set representation."""
    A = data.residues
    H = data.regular_parts
    J = 0.0
    phi = 0.0
    for (a1, a2), (h1, h2) in zip(A, H):
        inside = a1 > 0 or (a1 == 0 and h1 < c)
        if inside:
            J += c * a2 + a1 * h2 - a2 * h1
        if a2 < 0:
            if a1 > 0:
                phi -= c * a2
            elif a1 == 0:
                phi -= a2 * max(0.0, c - h1)
    return TWO_PI * J, phi


def _rho_raw(data: AmoebaData, x) -> float:
    c, v = float(x[0]), float(x[1])
    col = data.column(1, c)
    J, phi = _affine_parts(data, c)
    return (J + col.excess_integral(v)) / TWO_PI + phi


def rho_value(data: AmoebaData, x, anchor_x=None, slow_mode: bool = False) -> float:
    """``rho(x) - rho(anchor)``.

    ``slow_mode`` additionally integrates the gradient along an axis-parallel
    path from the anchor and raises if the two disagree."""
    ax = np.asarray(anchor_x if anchor_x is not None else data.anchor_x, dtype=float)
    val = _rho_raw(data, x) - _rho_raw(data, ax)
    if slow_mode:
        alt = rho_path_integral(data, x, ax)
        if abs(alt - val) > 1e-6 * (1 + abs(val)):
            raise AmoebaError(f"rho cross-check failed: {val!r} vs path integral {alt!r}")
    return val


def rho_path_integral(data: AmoebaData, x, start) -> float:
    """Integrate the gradient along ``start -> (x1, start2) -> x``."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(start, dtype=float)
    # each leg needs a single level column: d1 rho along x2 = const, d2 rho along x1 = const
    row = data.column(2, float(s[1]))
    col = data.column(1, float(x[0]))
    leg1, _ = integrate.quad(lambda t: row.measure_below(t), s[0], x[0],
                             limit=200, epsabs=1e-11, epsrel=1e-11)
    leg2, _ = integrate.quad(lambda t: col.measure_below(t), s[1], x[1],
                             limit=200, epsabs=1e-11, epsrel=1e-11)
    return (leg1 + leg2) / TWO_PI


# ---------------------------------------------------------------------------
# tentacles, normalization, polygon


def tentacles(data: AmoebaData) -> list:
    """``(alpha, direction, point)``: the tentacle of puncture ``alpha`` runs along
    ``point - t * a_alpha`` (``t -> +inf``)."""
    out = []
    for k, (a, h) in enumerate(zip(data.residues, data.regular_parts)):
        if np.any(a != 0):
            out.append((k, -a, h))
    return out


def translation_offset(data: AmoebaData) -> np.ndarray:
    """Intersection of the first two non-parallel tentacle asymptotes."""
    tl = tentacles(data)
    for i in range(len(tl)):
        for j in range(i + 1, len(tl)):
            d1, d2 = tl[i][1], tl[j][1]
            M = np.array([[d1[0], -d2[0]], [d1[1], -d2[1]]])
            if abs(np.linalg.det(M)) > 1e-12 * (np.linalg.norm(d1) * np.linalg.norm(d2)):
                t = np.linalg.solve(M, tl[j][2] - tl[i][2])
                return tl[i][2] + t[0] * d1
    return np.zeros(2)


@dataclass
class DeltaPolygon:
    polygon: Polygon2D
    vertex_assignments: list
    vertices_by_puncture: dict = field(default_factory=dict)
    brute_force: Polygon2D | None = None
    max_deviation: float = float("nan")
    stable: bool = True


def far_field_gradient(A: np.ndarray, u) -> np.ndarray:
    """Gradient of ``rho`` far out in direction ``u``: each tentacle passing below
    (left of) the point contributes ``|a_1|`` (``|a_2|``)."""
    u1, u2 = float(u[0]), float(u[1])
    g1 = g2 = 0.0
    for a1, a2 in A:
        if a1 * u1 < 0 and u1 * a2 / a1 < u2:
            g2 += abs(a1)
        if a2 * u2 < 0 and u2 * a1 / a2 < u1:
            g1 += abs(a2)
    return np.array([g1, g2])


def _component_directions(A: np.ndarray, eps: float):
    """Tentacle angles (perturbed by ``eps`` in index order) and, for each
    puncture, the bisector of the sector counterclockwise after its tentacle."""
    idx = [k for k in range(len(A)) if np.any(A[k] != 0)]
    ang = {k: (math.atan2(-A[k, 1], -A[k, 0]) + eps * n) % TWO_PI for n, k in enumerate(idx)}
    order = sorted(idx, key=lambda k: ang[k])
    dirs = {}
    for i, k in enumerate(order):
        nxt = order[(i + 1) % len(order)]
        gap = (ang[nxt] - ang[k]) % TWO_PI
        if gap == 0:
            gap = TWO_PI
        mid = ang[k] + 0.5 * gap
        dirs[k] = np.array([math.cos(mid), math.sin(mid)])
    return order, dirs


def polygon_closed_form(A, eps: float = 1e-9) -> tuple[dict, bool]:
    """Vertex ``v_alpha`` for each puncture: the far-field gradient in the sector
    following its tentacle.  Returns the vertices and a stability flag
    (unchanged when ``eps`` shrinks tenfold)."""
    A = np.asarray(A, dtype=float)
    _, dirs = _component_directions(A, eps)
    _, dirs2 = _component_directions(A, eps / 10)
    v = {k: far_field_gradient(A, d) for k, d in dirs.items()}
    v2 = {k: far_field_gradient(A, d) for k, d in dirs2.items()}
    stable = all(np.allclose(v[k], v2[k], atol=1e-12) for k in v)
    return v, stable


def polygon_printed_formula(A) -> dict:
    """Vertices by the sign/angle-set sums as printed (kept for comparison;
    see the notes in the decisions ledger)."""
    A = np.asarray(A, dtype=float)
    phi = np.arctan2(A[:, 1], A[:, 0])
    out = {}
    for a in range(len(A)):
        v1 = v2 = 0.0
        for sgn in (1, -1):
            if sgn * A[a, 1] > 0:
                I = [b for b in range(len(A)) if sgn * A[b, 1] > 0 and sgn * (phi[b] - phi[a]) > 0]
                v1 = sgn * sum(A[b, 1] for b in I)
            if sgn * A[a, 0] > 0:
                J = [b for b in range(len(A)) if -sgn * A[b, 1] > 0 and -sgn * (phi[b] - phi[a]) > 0]
                v2 = -sgn * sum(A[b, 0] for b in J)
        out[a] = np.array([v1, v2])
    return out


def _deep_point(data: AmoebaData, direction, center, start: float = 6.0):
    """A point of the complement sector in ``direction`` with no preimages."""
    R = start
    for _ in range(8):
        x = center + R * np.asarray(direction)
        try:
            if not data.column(1, float(x[0])).crossings(float(x[1])):
                return x
        except AmoebaError:
            pass
        R *= 1.6
    raise AmoebaError("could not reach the complement sector")


def delta_polygon(data: AmoebaData, brute_force: bool = True) -> DeltaPolygon:
    A = data.residues
    tol = data.tol
    verts, stable = polygon_closed_form(A, tol.tie_epsilon)
    order, dirs = _component_directions(A, tol.tie_epsilon)
    pts = np.array([verts[k] for k in order])
    poly = convex_hull(pts)
    assign = []
    for v in poly.vertices:
        ks = [k for k in order if np.allclose(verts[k], v, atol=1e-12)]
        assign.append(ks[0] if ks else -1)
    out = DeltaPolygon(poly, assign, verts, stable=stable)
    if brute_force:
        center = translation_offset(data)
        bf = {k: rho_gradient(data, _deep_point(data, dirs[k], center)) for k in order}
        dev = max(float(np.max(np.abs(bf[k] - verts[k]))) for k in order)
        out.brute_force = convex_hull(np.array([bf[k] for k in order]))
        out.max_deviation = dev
        if dev > tol.polygon_agreement:
            raise AmoebaError(f"polygon closed form disagrees with gradients ({dev:.3g})")
    return out


# ---------------------------------------------------------------------------
# area, rasters, Monge-Ampere mass


def column_intervals(data: AmoebaData, c: float) -> list:
    return data.column(1, float(c)).intervals()


def row_intervals(data: AmoebaData, v: float) -> list:
    return data.column(2, float(v)).intervals()


def default_window(data: AmoebaData, margin: float = 6.0):
    """Window around the tentacle hub, sized from the regular parts."""
    center = translation_offset(data)
    H = data.regular_parts
    r = float(np.max(np.abs(H - center))) + margin if len(H) else margin
    return (center[0] - r, center[0] + r, center[1] - r, center[1] + r)


def _check_window(data, window, frac: float = 0.05):
    x1min, x1max, x2min, x2max = map(float, window)
    for c in (x1min, x1max):
        if interval_union_length(column_intervals(data, c), x2min, x2max) > frac * (x2max - x2min):
            raise AmoebaError("window too small: amoeba body reaches the x1 boundary")
    for v in (x2min, x2max):
        if interval_union_length(row_intervals(data, v), x1min, x1max) > frac * (x1max - x1min):
            raise AmoebaError("window too small: amoeba body reaches the x2 boundary")


def _column_area(data, window, columns: int) -> float:
    return column_area(lambda c: column_intervals(data, c), window, columns)


def area_report(data: AmoebaData, window=None, resolution: int = 256,
                check_window: bool = True) -> AreaReport:
    window = window or default_window(data)
    if check_window:
        _check_window(data, window)
    poly = delta_polygon(data, brute_force=False).polygon
    coarse = _column_area(data, window, resolution)
    fine = _column_area(data, window, 2 * resolution)
    area = richardson(coarse, fine)
    if poly.degenerate:
        return AreaReport(area, 0.0, float("nan"), degenerate=True,
                          coarse_area=coarse, fine_area=fine)
    return AreaReport(area, poly.area, area / (math.pi**2 * poly.area),
                      coarse_area=coarse, fine_area=fine)


def membership_raster(data: AmoebaData, window, resolution, normalized: bool = True) -> GridRaster:
    """Raster of the amoeba; ``normalized`` shifts coordinates by
    :func:`translation_offset` so the tentacle hub sits at the origin."""
    off = translation_offset(data) if normalized else np.zeros(2)

    def column_fn(c):
        return [(lo - off[1], hi - off[1]) for lo, hi in column_intervals(data, c + off[0])]

    return raster_from_columns(column_fn, window, resolution)


def _fold_values(data: AmoebaData, col) -> list:
    """Interval ends and interior turning values of ``x2`` along the level set."""
    brk = []
    for arc in col.arcs:
        ds = np.diff(arc.s)
        turn = np.nonzero(np.sign(arc.dg[:-1]) != np.sign(arc.dg[1:]))[0]
        for i in turn:
            tau = np.linspace(0, 1, 65)
            H = _hermite(arc.g[i], arc.g[i + 1], arc.dg[i] * ds[i], arc.dg[i + 1] * ds[i], tau)
            j = int(np.argmax(H) if arc.dg[i] > 0 else np.argmin(H))
            brk.append(float(H[j]))
    return brk


def _fold_count(data: AmoebaData, c: float, x2min: float, x2max: float) -> int:
    col = data.column(1, float(c))
    return sum(1 for b in _fold_values(data, col) if x2min < b < x2max)


def _column_mass(data: AmoebaData, c: float, x2min: float, x2max: float, S, dS, uw) -> float:
    """``int det Hess dx2`` over one column."""
    col = data.column(1, float(c))
    brk = set(_fold_values(data, col))
    for lo, hi in col.intervals():
        brk.update((lo, hi))
    pts = [x2min] + sorted(b for b in brk if x2min < b < x2max) + [x2max]
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi - lo < 1e-12:
            continue
        for y, wi in zip(lo + (hi - lo) * S, (hi - lo) * dS * uw):
            cr = col.crossings(float(y))
            if not cr:
                continue
            h = ZERO2
            for _, _, st in cr:
                R = complex(1.0 / data.flows1.ratio(st)[0])
                if R.imag != 0:
                    h = h + hessian_term(R)
            total += wi * h.det
    return total


def ma_mass(data: AmoebaData, window=None, columns: int = 16, gl_nodes: int = 6) -> float:
    """``int det Hess rho`` over the amoeba inside ``window``.

    Inside a column, ``x2`` is split at the fold values (extrema of ``x2`` along
    the level set) and each piece is mapped through the smoothstep ``S``, which
    removes the inverse-square-root singularity of the density at the folds.
    Across columns the mass jumps where a column becomes tangent to the
    amoeba boundary; those places are located by bisection on the fold count
    and every smooth piece gets its own Gauss-Legendre rule."""
    window = window or default_window(data)
    x1min, x1max, x2min, x2max = map(float, window)
    ug, uw = np.polynomial.legendre.leggauss(gl_nodes)
    ug, uw = 0.5 * (ug + 1), 0.5 * uw
    S = 3 * ug**2 - 2 * ug**3
    dS = 6 * ug - 6 * ug**2

    def folds(c):
        return _fold_count(data, c, x2min, x2max)

    grid = np.linspace(x1min, x1max, columns + 1)
    grid[1:-1] += 1e-7 * (x1max - x1min)  # keep probes off symmetric special columns
    counts = [folds(c) for c in grid]
    cuts = [x1min]
    for a, b, ka, kb in zip(grid[:-1], grid[1:], counts[:-1], counts[1:]):
        lo, hi = a, b
        if ka != kb:
            while hi - lo > 1e-6 * (x1max - x1min):
                mid = 0.5 * (lo + hi)
                if folds(mid) == ka:
                    lo = mid
                else:
                    hi = mid
            cuts.append(0.5 * (lo + hi))
        cuts.append(b)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a < 1e-12:
            continue
        for c, w in zip(a + (b - a) * S, (b - a) * dS * uw):
            total += w * _column_mass(data, c, x2min, x2max, S, dS, uw)
    return total


# ---------------------------------------------------------------------------
# Harnack data


@dataclass
class HarnackReport:
    is_harnack: bool
    reasons: list
    m_curve: bool
    one_oval: bool
    order_matches: bool
    harnack_up_to_orientation: bool
    oval: int | None = None
    cyclic_order: list = field(default_factory=list)
    vertex_order: list = field(default_factory=list)


def _is_cyclic_rotation(a: list, b: list) -> bool:
    if len(a) != len(b):
        return False
    if not a:
        return True
    n = len(a)
    return any(all(a[(i + j) % n] == b[j] for j in range(n)) for i in range(n))


def harnack_classify(data: AmoebaData) -> HarnackReport:
    curve = data.curve
    reasons = []
    m = bool(curve.m_curve)
    if not m:
        reasons.append("(i) curve is not flagged as an M-curve")
    ovals = {curve.oval_index(p) for p in curve.punctures}
    one = m and len(ovals) == 1 and None not in ovals
    if m and not one:
        reasons.append("(ii) punctures are not all on one fixed oval")
    oval = next(iter(ovals)) if one else None
    # cyclic order along the oval, counterclockwise as the boundary of the upper side
    active = [k for k in range(curve.n) if np.any(data.residues[k] != 0)]
    pos = {k: curve.oval_position(curve.punctures[k]) for k in active}
    along = sorted(active, key=lambda k: pos[k])
    if curve.genus == 1 and oval == 1:
        along = along[::-1]  # boundary orientation of the upper side is reversed on the top oval
    poly = delta_polygon(data, brute_force=False)
    verts = poly.vertices_by_puncture
    ang_order, _ = _component_directions(data.residues, data.tol.tie_epsilon)
    # counterclockwise vertex order of the polygon, reading each puncture's vertex
    hull = poly.polygon.vertices
    ccw = []
    for v in hull:
        for k in ang_order:
            if np.allclose(verts[k], v, atol=1e-9) and k not in ccw:
                ccw.append(k)
    on_vertices = [k for k in along if k in ccw]
    order_ok = (len(ccw) == len(active) and _is_cyclic_rotation(on_vertices, ccw))
    reversed_ok = (len(ccw) == len(active) and _is_cyclic_rotation(on_vertices[::-1], ccw))
    if m and one and not order_ok:
        reasons.append("(iii) cyclic order of punctures does not match the polygon's "
                       "counterclockwise vertex order")
    ok = m and one and order_ok
    return HarnackReport(ok, reasons, m, one, order_ok, m and one and (order_ok or reversed_ok),
                         oval, along, ccw)


@dataclass
class InjectivityReport:
    samples: int
    collisions: int
    fold_samples: int
    gradient_samples: int
    gradient_outside_polygon: int
    gradient_holes: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def _upper_samples(curve: PuncturedCurve, n: int, rng) -> np.ndarray:
    if curve.genus == 1:
        T = curve.T
        s = rng.random(n)
        u = rng.random(n)
        return s + 1j * (0.5 * T * (0.02 + 0.96 * u))
    fin = [abs(p) for p in curve.punctures if not is_inf(p)]
    R = 3 * max(fin + [1.0])
    r = R * np.sqrt(rng.random(n))
    th = math.pi * (0.02 + 0.96 * rng.random(n))
    return r * np.exp(1j * th)


def injectivity_test(data: AmoebaData, samples: int = 10000, seed: int = 0,
                     gradient_samples: int = 200) -> InjectivityReport:
    """Sample ``chi`` on the upper side of the real structure and look for
    collisions; sample ``grad rho`` on the amoeba and locate it in the polygon.

    Exact collisions are rare under random sampling even when ``chi`` folds, so
    the report also counts samples whose Jacobian sign disagrees with the
    majority: any such sample proves the map is not a diffeomorphism there."""
    from scipy.spatial import cKDTree

    rng = np.random.default_rng(seed)
    z = _upper_samples(data.curve, samples, rng)
    keep = np.array([data.curve.distance_to_punctures(complex(w)) > 1e-3 for w in z])
    z = z[keep]
    X = chi_array(data, z)
    tree = cKDTree(X)
    collisions = 0
    for i, j in tree.query_pairs(1e-6):
        d = z[i] - z[j]
        if data.curve.genus == 1:
            d = data.curve.lattice.reduce(complex(d))[0]
        if abs(d) > 1e-3:
            collisions += 1
    jac = (data.dzeta1.density_array(z) * np.conj(data.dzeta2.density_array(z))).imag
    pos, neg = int(np.sum(jac > 0)), int(np.sum(jac < 0))
    folds = min(pos, neg)
    poly = delta_polygon(data, brute_force=False).polygon
    outside = 0
    grads = []
    for w in z[:gradient_samples]:
        x = chi_map(data, complex(w))
        try:
            g = rho_gradient(data, x)
        except AmoebaError:
            continue
        grads.append(g)
        if not poly.contains(g, 1e-7):
            outside += 1
    notes = []
    holes = []
    if data.curve.genus == 1:
        # the puncture-free oval maps to a single gradient value
        T = data.curve.T
        oval_pts = np.linspace(0, 1, 9)[:-1] + 0.5j * T
        hv = []
        for w in oval_pts:
            x = chi_map(data, complex(w))
            try:
                hv.append(rho_gradient(data, x + np.array([1e-7, 1e-7])))
            except AmoebaError:
                pass
        if hv:
            holes.append(np.mean(hv, axis=0))
            notes.append(f"oval gradient spread {np.ptp(np.array(hv), axis=0).max():.2e}")
    return InjectivityReport(len(z), collisions, folds, len(grads), outside, holes, notes)


__all__ = [
    "AmoebaData", "AmoebaError", "PreimageRecord", "PreimageSet", "DeltaPolygon",
    "CriticalLocus", "HarnackReport", "InjectivityReport", "chi_map", "chi_array",
    "critical_locus", "chi_preimages", "rho_gradient", "rho_value", "rho_hessian",
    "rho_path_integral", "delta_polygon", "polygon_closed_form", "polygon_printed_formula",
    "far_field_gradient", "area_report", "membership_raster", "ma_mass", "harnack_classify",
    "injectivity_test", "gl2_transform", "translation_offset", "tentacles", "curve_from_json",
    "column_intervals", "default_window",
]
