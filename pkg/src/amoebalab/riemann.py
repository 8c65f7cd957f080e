"""Punctured curves of genus 0 and 1 and imaginary-normalized differentials
of the third kind.

Genus 0 is the Riemann sphere with coordinate ``z`` (the point at infinity is
``INF``).  Genus 1 is ``C / (Z + tau Z)``; its differentials are built from
the Weierstrass zeta function of that lattice.

The real part of the abelian integral, ``x(p) = Re int_{base}^p dzeta``, is
single-valued; every differential fixes its base point at construction, so
``x(base) = 0``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .config import DEFAULT, Tolerances
from .numerics import poly_roots

INF = complex("inf")
TWO_PI = 2 * math.pi


class CurveError(ValueError):
    pass


def is_inf(p) -> bool:
    return p is None or cmath.isinf(complex(p))


# ---------------------------------------------------------------------------
# Weierstrass functions of the lattice Z + tau Z


class Lattice:
    """Weierstrass zeta/sigma for periods ``1`` and ``tau`` via Jacobi theta_1.

    With ``q = exp(i pi tau)``:
    ``sigma(w) = exp(eta1 w^2 / 2) theta1(pi w) / (pi theta1'(0))`` and
    ``zeta(w) = eta1 w + pi theta1'(pi w) / theta1(pi w)``, where ``eta1`` is
    the quasi-period for the shift ``w -> w + 1``, computed from the weight-2
    Eisenstein series ``eta1 = pi^2 E2(tau) / 3``.
    """

    def __init__(self, tau: complex, tol: Tolerances = DEFAULT):
        tau = complex(tau)
        if tau.imag <= 0:
            raise CurveError("lattice parameter needs Im tau > 0")
        self.tau = tau
        self.T = tau.imag
        self.q = cmath.exp(1j * math.pi * tau)
        # series radius: enough for |Im w| <= Im tau (arguments are reduced first)
        n = 1
        while math.pi * self.T * ((n + 0.5) ** 2 - (2 * n + 1)) < 40:
            n += 1
        self.nterms = n + 2
        k = np.arange(self.nterms)
        self._odd = 2 * k + 1
        self._w = 2 * (-1.0) ** k * np.exp(1j * math.pi * tau * (k + 0.5) ** 2)
        self._wl = [complex(v) for v in self._w]
        self._ol = [int(v) for v in self._odd]
        self.theta1_prime0 = complex(np.sum(self._w * self._odd))
        self.eta1 = self._eta1_eisenstein()
        self.eta2 = tau * self.eta1 - 2j * math.pi
        # independent check of eta1 from theta1'''(0)
        t3 = -complex(np.sum(self._w * self._odd**3))
        eta1_theta = -math.pi**2 * t3 / (3 * self.theta1_prime0)
        self.legendre_error = abs(eta1_theta - self.eta1) * abs(tau)
        if self.legendre_error > 1e3 * tol.legendre:
            raise CurveError(f"Weierstrass constants inconsistent ({self.legendre_error:.1e})")
        self._log_norm = cmath.log(math.pi * self.theta1_prime0)

    def _eta1_eisenstein(self) -> complex:
        q2 = self.q * self.q
        total, n, qn = 0j, 1, q2
        while True:
            term = n * qn / (1 - qn)
            total += term
            if abs(term) < 1e-18 * (1 + abs(total)) and n > 2:
                break
            n += 1
            qn *= q2
            if n > 10000:
                raise CurveError("Eisenstein series did not converge")
        return math.pi**2 / 3 * (1 - 24 * total)

    # -- reduction -----------------------------------------------------------

    def reduce(self, w: complex) -> tuple[complex, int, int]:
        """``w = w_red + n + m tau`` with ``w_red`` in the centered cell."""
        m = round(w.imag / self.T)
        w = w - m * self.tau
        n = round(w.real)
        return w - n, n, m

    def reduce_array(self, w: np.ndarray):
        m = np.round(w.imag / self.T)
        w = w - m * self.tau
        n = np.round(w.real)
        return w - n, n, m

    def eta(self, n, m):
        return n * self.eta1 + m * self.eta2

    # -- scalar kernels (hot path of curve tracing) --------------------------

    def _theta_ratio(self, u: complex):
        """``theta1(u)``, ``theta1'(u)`` as a pair."""
        t = 0j
        d = 0j
        for c, o in zip(self._wl, self._ol):
            t += c * cmath.sin(o * u)
            d += c * o * cmath.cos(o * u)
        return t, d

    def zeta(self, w: complex) -> complex:
        wr, n, m = self.reduce(w)
        t, d = self._theta_ratio(math.pi * wr)
        return self.eta1 * wr + math.pi * d / t + self.eta(n, m)

    def log_sigma_reduced(self, wr: complex) -> complex:
        t, _ = self._theta_ratio(math.pi * wr)
        return 0.5 * self.eta1 * wr * wr + cmath.log(t) - self._log_norm

    def log_abs_sigma(self, w: complex) -> float:
        wr, n, m = self.reduce(w)
        om = n + m * self.tau
        return self.log_sigma_reduced(wr).real + (self.eta(n, m) * (wr + 0.5 * om)).real

    def log_sigma_diff(self, wa: complex, wb: complex) -> complex:
        """``log sigma(wb) - log sigma(wa)`` along the short segment ``wa -> wb``."""
        wr, n, m = self.reduce(wa)
        shift = wa - wr
        wbr = wb - shift
        ta, _ = self._theta_ratio(math.pi * wr)
        tb, _ = self._theta_ratio(math.pi * wbr)
        return (0.5 * self.eta1 * (wbr * wbr - wr * wr) + cmath.log(tb / ta)
                + self.eta(n, m) * (wb - wa))

    def wp(self, w: complex) -> complex:
        """Weierstrass ``P = -zeta'``."""
        wr, _, _ = self.reduce(w)
        u = math.pi * wr
        t = d = dd = 0j
        for c, o in zip(self._wl, self._ol):
            sn = cmath.sin(o * u)
            t += c * sn
            d += c * o * cmath.cos(o * u)
            dd -= c * o * o * sn
        return -self.eta1 - math.pi**2 * (dd / t - (d / t) ** 2)

    # -- vectorized -----------------------------------------------------------

    def _theta_arrays(self, u: np.ndarray):
        ou = np.multiply.outer(u, self._odd)
        return np.sin(ou) @ self._w, np.cos(ou) @ (self._w * self._odd)

    def zeta_array(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        wr, n, m = self.reduce_array(w)
        t, d = self._theta_arrays(math.pi * wr)
        return self.eta1 * wr + math.pi * d / t + self.eta(n, m)

    def log_sigma_diff_array(self, wa, wb) -> np.ndarray:
        wr, n, m = self.reduce_array(np.asarray(wa, dtype=complex))
        shift = wa - wr
        wbr = wb - shift
        ta, _ = self._theta_arrays(math.pi * wr)
        tb, _ = self._theta_arrays(math.pi * wbr)
        return (0.5 * self.eta1 * (wbr * wbr - wr * wr) + np.log(tb / ta)
                + self.eta(n, m) * (wb - wa))

    def log_abs_sigma_array(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        wr, n, m = self.reduce_array(w)
        t, _ = self._theta_arrays(math.pi * wr)
        om = n + m * self.tau
        return ((0.5 * self.eta1 * wr * wr).real + np.log(np.abs(t)) - self._log_norm.real
                + (self.eta(n, m) * (wr + 0.5 * om)).real)


# ---------------------------------------------------------------------------
# curves and residues


@dataclass(frozen=True)
class PuncturedCurve:
    genus: int
    punctures: tuple
    tau: complex = 1j
    m_curve: bool = False

    def __post_init__(self):
        if self.genus not in (0, 1):
            raise CurveError("unsupported genus")
        pts = tuple(INF if is_inf(p) else complex(p) for p in self.punctures)
        object.__setattr__(self, "punctures", pts)
        object.__setattr__(self, "tau", complex(self.tau))
        if self.genus == 1:
            if self.tau.imag <= 0:
                raise CurveError("Im tau must be positive")
            if any(is_inf(p) for p in pts):
                raise CurveError("genus-1 punctures must be finite")
        for i in range(len(pts)):
            for j in range(i):
                if self.same_point(pts[i], pts[j]):
                    raise CurveError("punctures must be distinct")
        if self.m_curve:
            if self.genus == 1 and abs(self.tau.real) > 1e-14:
                raise CurveError("m_curve requires a rectangular lattice")
            for p in pts:
                if self.oval_index(p) is None:
                    raise CurveError(f"m_curve puncture {p} is not on a fixed oval")

    @property
    def n(self) -> int:
        return len(self.punctures)

    def same_point(self, a: complex, b: complex, eps: float = 1e-12) -> bool:
        if is_inf(a) or is_inf(b):
            return is_inf(a) and is_inf(b)
        if self.genus == 0:
            return abs(a - b) <= eps
        return abs(self.lattice.reduce(a - b)[0]) <= eps

    @cached_property
    def lattice(self) -> Lattice:
        if self.genus != 1:
            raise CurveError("genus-0 curves have no lattice")
        return Lattice(self.tau)

    def oval_index(self, p: complex, eps: float = 1e-9):
        """Index of the fixed oval of ``z -> conj(z)`` containing ``p``, else None."""
        if is_inf(p):
            return 0 if self.genus == 0 else None
        if self.genus == 0:
            return 0 if abs(p.imag) <= eps else None
        frac = (p.imag / self.T) % 1.0
        if min(frac, 1 - frac) * self.T <= eps:
            return 0
        if abs(frac - 0.5) * self.T <= eps:
            return 1
        return None

    @property
    def T(self) -> float:
        return self.tau.imag

    def oval_position(self, p: complex) -> float:
        """Parameter along the oval (real line / circle of length 1), used for cyclic order."""
        if is_inf(p):
            return math.inf
        return p.real if self.genus == 0 else p.real % 1.0

    def distance_to_punctures(self, z: complex) -> float:
        best = math.inf
        for p in self.punctures:
            if is_inf(p):
                continue
            d = z - p
            if self.genus == 1:
                d = self.lattice.reduce(d)[0]
            best = min(best, abs(d))
        return best

    def default_base_point(self) -> complex:
        if self.genus == 0:
            finite = [abs(p) for p in self.punctures if not is_inf(p)]
            b = complex(2 * max(finite)) if finite and max(finite) > 0 else 1 + 0j
            if self.distance_to_punctures(b) < 1e-3:
                b += 0.5
            return b
        b = 0.5 + 0.5 * self.tau
        step = 0
        while self.distance_to_punctures(b) < 0.05:
            step += 1
            b = 0.5 + 0.5 * self.tau + 0.0731 * step * (1 + 0.37j)
        return b


@dataclass(frozen=True)
class ResidueVector:
    a: tuple

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))

    def check(self, n: int, tol: Tolerances = DEFAULT):
        if len(self.a) != n:
            raise CurveError(f"need {n} residues, got {len(self.a)}")
        if abs(sum(self.a)) > tol.residue_sum * max(1.0, max(abs(v) for v in self.a)) * n:
            raise CurveError("residues must sum to zero")


# ---------------------------------------------------------------------------
# differentials


class INDifferential:
    """Imaginary-normalized third-kind differential ``f(z) dz``.

    Genus 0: ``f(z) = sum a / (z - p)`` over finite punctures (the residue at
    infinity is implied).  Genus 1: ``f(z) = sum a zeta(z - p) + c`` with the
    complex constant ``c`` fixed by requiring real parts of both lattice
    periods to vanish.
    """

    def __init__(self, curve: PuncturedCurve, residues, base_point=None,
                 tol: Tolerances = DEFAULT, verify: bool = True):
        if not isinstance(residues, ResidueVector):
            residues = ResidueVector(tuple(residues))
        if curve.n < 2:
            raise CurveError("need at least two punctures")
        residues.check(curve.n, tol)
        self.curve = curve
        self.residues = residues
        self.tol = tol
        pts, a = curve.punctures, residues.a
        self._terms = [(complex(p), float(r)) for p, r in zip(pts, a) if not is_inf(p) and r != 0]
        self._p = np.array([p for p, _ in self._terms], dtype=complex)
        self._a = np.array([r for _, r in self._terms], dtype=float)
        self.c = 0j
        if curve.genus == 1:
            self.c = self._solve_constant()
        self.base = complex(base_point) if base_point is not None else curve.default_base_point()
        self._x_base = 0.0
        self._x_base = self._x_raw(self.base)
        if verify and curve.genus == 1:
            per = self.periods()
            if max(abs(per[0].real), abs(per[1].real)) > tol.period_real:
                raise CurveError(f"period normalization failed: {per}")

    # -- construction --------------------------------------------------------

    def _solve_constant(self) -> complex:
        lat = self.curve.lattice
        S = complex(np.dot(self._a, self._p)) if len(self._p) else 0j
        # Re A-period = Re(c - eta1 S) = 0,  Re B-period = Re(c tau - eta2 S) = 0
        tau = lat.tau
        M = np.array([[1.0, 0.0], [tau.real, -tau.imag]])
        rhs = np.array([(lat.eta1 * S).real, (lat.eta2 * S).real])
        if abs(np.linalg.det(M)) < 1e-14:
            raise CurveError("degenerate lattice: normalization system is singular")
        cr, ci = np.linalg.solve(M, rhs)
        return complex(cr, ci)

    # -- evaluation ------------------------------------------------------------

    def density(self, z: complex) -> complex:
        if self.curve.genus == 0:
            s = 0j
            for p, a in self._terms:
                s += a / (z - p)
            return s
        lat = self.curve.lattice
        s = self.c
        for p, a in self._terms:
            s += a * lat.zeta(z - p)
        return s

    def density_array(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.curve.genus == 0:
            return np.sum(self._a / (z[..., None] - self._p), axis=-1)
        lat = self.curve.lattice
        out = np.full(z.shape, self.c, dtype=complex)
        for p, a in self._terms:
            out += a * lat.zeta_array(z - p)
        return out

    def density_w(self, w: complex) -> complex:
        """Density in the chart ``w = 1/z`` at infinity (genus 0)."""
        if w == 0:
            if abs(sum(a for _, a in self._terms)) > 0:
                raise CurveError("pole")
            return 0j
        z = 1.0 / w
        return -self.density(z) / (w * w)

    def derivative(self, z: complex) -> complex:
        if self.curve.genus == 0:
            s = 0j
            for p, a in self._terms:
                s -= a / (z - p) ** 2
            return s
        lat = self.curve.lattice
        return -sum(a * lat.wp(z - p) for p, a in self._terms)

    def primitive_diff(self, za: complex, zb: complex) -> complex:
        """``int_{za}^{zb} dzeta`` along the (short) straight segment."""
        if self.curve.genus == 0:
            s = 0j
            for p, a in self._terms:
                s += a * cmath.log((zb - p) / (za - p))
            return s
        lat = self.curve.lattice
        s = self.c * (zb - za)
        for p, a in self._terms:
            s += a * lat.log_sigma_diff(za - p, zb - p)
        return s

    def primitive_diff_array(self, za, zb) -> np.ndarray:
        za = np.asarray(za, dtype=complex)
        zb = np.asarray(zb, dtype=complex)
        if self.curve.genus == 0:
            out = np.zeros(np.broadcast(za, zb).shape, dtype=complex)
            for p, a in self._terms:
                out = out + a * np.log((zb - p) / (za - p))
            return out
        lat = self.curve.lattice
        out = self.c * (zb - za)
        for p, a in self._terms:
            out = out + a * lat.log_sigma_diff_array(za - p, zb - p)
        return out

    def pole_distance_array(self, z) -> np.ndarray:
        """Distance from ``z`` to the nearest pole of this differential."""
        z = np.asarray(z, dtype=complex)
        out = np.full(z.shape, np.inf)
        for p, _ in self._terms:
            d = z - p
            if self.curve.genus == 1:
                d = self.curve.lattice.reduce_array(d)[0]
            out = np.minimum(out, np.abs(d))
        return out

    def local_coordinate(self, k: int, z):
        """Chart coordinate ``t`` at puncture ``k``: ``z - p`` (reduced) or ``1/z`` at infinity."""
        p = self.curve.punctures[k]
        z = np.asarray(z, dtype=complex)
        if is_inf(p):
            return 1.0 / z
        t = z - p
        if self.curve.genus == 1:
            t = self.curve.lattice.reduce_array(t)[0]
        return t

    def from_local(self, k: int, t):
        p = self.curve.punctures[k]
        t = np.asarray(t, dtype=complex)
        return 1.0 / t if is_inf(p) else p + t

    def local_regular(self, k: int, t) -> np.ndarray:
        """``zeta - a_k log t`` in the chart at puncture ``k``, normalized to vanish at ``t = 0``.

        Evaluated from ``t`` directly, so it stays exact for tiny ``t``."""
        p = self.curve.punctures[k]
        t = np.asarray(t, dtype=complex)
        out = np.zeros(t.shape, dtype=complex)
        if is_inf(p):
            for q, b in self._terms:
                out = out + b * np.log1p(-q * t)
            return out
        if self.curve.genus == 0:
            for q, b in self._terms:
                if q != p:
                    out = out + b * np.log1p(t / (p - q))
            return out
        lat = self.curve.lattice
        out = out + self.c * t
        for q, b in self._terms:
            if q == p:
                out = out + b * _log_sigma_ratio_array(lat, t)
            else:
                out = out + b * lat.log_sigma_diff_array(np.full(t.shape, p - q), p - q + t)
        return out

    def local_regular_deriv(self, k: int, t) -> np.ndarray:
        p = self.curve.punctures[k]
        t = np.asarray(t, dtype=complex)
        out = np.zeros(t.shape, dtype=complex)
        if is_inf(p):
            for q, b in self._terms:
                out = out - b * q / (1 - q * t)
            return out
        if self.curve.genus == 0:
            for q, b in self._terms:
                if q != p:
                    out = out + b / (p + t - q)
            return out
        lat = self.curve.lattice
        out = out + self.c
        for q, b in self._terms:
            if q == p:
                safe = np.where(t == 0, 1e-300, t)
                out = out + b * np.where(t == 0, 0, lat.zeta_array(safe) - 1.0 / safe)
            else:
                out = out + b * lat.zeta_array(p - q + t)
        return out

    def local_primitive(self, k: int, z: complex) -> complex:
        """``zeta(z)`` in the branch normalized at puncture ``k``: ``a log t`` plus the
        regular part vanishing at the puncture.  Valid near the puncture."""
        a = self.residues.a[k]
        t = complex(self.local_coordinate(k, z))
        reg = complex(self.local_regular(k, np.array([t]))[0])
        return (a * cmath.log(t) if a != 0 else 0j) + reg

    def _x_raw(self, z: complex) -> float:
        if self.curve.genus == 0:
            s = 0.0
            for p, a in self._terms:
                s += a * math.log(abs(z - p))
            return s - self._x_base
        lat = self.curve.lattice
        s = (self.c * z).real
        for p, a in self._terms:
            s += a * lat.log_abs_sigma(z - p)
        return s - self._x_base

    def x_harmonic(self, p: complex) -> float:
        if self.curve.distance_to_punctures(complex(p)) <= self.tol.pole_distance:
            raise CurveError("pole")
        if is_inf(p):
            raise CurveError("pole")
        return self._x_raw(complex(p))

    def x_array(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.curve.genus == 0:
            return np.sum(self._a * np.log(np.abs(z[..., None] - self._p)), axis=-1) - self._x_base
        lat = self.curve.lattice
        out = (self.c * z).real
        for p, a in self._terms:
            out = out + a * lat.log_abs_sigma_array(z - p)
        return out - self._x_base

    def regular_part(self, k: int) -> float:
        """``lim (x(z) - a_k log|t|)`` at puncture ``k``; ``t = z - p`` or ``1/z`` at infinity."""
        p = self.curve.punctures[k]
        if is_inf(p):
            return -self._x_base
        if self.curve.genus == 0:
            s = 0.0
            for q, b in self._terms:
                if q != p:
                    s += b * math.log(abs(p - q))
            return s - self._x_base
        lat = self.curve.lattice
        s = (self.c * p).real
        for q, b in self._terms:
            if q != p:
                s += b * lat.log_abs_sigma(p - q)
        return s - self._x_base

    # -- periods -------------------------------------------------------------

    def _cycle_integral(self, start: complex, vec: complex, nodes: int = 512) -> complex:
        """Trapezoid rule for ``int_start^{start+vec} dzeta`` (periodic integrand)."""
        t = np.arange(nodes) / nodes
        return complex(np.mean(self.density_array(start + t * vec)) * vec)

    def _cycle_start(self, vec: complex) -> complex:
        """A start point whose translate by ``vec`` stays far from the punctures."""
        lat = self.curve.lattice
        other = lat.tau if vec == 1 else 1.0
        best, best_d = 0j, -1.0
        for s in np.linspace(0, 1, 64, endpoint=False):
            z0 = s * other
            t = np.linspace(0, 1, 64)
            d = min(self.curve.distance_to_punctures(z0 + x * vec) for x in t)
            if d > best_d:
                best, best_d = z0, d
        return best

    def periods(self, nodes: int = 1024) -> tuple[complex, complex]:
        """Numerically integrated periods along ``[z0, z0+1]`` and ``[z0, z0+tau]``."""
        if self.curve.genus != 1:
            return ()
        a = self._cycle_integral(self._cycle_start(1.0), 1.0, nodes)
        b = self._cycle_integral(self._cycle_start(self.curve.tau), self.curve.tau, nodes)
        return a, b

    def residue_numeric(self, k: int, radius: float = 1e-3, nodes: int = 256) -> complex:
        p = self.curve.punctures[k]
        t = 2 * np.pi * np.arange(nodes) / nodes
        if is_inf(p):
            R = 1.0 / radius * (1 + max([abs(q) for q in self._p], default=0))
            z = R * np.exp(-1j * t)  # clockwise around infinity
            dz = -1j * z
        else:
            z = p + radius * np.exp(1j * t)
            dz = 1j * (z - p)
        return complex(np.mean(self.density_array(z) * dz) / 1j)

    # -- linear structure ----------------------------------------------------

    def combine(self, alpha: float, other: "INDifferential", beta: float) -> "INDifferential":
        a = np.array(self.residues.a) * alpha + np.array(other.residues.a) * beta
        return INDifferential(self.curve, ResidueVector(tuple(a)), self.base, self.tol)


def _log_sigma_ratio_small(lat: Lattice, w: complex) -> complex:
    """``log(sigma(w) / w)`` for small ``w``."""
    if w == 0:
        return 0j
    t, _ = lat._theta_ratio(math.pi * w)
    return 0.5 * lat.eta1 * w * w + cmath.log(t / (math.pi * lat.theta1_prime0 * w))


def _log_sigma_ratio_array(lat: Lattice, w) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    safe = np.where(w == 0, 1.0, w)
    t, _ = lat._theta_arrays(math.pi * safe)
    val = 0.5 * lat.eta1 * safe * safe + np.log(t / (math.pi * lat.theta1_prime0 * safe))
    return np.where(w == 0, 0, val)


def build_in_differential(curve: PuncturedCurve, residues, tol: Tolerances = DEFAULT,
                          base_point=None) -> INDifferential:
    return INDifferential(curve, residues, base_point=base_point, tol=tol)


def x_harmonic(dz: INDifferential, p) -> float:
    return dz.x_harmonic(p)


def y_conjugate(dz: INDifferential, path: Sequence[complex], tol: Tolerances = DEFAULT) -> float:
    """``Im int_path dzeta`` along a polyline, subdividing so every piece is short
    relative to its distance from the punctures."""
    pts = [complex(p) for p in path]
    for z in pts:
        if dz.curve.distance_to_punctures(z) < tol.path_clearance:
            raise CurveError("path too close to a puncture")
    total = 0j
    for a, b in zip(pts, pts[1:]):
        total += _segment_integral(dz, a, b, tol)
    return total.imag


def _segment_integral(dz: INDifferential, a: complex, b: complex, tol: Tolerances) -> complex:
    length = abs(b - a)
    if length == 0:
        return 0j
    # clearance of the segment from punctures
    n_probe = 32
    clear = min(dz.curve.distance_to_punctures(a + (b - a) * k / n_probe) for k in range(n_probe + 1))
    if clear < tol.path_clearance:
        raise CurveError("path too close to a puncture")
    pieces = max(1, int(math.ceil(4 * length / clear)))
    total = 0j
    for k in range(pieces):
        za = a + (b - a) * k / pieces
        zb = a + (b - a) * (k + 1) / pieces
        total += dz.primitive_diff(za, zb)
    return total


def R_ratio(dz1: INDifferential, dz2: INDifferential, p: complex) -> complex:
    f1, f2 = dz1.density(complex(p)), dz2.density(complex(p))
    scale = max(1.0, abs(f1), abs(f2))
    if abs(f2) <= 1e-14 * scale:
        if abs(f1) <= 1e-14 * scale:
            raise CurveError("common zero")
        raise CurveError("R has a pole here (second density vanishes)")
    return f1 / f2


# ---------------------------------------------------------------------------
# zeros


@dataclass
class ZeroSet:
    points: list  # complex (INF for zeros at infinity in genus 0)
    simple: list = field(default_factory=list)

    def __len__(self):
        return len(self.points)


def differential_zeros(dz: INDifferential, boxes: int = 16) -> ZeroSet:
    curve = dz.curve
    poles = sum(1 for a in dz.residues.a if a != 0)
    expected = 2 * curve.genus + poles - 2
    if curve.genus == 0:
        pts = _zeros_genus0(dz)
    else:
        pts = _zeros_genus1(dz, boxes)
    if len(pts) != expected:
        raise CurveError(f"zero search incomplete: found {len(pts)}, expected {expected}")
    simple = []
    for z in pts:
        if is_inf(z):
            simple.append(True)
            continue
        d = dz.derivative(z)
        simple.append(abs(d) > 1e-8 * (1 + abs(dz.density(z + 1e-3))))
    return ZeroSet(pts, simple)


def _zeros_genus0(dz: INDifferential) -> list:
    # numerator N(z) = sum_a a * prod_{b != a} (z - p_b) over finite poles
    fin = [p for p, _ in dz._terms]
    num = np.zeros(1, dtype=complex)
    for p, a in dz._terms:
        others = [q for q in fin if q != p]
        num = np.polyadd(num, a * np.poly(others) if others else np.array([a], dtype=complex))
    scale = max(abs(v) for v in dz.residues.a)
    num = np.atleast_1d(num)
    while len(num) and abs(num[0]) <= 1e-12 * scale:
        num = num[1:]
    deg = len(num) - 1
    pts = [complex(z) for z in poly_roots(num[::-1])] if deg >= 1 else []
    # f ~ z^(deg - nfin) at infinity and dz = -dw / w^2
    order_inf = len(fin) - deg - 2
    if order_inf > 0:
        pts.extend([INF] * order_inf)
    return pts


def _winding(dz: INDifferential, corners: list, per_edge: int = 48) -> float:
    total = 0.0
    for a, b in zip(corners, corners[1:] + corners[:1]):
        total += _edge_arg(dz, a, b, per_edge)
    return total / TWO_PI


def _edge_arg(dz, a, b, n, depth=0):
    z = a + (b - a) * np.linspace(0, 1, n + 1)
    f = dz.density_array(z)
    if np.any(np.abs(f) < 1e-10) or not np.all(np.isfinite(f)):
        raise _EdgeHit()
    d = np.angle(f[1:] / f[:-1])
    if np.max(np.abs(d)) > 0.5 and depth < 8:
        return sum(_edge_arg(dz, z[k], z[k + 1], 8, depth + 1) for k in range(n))
    return float(np.sum(d))


class _EdgeHit(Exception):
    pass


def _newton_zero(dz, z, maxit=60):
    for _ in range(maxit):
        f = dz.density(z)
        d = dz.derivative(z)
        if d == 0:
            return None
        step = f / d
        if abs(step) > 0.1:
            step *= 0.1 / abs(step)
        z -= step
        if abs(step) < 1e-15 * (1 + abs(z)):
            break
    return z if abs(dz.density(z)) < 1e-9 * (1 + abs(dz.derivative(z))) else None


def _zeros_genus1(dz: INDifferential, boxes: int) -> list:
    curve = dz.curve
    lat = curve.lattice
    tau = lat.tau
    for attempt in range(8):
        off = (0.0137 + 0.071 * attempt) * (1 + 0.61j) - 0.25 * tau
        found = []
        try:
            for i in range(boxes):
                for j in range(boxes):
                    found.extend(_box_zeros(dz, off, i / boxes, j / boxes, 1 / boxes, 0))
        except _EdgeHit:
            continue
        out = []
        for z in found:
            zr = lat.reduce(z)[0]
            if not any(curve.same_point(zr, w, 1e-7) for w in out):
                out.append(zr)
        return out
    raise CurveError("zero search incomplete: could not place box edges off the zeros")


def _in_box(rel: complex, tau: complex, s0, u0, h, margin) -> bool:
    u = rel.imag / tau.imag
    s = rel.real - u * tau.real
    return s0 - margin <= s <= s0 + h + margin and u0 - margin <= u <= u0 + h + margin


def _box_zeros(dz, off, s0, u0, h, depth):
    curve = dz.curve
    tau = curve.tau
    corner = lambda s, u: off + s + u * tau  # noqa: E731
    corners = [corner(s0, u0), corner(s0 + h, u0), corner(s0 + h, u0 + h), corner(s0, u0 + h)]
    w = _winding(dz, corners)
    poles = 0
    for p in curve.punctures:
        # lattice coordinates of p relative to the box
        rel = p - off
        u = rel.imag / tau.imag
        s = rel.real - u * tau.real
        u, s = u - math.floor(u), s - math.floor(s)
        if s0 <= s < s0 + h and u0 <= u < u0 + h:
            poles += 1
    zeros = int(round(w)) + poles
    if zeros <= 0:
        return []
    if zeros == 1 or depth >= 4:
        z = _newton_zero(dz, corner(s0 + h / 2, u0 + h / 2))
        # Newton may wander to a zero of a neighbouring box; accept only our own
        if z is not None and _in_box(z - off, tau, s0, u0, h, 0.02 * h):
            return [z] * zeros if zeros > 1 else [z]
        if depth >= 10:
            return []
    out = []
    for di in (0, 1):
        for dj in (0, 1):
            out.extend(_box_zeros(dz, off, s0 + di * h / 2, u0 + dj * h / 2, h / 2, depth + 1))
    return out
