"""Genus-1 theta functions, the discrete Baker-Akhiezer function and the
coefficients of the associated two-dimensional difference operator.

Everything lives on the torus ``C / (Z + B Z)``: the Abel map is ``A(p) = p - p3``
and the normalized third-kind integrals are odd-theta log-ratios,

    exp(Omega_1(p)) = K1 theta_odd(p - p1) / theta_odd(p - p3),
    exp(Omega_2(p)) = K2 theta_odd(p - p2) / theta_odd(p - p3),

with ``K1, K2`` chosen so that ``exp(Omega_2) = 1`` at ``p1`` and ``exp(Omega_1) = -1``
at ``p2``.  With that normalization

    psi(m, n, p) = theta(A(p) + W) / theta(W) * exp(m Omega_1 + n Omega_2),  W = mU + nV + Z

solves ``psi(m, n+1) = psi(m+1, n) + u(m, n) psi(m, n)`` with ``u`` the tau-function
ratio.  Theta values are carried as logarithms so that large windows with a
complex period do not overflow.

The degenerate (genus-0) mode replaces theta by 1 and theta_odd by the identity.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, Tolerances


class BlochError(ValueError):
    pass


_HARD_CAP = 4000


@dataclass(frozen=True)
class ThetaParams:
    """``theta(z | B)`` for ``Im B > 0``.  ``cutoff`` is the series radius used
    after the argument has been reduced to ``|Im z| <= Im B / 2``."""

    B: complex
    cutoff: int = 0

    def __post_init__(self):
        B = complex(self.B)
        if not B.imag > 0:
            raise BlochError("theta parameter must satisfy Im B > 0")
        object.__setattr__(self, "B", B)
        if self.cutoff <= 0:
            # dropped terms below exp(-40) relative to the leading one
            beta = B.imag
            M = math.ceil(1.0 + math.sqrt(1.0 + 40.0 / (math.pi * beta)))
            if M > _HARD_CAP:
                raise BlochError("Im B too small: theta series cutoff past the hard cap")
            object.__setattr__(self, "cutoff", int(M))

    def reduce(self, z):
        """``z = z_red + j + k B`` with ``|Im z_red| <= Im B / 2`` and ``|Re z_red| <= 1/2``."""
        z = np.asarray(z, dtype=complex)
        k = np.round(z.imag / self.B.imag)
        w = z - k * self.B
        j = np.round(w.real)
        return w - j, j, k

    def log_theta(self, z):
        """``log theta(z | B)`` (principal branch of the reduced value plus the
        exact quasi-periodicity factor)."""
        z = np.asarray(z, dtype=complex)
        w, _, k = self.reduce(z)
        m = np.arange(-self.cutoff, self.cutoff + 1)
        ex = (2j * math.pi) * w[..., None] * m + (1j * math.pi * self.B) * (m * m)
        top = ex.real.max(axis=-1, keepdims=True)
        s = np.exp(ex - top).sum(axis=-1)
        base = np.log(s) + top[..., 0]
        # theta(w + kB) = exp(-2 pi i k w - pi i k^2 B) theta(w)
        return base - 2j * math.pi * k * w - 1j * math.pi * k * k * self.B

    def log_scale(self, z):
        """Log of the largest series term: the natural size of ``theta(z)``."""
        z = np.asarray(z, dtype=complex)
        w, _, k = self.reduce(z)
        m = np.arange(-self.cutoff, self.cutoff + 1)
        ex = (-2 * math.pi) * w.imag[..., None] * m - math.pi * self.B.imag * (m * m)
        return ex.max(axis=-1) + (2 * math.pi * k * w.imag + math.pi * k * k * self.B.imag)

    def theta(self, z):
        return np.exp(self.log_theta(z))

    def log_theta_odd(self, z):
        """``log theta[1/2, 1/2](z)``, the odd theta with zeros on the lattice."""
        z = np.asarray(z, dtype=complex)
        return (1j * math.pi * self.B / 4 + 1j * math.pi * (z + 0.5)
                + self.log_theta(z + 0.5 + 0.5 * self.B))

    def theta_odd(self, z):
        return np.exp(self.log_theta_odd(z))

    def dlog_theta_odd(self, z, h: float = 1e-4):
        """Derivative of ``log theta_odd`` (complex-step free: 4-point stencil on the
        holomorphic function)."""
        z = np.asarray(z, dtype=complex)
        f = self.theta_odd
        d = (-f(z + 2 * h) + 8 * f(z + h) - 8 * f(z - h) + f(z - 2 * h)) / (12 * h)
        return d / f(z)


def theta_eval(params: ThetaParams, z) -> complex:
    return complex(params.theta(complex(z)))


def _as_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


@dataclass
class SpectralData:
    """Marked points, the shift ``Z`` and the tau-function constants."""

    theta: ThetaParams | None
    p: tuple
    Z: complex = 0j
    c1: complex = 1.0
    c2: complex = 1.0
    m_curve: bool = False
    tol: Tolerances = field(default=DEFAULT, repr=False)

    def __post_init__(self):
        if len(self.p) != 3:
            raise BlochError("exactly three marked points are required")
        self.p = tuple(complex(x) for x in self.p)
        self.Z = complex(self.Z)
        self.c1, self.c2 = complex(self.c1), complex(self.c2)
        if self.c1 == 0 or self.c2 == 0:
            raise BlochError("c1 and c2 must be nonzero")
        for i in range(3):
            for j in range(i + 1, 3):
                d = self.p[i] - self.p[j]
                if self.theta is not None:
                    d = complex(self.theta.reduce(d)[0])
                if abs(d) < 1e-12:
                    raise BlochError("marked points must be distinct modulo the lattice")
        if self.m_curve:
            if self.theta is not None and abs(self.theta.B.real) > 1e-14:
                raise BlochError("M-curve mode needs a purely imaginary B")
            if any(abs(x.imag) > 1e-14 for x in self.p) or abs(self.Z.imag) > 1e-14:
                raise BlochError("M-curve mode needs real marked points and real Z")
        p1, p2, p3 = self.p
        self.U = p1 - p3
        self.V = p2 - p3
        # normalization of the third-kind integrals
        self._logK1 = cmath.log(-1) + self._lto(p2 - p3) - self._lto(p2 - p1)
        self._logK2 = self._lto(p1 - p3) - self._lto(p1 - p2)

    @property
    def degenerate(self) -> bool:
        return self.theta is None

    @classmethod
    def from_json(cls, obj, tol: Tolerances = DEFAULT) -> "SpectralData":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            theta = None
            if not obj.get("degenerate", False):
                theta = ThetaParams(_as_complex(obj["B"]))
            return cls(theta, tuple(_as_complex(x) for x in obj["p"]), _as_complex(obj.get("Z", 0)),
                       _as_complex(obj.get("c1", 1)), _as_complex(obj.get("c2", 1)),
                       bool(obj.get("m_curve", False)), tol)
        except (KeyError, TypeError, IndexError) as exc:
            raise BlochError(f"malformed spectral data: {exc}") from exc

    # -- special functions ---------------------------------------------------

    def _lt(self, z):
        if self.theta is None:
            return np.zeros_like(np.asarray(z, dtype=complex))
        return self.theta.log_theta(z)

    def _lto(self, z):
        if self.theta is None:
            return np.log(np.asarray(z, dtype=complex))
        return self.theta.log_theta_odd(z)

    def abel(self, p):
        return np.asarray(p, dtype=complex) - self.p[2]

    def log_exp_omega(self, j: int, p):
        """``log exp(Omega_j(p))`` up to ``2 pi i`` (only its exponential enters ``psi``)."""
        p = np.asarray(p, dtype=complex)
        pj = self.p[j - 1]
        K = self._logK1 if j == 1 else self._logK2
        return K + self._lto(p - pj) - self._lto(p - self.p[2])

    def omega_density(self, j: int, p):
        """``dOmega_j / dp``."""
        p = np.asarray(p, dtype=complex)
        if self.theta is None:
            return 1 / (p - self.p[j - 1]) - 1 / (p - self.p[2])
        d = self.theta.dlog_theta_odd
        return d(p - self.p[j - 1]) - d(p - self.p[2])

    def W(self, m, n):
        return np.asarray(m) * self.U + np.asarray(n) * self.V + self.Z

    def log_theta_W(self, m, n):
        return self._lt(self.W(m, n))


def third_kind_omega(data: SpectralData, j: int, p, base=None, steps: int = 256) -> complex:
    """``Omega_j(p)`` continued along the straight path from ``base`` (default: the
    midpoint of the fundamental domain) to the reduced ``p``; B-periods add
    ``2 pi i (p_j - p_3)`` per lattice step."""
    p = complex(p)
    for q in (data.p[j - 1], data.p[2]):
        d = p - q
        if data.theta is not None:
            d = complex(data.theta.reduce(d)[0])
        if abs(d) < data.tol.pole_distance:
            raise BlochError("pole of the third-kind integral")
    shift = 0j
    if data.theta is not None:
        pr, _, k = data.theta.reduce(p - 0.5 - 0.5 * data.theta.B)
        pr = complex(pr) + 0.5 + 0.5 * data.theta.B
        shift = float(k) * 2j * math.pi * (data.p[j - 1] - data.p[2])
        start = base if base is not None else 0.5 + 0.5 * data.theta.B
    else:
        pr = p
        start = base if base is not None else 1j * (1 + max(abs(x) for x in data.p))
    t = np.linspace(0, 1, steps + 1)
    path = start + t * (pr - start)
    vals = data.log_exp_omega(j, path)
    im = np.unwrap(vals.imag)
    # anchor the branch: principal value at the start point
    return complex(vals.real[-1], im[-1]) + shift


def residue_check(data: SpectralData, j: int, at: int, radius: float = 1e-2, nodes: int = 256) -> complex:
    """``(1 / 2 pi i) oint dOmega_j`` around marked point ``at`` (1, 2 or 3)."""
    th = 2 * math.pi * np.arange(nodes) / nodes
    z = data.p[at - 1] + radius * np.exp(1j * th)
    dz = 1j * radius * np.exp(1j * th)
    return complex(np.mean(data.omega_density(j, z) * dz) * nodes / (2j * math.pi) * (2 * math.pi / nodes))


def log_tau(data: SpectralData, m, n):
    m, n = np.asarray(m), np.asarray(n)
    return m * cmath.log(data.c1) + n * cmath.log(data.c2) + data.log_theta_W(m, n)


def tau_eval(data: SpectralData, m: int, n: int) -> complex:
    return complex(np.exp(log_tau(data, m, n)))


def _check_nonsingular(data: SpectralData, m, n):
    if data.theta is None:
        return
    W = data.W(m, n)
    rel = np.real(data.theta.log_theta(W)) - data.theta.log_scale(W)
    if np.any(rel < math.log(data.tol.singular_coefficient)):
        raise BlochError("singular coefficient: tau vanishes in the window")


def log_u(data: SpectralData, m, n):
    m, n = np.asarray(m), np.asarray(n)
    _check_nonsingular(data, m + 1, n)
    _check_nonsingular(data, m, n + 1)
    L = data.log_theta_W
    return L(m + 1, n + 1) + L(m, n) - L(m + 1, n) - L(m, n + 1)


def u_coeff(data: SpectralData, m: int, n: int) -> complex:
    """``tau(m+1,n+1) tau(m,n) / (tau(m+1,n) tau(m,n+1))`` (independent of ``c1, c2``)."""
    return complex(np.exp(log_u(data, m, n)))


def u_window(data: SpectralData, m_range, n_range) -> np.ndarray:
    """``u`` over ``m in m_range, n in n_range`` (inclusive integer ranges), indexed ``[m, n]``."""
    ms = np.arange(m_range[0], m_range[1] + 1)
    ns = np.arange(n_range[0], n_range[1] + 1)
    M, N = np.meshgrid(ms, ns, indexing="ij")
    return np.exp(log_u(data, M, N))


def log_psi(data: SpectralData, m, n, p):
    m, n = np.asarray(m), np.asarray(n)
    p = np.asarray(p, dtype=complex)
    for q in data.p:
        d = p - q
        if data.theta is not None:
            d = data.theta.reduce(d)[0]
        if np.any(np.abs(d) < data.tol.pole_distance):
            raise BlochError("psi evaluated at a marked point")
    W = data.W(m, n)
    _check_nonsingular(data, m, n)
    return (data._lt(data.abel(p) + W) - data._lt(W)
            + m * data.log_exp_omega(1, p) + n * data.log_exp_omega(2, p))


def psi_eval(data: SpectralData, m: int, n: int, p) -> complex:
    return complex(np.exp(log_psi(data, m, n, p)))


def random_trial_points(data: SpectralData, count: int, seed: int = 0) -> np.ndarray:
    """Points of the fundamental domain (or a disc for the degenerate mode) kept
    away from the marked points."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        if data.theta is None:
            z = complex(*(rng.uniform(-2, 2, 2)))
            d = min(abs(z - q) for q in data.p)
        else:
            z = rng.uniform(0, 1) + rng.uniform(0, 1) * data.theta.B
            d = min(abs(complex(data.theta.reduce(z - q)[0])) for q in data.p)
        if d > 0.05:
            out.append(z)
    return np.array(out)


def verify_difference_equation(data: SpectralData, window=((0, 4), (0, 4)), trial_points=20,
                               seed: int = 0) -> float:
    """Max relative residual of ``psi(m,n+1) - psi(m+1,n) - u psi(m,n)``."""
    if np.isscalar(trial_points):
        trial_points = random_trial_points(data, int(trial_points), seed)
    ps = np.asarray(trial_points, dtype=complex)
    ms = np.arange(window[0][0], window[0][1] + 1)
    ns = np.arange(window[1][0], window[1][1] + 1)
    M, N, P = np.meshgrid(ms, ns, ps, indexing="ij")
    # scale out a common factor so every term stays O(1)
    l0 = log_psi(data, M, N, P)
    a = np.exp(log_psi(data, M, N + 1, P) - l0)
    b = np.exp(log_psi(data, M + 1, N, P) - l0)
    u = np.exp(log_u(data, M, N))
    res = np.abs(a - b - u)
    scale = np.maximum.reduce([np.abs(a), np.abs(b), np.abs(u)])
    return float(np.max(res / scale))


def verify_gauge_form(data: SpectralData, window=((0, 4), (0, 4)), trial_points=20,
                      seed: int = 0) -> float:
    """Max relative residual of
    ``tau(m+1,n) Psi(m,n+1) + tau(m,n+1) Psi(m+1,n) + tau(m+1,n+1) Psi(m,n)``
    with ``Psi(m,n) = (-1)^n tau(m,n) psi(m,n)``."""
    if np.isscalar(trial_points):
        trial_points = random_trial_points(data, int(trial_points), seed)
    ps = np.asarray(trial_points, dtype=complex)
    ms = np.arange(window[0][0], window[0][1] + 1)
    ns = np.arange(window[1][0], window[1][1] + 1)
    M, N, P = np.meshgrid(ms, ns, ps, indexing="ij")
    lt = lambda a, b: log_tau(data, a, b)  # noqa: E731
    lp = lambda a, b: log_psi(data, a, b, P)  # noqa: E731
    # log of each term without the (-1)^n sign of the row
    t1 = lt(M + 1, N) + lt(M, N + 1) + lp(M, N + 1)
    t2 = lt(M, N + 1) + lt(M + 1, N) + lp(M + 1, N)
    t3 = lt(M + 1, N + 1) + lt(M, N) + lp(M, N)
    ref = t3
    e1, e2, e3 = -np.exp(t1 - ref), np.exp(t2 - ref), np.exp(t3 - ref)
    res = np.abs(e1 + e2 + e3)
    scale = np.maximum.reduce([np.abs(e1), np.abs(e2), np.abs(e3)])
    return float(np.max(res / scale))


def gauge_coefficients(data: SpectralData, m_range, n_range) -> np.ndarray:
    """``(tau(m+1,n), tau(m,n+1), tau(m+1,n+1))`` per cell, normalized by the phase
    of the first entry and by a common positive scale; shape ``(nm, nn, 3)``."""
    ms = np.arange(m_range[0], m_range[1] + 1)
    ns = np.arange(n_range[0], n_range[1] + 1)
    M, N = np.meshgrid(ms, ns, indexing="ij")
    L = np.stack([log_tau(data, M + 1, N), log_tau(data, M, N + 1), log_tau(data, M + 1, N + 1)], axis=-1)
    ref = L.real.max(axis=-1, keepdims=True) + 1j * L[..., :1].imag
    return np.exp(L - ref)


@dataclass
class PositivityReport:
    nonsingular: bool
    positive: bool
    min_coeff: float
    real_tau: bool
    max_imag: float
    notes: list = field(default_factory=list)


def positivity_report(data: SpectralData, window=((0, 99), (0, 99))) -> PositivityReport:
    notes = []
    ms = np.arange(window[0][0], window[0][1] + 2)
    ns = np.arange(window[1][0], window[1][1] + 2)
    M, N = np.meshgrid(ms, ns, indexing="ij")
    nonsingular = True
    try:
        _check_nonsingular(data, M, N)
    except BlochError as exc:
        nonsingular = False
        notes.append(str(exc))
    T = log_tau(data, M, N)
    phase = np.angle(np.exp(1j * T.imag))
    real_tau = bool(np.all(np.minimum(np.abs(phase), np.abs(np.abs(phase) - math.pi)) < 1e-10))
    C = gauge_coefficients(data, window[0], window[1])
    max_imag = float(np.max(np.abs(C.imag) / np.abs(C)))
    positive = nonsingular and bool(np.all(C.real > 0)) and max_imag < 1e-10
    if not positive:
        notes.append("gauge coefficients are not all real positive")
    # smallest coefficient relative to the largest in its cell
    min_coeff = float(np.min(C.real / np.abs(C).max(axis=-1, keepdims=True)))
    if data.degenerate:
        min_coeff = float(np.min(np.abs(np.exp(np.stack(
            [log_tau(data, M[:-1, :-1] + 1, N[:-1, :-1]), log_tau(data, M[:-1, :-1], N[:-1, :-1] + 1),
             log_tau(data, M[:-1, :-1] + 1, N[:-1, :-1] + 1)], -1)))))
    return PositivityReport(nonsingular, positive, min_coeff, real_tau, max_imag, notes)


def check_d_periodicity(data: SpectralData, d: int, window=((0, 4), (0, 4))) -> float:
    """``max |u(m+d,n) - u(m,n)|, |u(m,n+d) - u(m,n)|`` when ``dU, dV`` are lattice vectors."""
    if data.theta is None:
        raise BlochError("periodicity check needs a genus-1 theta function")
    for vec in (d * data.U, d * data.V):
        w = complex(data.theta.reduce(vec)[0])
        if abs(w) > 1e-10:
            raise BlochError("d U and d V must be lattice vectors")
    u0 = u_window(data, window[0], window[1])
    u1 = u_window(data, (window[0][0] + d, window[0][1] + d), window[1])
    u2 = u_window(data, window[0], (window[1][0] + d, window[1][1] + d))
    return float(max(np.max(np.abs(u1 - u0)), np.max(np.abs(u2 - u0))))


__all__ = [
    "BlochError", "ThetaParams", "SpectralData", "PositivityReport", "theta_eval",
    "third_kind_omega", "residue_check", "tau_eval", "u_coeff", "u_window", "psi_eval",
    "log_psi", "log_tau", "verify_difference_equation", "verify_gauge_form",
    "gauge_coefficients", "positivity_report", "check_d_periodicity", "random_trial_points",
]
