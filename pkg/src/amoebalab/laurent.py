"""Laurent polynomials in two variables, Newton polygons, fibers and the
logarithmic Gauss map."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .config import DEFAULT, Tolerances
from .numerics import Polygon2D, convex_hull, poly_roots

_INT32 = 2**31


class LaurentError(ValueError):
    pass


class LaurentPolynomial:
    """Finite sum ``sum c[i, j] z1**i z2**j`` with integer exponents."""

    def __init__(self, terms: Mapping):
        clean = {}
        for (i, j), c in terms.items():
            i, j, c = int(i), int(j), complex(c)
            if abs(i) >= _INT32 or abs(j) >= _INT32:
                raise LaurentError("exponent does not fit in 32 bits")
            if c != 0:
                clean[(i, j)] = clean.get((i, j), 0) + c
        clean = {k: v for k, v in clean.items() if v != 0}
        if not clean:
            raise LaurentError("zero polynomial")
        self.terms = dict(sorted(clean.items()))

    def __repr__(self):
        return f"LaurentPolynomial({self.terms!r})"

    def __eq__(self, other):
        return isinstance(other, LaurentPolynomial) and self.terms == other.terms

    def __hash__(self):
        return hash(tuple(self.terms.items()))

    def __mul__(self, other):
        if not isinstance(other, LaurentPolynomial):
            return LaurentPolynomial({k: v * complex(other) for k, v in self.terms.items()})
        out: dict = {}
        for (i, j), a in self.terms.items():
            for (k, l), b in other.terms.items():
                out[(i + k, j + l)] = out.get((i + k, j + l), 0) + a * b
        return LaurentPolynomial(out)

    __rmul__ = __mul__

    @property
    def exponents(self) -> np.ndarray:
        return np.array(list(self.terms), dtype=int)

    @property
    def coefficients(self) -> np.ndarray:
        return np.array(list(self.terms.values()), dtype=complex)

    def shifted(self, a: int, b: int) -> "LaurentPolynomial":
        """Multiply by ``z1**a z2**b``."""
        return LaurentPolynomial({(i + a, j + b): c for (i, j), c in self.terms.items()})

    def swapped(self) -> "LaurentPolynomial":
        return LaurentPolynomial({(j, i): c for (i, j), c in self.terms.items()})

    def __call__(self, z1, z2):
        e = self.exponents
        z1, z2 = np.asarray(z1, dtype=complex), np.asarray(z2, dtype=complex)
        out = np.zeros(np.broadcast(z1, z2).shape, dtype=complex)
        for (i, j), c in zip(e, self.coefficients):
            out = out + c * z1**i * z2**j
        return out

    def log_partials(self, z1, z2):
        """``(z1 df/dz1, z2 df/dz2)`` at the given point."""
        e = self.exponents
        c = self.coefficients
        mono = c * np.asarray(z1, dtype=complex) ** e[:, 0] * np.asarray(z2, dtype=complex) ** e[:, 1]
        return complex(np.dot(e[:, 0], mono)), complex(np.dot(e[:, 1], mono))

    def term_magnitude(self, z1, z2) -> float:
        e = self.exponents
        return float(np.max(np.abs(self.coefficients) * abs(z1) ** e[:, 0] * abs(z2) ** e[:, 1]))

    def z2_span(self) -> tuple[int, int]:
        j = self.exponents[:, 1]
        return int(j.min()), int(j.max())

    def z2_coefficients(self, z1: complex) -> np.ndarray:
        """Coefficients of ``f(z1, .)`` in ascending powers after clearing ``z2**jmin``."""
        jmin, jmax = self.z2_span()
        out = np.zeros(jmax - jmin + 1, dtype=complex)
        for (i, j), c in self.terms.items():
            out[j - jmin] += c * z1**i
        return out

    # -- parsing -------------------------------------------------------------

    @classmethod
    def from_text(cls, text: str) -> "LaurentPolynomial":
        """Parse lines ``c : i j`` (``#`` starts a comment)."""
        terms: dict = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            m = re.fullmatch(r"(.+?)\s*:\s*(-?\d+)\s+(-?\d+)", line)
            if not m:
                raise LaurentError(f"line {lineno}: expected 'c : i j', got {raw!r}")
            try:
                c = complex(m.group(1).replace(" ", "").replace("i", "j"))
            except ValueError as exc:
                raise LaurentError(f"line {lineno}: bad coefficient {m.group(1)!r}") from exc
            key = (int(m.group(2)), int(m.group(3)))
            terms[key] = terms.get(key, 0) + c
        return cls(terms)

    @classmethod
    def from_json(cls, obj) -> "LaurentPolynomial":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            items = obj["terms"]
            terms: dict = {}
            for t in items:
                key = (int(t["i"]), int(t["j"]))
                terms[key] = terms.get(key, 0) + complex(float(t.get("re", 0.0)), float(t.get("im", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise LaurentError(f"malformed polynomial JSON: {exc}") from exc
        return cls(terms)

    def to_json(self) -> dict:
        return {"terms": [{"i": i, "j": j, "re": c.real, "im": c.imag}
                          for (i, j), c in self.terms.items()]}


def newton_polygon(f: LaurentPolynomial) -> Polygon2D:
    return convex_hull(f.exponents.astype(float))


@dataclass
class FiberRoots:
    roots: np.ndarray  # nonzero finite roots in z2
    zero_multiplicity: int
    infinite_multiplicity: int  # degree lost to a vanishing leading coefficient
    leading: complex  # leading coefficient of the cleared polynomial
    shift: int  # minimal z2 exponent that was cleared


def fiber_roots(f: LaurentPolynomial, x1: float, theta1: float,
                tol: Tolerances = DEFAULT) -> FiberRoots:
    jmin, jmax = f.z2_span()
    if jmin == jmax:
        raise LaurentError("f does not depend on z2")
    z1 = np.exp(x1 + 1j * theta1)
    c = f.z2_coefficients(z1)
    scale = np.max(np.abs(c))
    cut = 64 * np.finfo(float).eps * max(scale, 1e-300)
    nz = np.nonzero(np.abs(c) > cut)[0]
    if nz.size == 0:
        raise LaurentError("fiber degenerate: f(z1, .) vanishes identically")
    lo, hi = int(nz[0]), int(nz[-1])
    core = c[lo:hi + 1]
    roots = poly_roots(core, tol) if hi > lo else np.zeros(0, dtype=complex)
    return FiberRoots(np.asarray(roots), lo, len(c) - 1 - hi, complex(c[hi]), jmin)


def log_gauss_R(f: LaurentPolynomial, p, tol: Tolerances = DEFAULT) -> complex:
    """``R = -(z2 df/dz2) / (z1 df/dz1)``, the ratio ``dlog z1 / dlog z2`` on the curve."""
    z1, z2 = complex(p[0]), complex(p[1])
    scale = f.term_magnitude(z1, z2)
    if abs(complex(f(z1, z2))) > tol.on_curve * max(scale, 1e-300):
        raise LaurentError("point is not on the curve")
    d1, d2 = f.log_partials(z1, z2)
    small = 1e-12 * scale
    if abs(d1) <= small and abs(d2) <= small:
        raise LaurentError("singular point of log-Gauss map")
    if abs(d1) <= small:
        raise LaurentError("log-Gauss map has a pole here (z1 df/dz1 = 0)")
    return -d2 / d1
