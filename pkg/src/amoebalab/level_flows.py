"""Level sets of a harmonic coordinate ``x = Re zeta`` swept by gradient lines.

For an imaginary-normalized differential ``dzeta = f dz`` the gradient lines
of ``x`` are the level lines of ``y = Im zeta``.  Lines leaving a puncture with
positive residue ``a`` are labelled by ``s = y`` in ``[-pi a, pi a)``; every
regular level set ``{x = c}`` is swept exactly once by these lines, and ``s``
is the arclength measure ``dy`` along it.  Labels where a line runs into a
saddle (a zero of ``f``) become jumps of the sweep above the saddle level.

Points are stored either globally (``z``) or, close to a pole, in the chart
``t`` with ``u = log t``, so arbitrarily deep levels stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .riemann import INDifferential, differential_zeros, is_inf

TWO_PI = 2 * math.pi
_STEP = 0.3  # substep size relative to clearance
_NEWTON = 10


class FlowError(ArithmeticError):
    pass


@dataclass
class _Chart:
    k: int
    a: float  # residue of the level differential
    r: float  # switch radius in t
    h: float  # regular part of the level coordinate
    a_other: float
    h_other: float


class FlowState:
    """Arrays describing points on the curve: ``chart[i] < 0`` means global ``z[i]``."""

    __slots__ = ("z", "chart", "u")

    def __init__(self, z, chart, u):
        self.z = np.asarray(z, dtype=complex)
        self.chart = np.asarray(chart, dtype=int)
        self.u = np.asarray(u, dtype=complex)

    def __len__(self):
        return len(self.z)

    def take(self, idx) -> "FlowState":
        return FlowState(self.z[idx].copy(), self.chart[idx].copy(), self.u[idx].copy())

    def copy(self) -> "FlowState":
        return self.take(slice(None))

    @staticmethod
    def concat(states) -> "FlowState":
        return FlowState(np.concatenate([s.z for s in states]),
                         np.concatenate([s.chart for s in states]),
                         np.concatenate([s.u for s in states]))


class LevelFlows:
    """Sweep of the level sets of ``Re zeta_level`` with values of ``Re zeta_other``."""

    def __init__(self, level: INDifferential, other: INDifferential, nodes: int = 256):
        if level.curve is not other.curve and level.curve != other.curve:
            raise FlowError("differentials live on different curves")
        self.level, self.other = level, other
        self.curve = level.curve
        self.nodes = int(nodes)
        zs = differential_zeros(level)
        self.zeros = np.array([z for z in zs.points if not is_inf(z)], dtype=complex)
        a = level.residues.a
        self.charts: dict[int, _Chart] = {}
        for k, ak in enumerate(a):
            if ak != 0:
                self.charts[k] = _Chart(k, ak, self._switch_radius(k), level.regular_part(k),
                                        other.residues.a[k], other.regular_part(k))
        self.sources = [k for k in self.charts if a[k] > 0]
        self.labels = {}
        for k in self.sources:
            ak = a[k]
            j = np.arange(self.nodes)
            self.labels[k] = -math.pi * ak + TWO_PI * ak * (j + 0.5 + 0.0137) / self.nodes
        self._cache: dict = {k: [] for k in self.sources}
        self.separatrices = {k: [] for k in self.sources}
        self.saddle_notes: list[str] = []
        self._find_separatrices()

    # -- geometry ------------------------------------------------------------

    def _switch_radius(self, k: int) -> float:
        p = self.curve.punctures[k]
        others = [q for j, q in enumerate(self.curve.punctures) if j != k and not is_inf(q)]
        if self.curve.genus == 1:
            lat = self.curve.lattice
            d = [abs(lat.reduce(q - p)[0]) for q in others]
            d.append(min(1.0, lat.T))
            d.extend(abs(lat.reduce(z - p)[0]) for z in self._zero_list())
            return 0.05 * min(d)
        if is_inf(p):
            d = [1.0 / abs(q) for q in others if q != 0]
            d.extend(1.0 / abs(z) for z in self._zero_list() if z != 0)
            return 0.05 * min(d) if d else 0.05
        d = [abs(q - p) for q in others]
        if any(is_inf(q) for q in self.curve.punctures):
            d.append(1.0 + abs(p))
        d.extend(abs(z - p) for z in self._zero_list())
        return 0.05 * min(d) if d else 0.05

    def _zero_list(self):
        return list(getattr(self, "zeros", []))

    def _clearance(self, z: np.ndarray) -> np.ndarray:
        d = self.level.pole_distance_array(z)
        if self.curve.genus == 0 and any(is_inf(p) for p in self.curve.punctures):
            d = np.minimum(d, np.abs(z) + 1.0)
        if len(self.zeros):
            w = z[:, None] - self.zeros[None, :]
            if self.curve.genus == 1:
                w = self.curve.lattice.reduce_array(w)[0]
            d = np.minimum(d, np.min(np.abs(w), axis=1))
        return d

    # -- chart arithmetic ----------------------------------------------------

    def _chart_value(self, k: int, u: np.ndarray) -> np.ndarray:
        ch = self.charts[k]
        return ch.a * u + self.level.local_regular(k, np.exp(u))

    def _enter_chart(self, st: FlowState, idx: np.ndarray, k: int):
        t = self.level.local_coordinate(k, st.z[idx])
        st.u[idx] = np.log(t)
        st.chart[idx] = k

    def _leave_chart(self, st: FlowState, idx: np.ndarray):
        for k in np.unique(st.chart[idx]):
            sel = idx[st.chart[idx] == k]
            st.z[sel] = self.level.from_local(int(k), np.exp(st.u[sel]))
            st.chart[sel] = -1

    # -- marching ------------------------------------------------------------

    def advance(self, st: FlowState, delta, maxit: int = 20000) -> FlowState:
        """Move every point so that ``zeta_level`` changes by ``delta`` (per point)."""
        st = st.copy()
        rem = np.broadcast_to(np.asarray(delta, dtype=complex), (len(st),)).copy()
        fac = np.ones(len(st))
        done = rem == 0
        for _ in range(maxit):
            if done.all():
                break
            idx = np.nonzero(~done)[0]
            g = idx[st.chart[idx] < 0]
            c = idx[st.chart[idx] >= 0]
            if len(g):
                self._global_step(st, g, rem, fac, done)
            if len(c):
                self._chart_step(st, c, rem, fac, done)
            bad = fac < 1e-14
            if bad.any():
                raise FlowError("gradient line stalled (passes through a saddle)")
        else:
            raise FlowError("gradient line did not converge")
        return st

    def _global_step(self, st, idx, rem, fac, done):
        z = st.z[idx]
        f = self.level.density_array(z)
        cl = self._clearance(z)
        lim = _STEP * cl * np.abs(f) * fac[idx]
        r = rem[idx]
        mag = np.abs(r)
        step = np.where(mag > lim, r * (lim / np.maximum(mag, 1e-300)), r)
        zm = z + 0.5 * step / f
        zn = z + step / self.level.density_array(zm)
        for _ in range(_NEWTON):
            res = self.level.primitive_diff_array(z, zn) - step
            zn = zn - res / self.level.density_array(zn)
            if np.all(np.abs(res) <= 1e-14 * (1 + np.abs(step))):
                break
        res = np.abs(self.level.primitive_diff_array(z, zn) - step)
        good = (res <= 1e-11 * (1 + np.abs(step))) & (np.abs(zn - z) <= 0.7 * cl) & np.isfinite(zn)
        gi = idx[good]
        st.z[gi] = zn[good]
        rem[gi] = r[good] - step[good]
        fac[gi] = np.minimum(1.0, fac[gi] * 2.0)
        fac[idx[~good]] *= 0.25
        done[gi] = rem[gi] == 0
        # enter pole charts
        if len(gi):
            for k, ch in self.charts.items():
                t = self.level.local_coordinate(k, st.z[gi])
                near = gi[np.abs(t) < ch.r]
                if len(near):
                    self._enter_chart(st, near, k)

    def _chart_step(self, st, idx, rem, fac, done):
        for k in np.unique(st.chart[idx]):
            sel = idx[st.chart[idx] == k]
            ch = self.charts[int(k)]
            u = st.u[sel]
            r = rem[sel]
            lim = 0.5 * abs(ch.a) * fac[sel]
            mag = np.abs(r)
            step = np.where(mag > lim, r * (lim / np.maximum(mag, 1e-300)), r)
            target = self._chart_value(int(k), u) + step
            un = u + step / ch.a
            for _ in range(_NEWTON):
                t = np.exp(un)
                F = ch.a * un + self.level.local_regular(int(k), t) - target
                dF = ch.a + t * self.level.local_regular_deriv(int(k), t)
                un = un - F / dF
                if np.all(np.abs(F) <= 1e-14 * (1 + np.abs(target))):
                    break
            F = np.abs(self._chart_value(int(k), un) - target)
            good = (F <= 1e-11 * (1 + np.abs(target))) & np.isfinite(un)
            gi = sel[good]
            st.u[gi] = un[good]
            rem[gi] = r[good] - step[good]
            fac[gi] = np.minimum(1.0, fac[gi] * 2.0)
            fac[sel[~good]] *= 0.25
            done[gi] = rem[gi] == 0
            out = gi[np.abs(np.exp(st.u[gi])) > 2 * ch.r]
            if len(out):
                self._leave_chart(st, out)

    # -- evaluation ----------------------------------------------------------

    def other_x(self, st: FlowState) -> np.ndarray:
        out = np.empty(len(st))
        g = st.chart < 0
        if g.any():
            out[g] = self.other.x_array(st.z[g])
        for k in np.unique(st.chart[~g]):
            sel = st.chart == k
            ch = self.charts[int(k)]
            t = np.exp(st.u[sel])
            out[sel] = (ch.a_other * st.u[sel].real
                        + self.other.local_regular(int(k), t).real + ch.h_other)
        return out

    def level_x(self, st: FlowState) -> np.ndarray:
        out = np.empty(len(st))
        g = st.chart < 0
        if g.any():
            out[g] = self.level.x_array(st.z[g])
        for k in np.unique(st.chart[~g]):
            sel = st.chart == k
            out[sel] = self._chart_value(int(k), st.u[sel]).real + self.charts[int(k)].h
        return out

    def ratio(self, st: FlowState) -> np.ndarray:
        """``f_other / f_level`` at the points (chart-safe)."""
        out = np.empty(len(st), dtype=complex)
        g = st.chart < 0
        if g.any():
            out[g] = self.other.density_array(st.z[g]) / self.level.density_array(st.z[g])
        for k in np.unique(st.chart[~g]):
            sel = st.chart == k
            ch = self.charts[int(k)]
            t = np.exp(st.u[sel])
            num = ch.a_other + t * self.other.local_regular_deriv(int(k), t)
            den = ch.a + t * self.level.local_regular_deriv(int(k), t)
            out[sel] = num / den
        return out

    def points(self, st: FlowState) -> np.ndarray:
        z = st.z.copy()
        for k in np.unique(st.chart[st.chart >= 0]):
            sel = st.chart == k
            z[sel] = self.level.from_local(int(k), np.exp(st.u[sel]))
        return z

    # -- sources -------------------------------------------------------------

    def start_state(self, k: int, labels, c: float) -> FlowState:
        """Points on the lines ``labels`` out of source ``k`` at level ``c``, if ``c`` is
        low enough to lie inside the chart; otherwise at the chart boundary level."""
        ch = self.charts[k]
        labels = np.asarray(labels, dtype=float)
        c_top = ch.h + ch.a * math.log(ch.r)
        lev = min(c, c_top)
        target = (lev - ch.h) + 1j * labels
        u = target / ch.a
        for _ in range(_NEWTON + 10):
            t = np.exp(u)
            F = ch.a * u + self.level.local_regular(k, t) - target
            dF = ch.a + t * self.level.local_regular_deriv(k, t)
            u = u - F / dF
            if np.all(np.abs(F) <= 1e-15 * (1 + np.abs(target))):
                break
        st = FlowState(np.full(len(labels), np.nan + 0j), np.full(len(labels), k), u)
        return st, lev

    def state_at(self, k: int, c: float) -> FlowState:
        """Base-label points of source ``k`` on the level ``c`` (cached, forward marching)."""
        cache = self._cache[k]
        best = None
        for lev, st in cache:
            if lev == c:
                return st
            if lev < c and (best is None or lev > best[0]):
                best = (lev, st)
        start, lev0 = self.start_state(k, self.labels[k], c)
        if best is None or best[0] < lev0:
            best = (lev0, start)
        lev, st = best
        out = self.advance(st, c - lev) if c > lev else st
        cache.append((c, out))
        if len(cache) > 96:
            cache.sort(key=lambda e: e[0])
            del cache[::2]
        return out

    def fresh_state(self, k: int, labels, c: float) -> FlowState:
        st, lev = self.start_state(k, labels, c)
        return self.advance(st, c - lev) if c > lev else st

    # -- saddles -------------------------------------------------------------

    def _wrap(self, k: int, s: float) -> float:
        a = self.charts[k].a
        return (s + math.pi * a) % (TWO_PI * a) - math.pi * a

    def _find_separatrices(self):
        lev = self.level
        for q in self.zeros:
            fp = lev.derivative(complex(q))
            cq = lev.x_harmonic(complex(q))
            if abs(fp) < 1e-10:
                self.saddle_notes.append(f"degenerate zero at {complex(q):.6g} skipped")
                continue
            cl = float(self._clearance(np.array([q]))[0]) if len(self.zeros) > 1 else None
            d = 1e-3 * (cl if cl and math.isfinite(cl) and cl > 0 else 1.0)
            d = min(d, 1e-3 * float(lev.pole_distance_array(np.array([q]))[0]))
            eps = abs(fp) * d * d / 2
            for sgn in (1, -1):
                z = complex(q) + sgn * np.sqrt(-2 * eps / fp)
                for _ in range(30):
                    r = lev.primitive_diff(complex(q), z) + eps
                    z -= r / lev.density(z)
                    if abs(r) < 1e-15:
                        break
                hit = self._descend(z, complex(q))
                if hit is not None:
                    k, s = hit
                    self.separatrices[k].append((s, float(cq)))
        for k in self.separatrices:
            self.separatrices[k].sort()

    def _descend(self, z, q):
        st = FlowState(np.array([z]), np.array([-1]), np.array([0j]))
        for _ in range(400):
            try:
                st = self.advance(st, -0.25)
            except FlowError:
                return None
            kk = int(st.chart[0])
            if kk >= 0:
                if self.charts[kk].a > 0:
                    s = float(self._chart_value(kk, st.u).imag[0])
                    return kk, self._wrap(kk, s)
                return None
            zz = st.z[0]
            others = [w for w in self.zeros if abs(w - q) > 1e-12]
            for w in others:
                dw = zz - w
                if self.curve.genus == 1:
                    dw = self.curve.lattice.reduce(dw)[0]
                if abs(dw) < 1e-6:
                    return None  # saddle connection: the lower saddle carries this jump
        return None

    def active_jumps(self, k: int, c: float) -> list:
        out: list = []
        a = self.charts[k].a
        for s in sorted(s for s, cq in self.separatrices[k] if cq < c):
            if not out or s - out[-1] > 1e-9 * a:
                out.append(s)
        if len(out) > 1 and out[0] + TWO_PI * a - out[-1] <= 1e-9 * a:
            out.pop()
        return out

    def column(self, c: float) -> "LevelColumn":
        return LevelColumn(self, c)


# ---------------------------------------------------------------------------
# one level set


_GL8 = np.polynomial.legendre.leggauss(8)


@dataclass
class _Arc:
    k: int
    s: np.ndarray
    st: FlowState
    g: np.ndarray
    dg: np.ndarray


def _hermite(g0, g1, m0, m1, tau):
    t2, t3 = tau * tau, tau * tau * tau
    return ((2 * t3 - 3 * t2 + 1) * g0 + (t3 - 2 * t2 + tau) * m0
            + (-2 * t3 + 3 * t2) * g1 + (t3 - t2) * m1)


class LevelColumn:
    """The level set ``{x_level = c}`` as arcs of labels with values of ``x_other``."""

    def __init__(self, flows: LevelFlows, c: float, max_rounds: int = 40):
        self.flows = flows
        self.c = float(c)
        self.arcs: list[_Arc] = []
        for k in flows.sources:
            self.arcs.extend(self._arcs_for(k))
        for arc in self.arcs:
            self._refine(arc, max_rounds)

    def _values(self, st):
        return self.flows.other_x(st), -self.flows.ratio(st).imag

    def _move(self, st: FlowState, ds) -> FlowState:
        return self.flows.advance(st, 1j * np.asarray(ds, dtype=float))

    def _arcs_for(self, k: int) -> list:
        fl = self.flows
        a = fl.charts[k].a
        period = TWO_PI * a
        s = fl.labels[k]
        st = fl.state_at(k, self.c)
        jumps = fl.active_jumps(k, self.c)
        if not jumps:
            ss = np.append(s, s[0] + period)
            sts = FlowState.concat([st, st.take([0])])
            return [self._make(k, ss, sts)]
        arcs = []
        for i, j0 in enumerate(jumps):
            j1 = jumps[i + 1] if i + 1 < len(jumps) else jumps[0] + period
            su = np.where(s > j0, s, s + period)
            inside = np.nonzero((su > j0) & (su < j1))[0]
            inside = inside[np.argsort(su[inside])]
            if len(inside) >= 4:
                si, sti = su[inside], st.take(inside)
            else:
                si = np.linspace(j0, j1, 8)[1:-1]
                wrapped = (si + math.pi * a) % period - math.pi * a
                sti = fl.fresh_state(k, wrapped, self.c)
            left = self._move(sti.take([0]), [j0 - si[0]])
            right = self._move(sti.take([len(si) - 1]), [j1 - si[-1]])
            ss = np.concatenate([[j0], si, [j1]])
            arcs.append(self._make(k, ss, FlowState.concat([left, sti, right])))
        return arcs

    def _make(self, k, s, st):
        g, dg = self._values(st)
        return _Arc(k, np.asarray(s, dtype=float), st, g, dg)

    def _refine(self, arc: _Arc, rounds: int):
        # near a log pole of x_other the slope grows like 1/distance; splitting
        # until ds * |dg| is small resolves the spike geometrically
        for _ in range(rounds):
            ds = np.diff(arc.s)
            dgv = np.diff(arc.g)
            bend = np.abs(ds * np.diff(arc.dg))
            slope = ds * np.maximum(np.abs(arc.dg[:-1]), np.abs(arc.dg[1:]))
            need = np.nonzero(((np.abs(dgv) > 0.2) | (bend > 0.3) | (slope > 0.3))
                              & (ds > 1e-12))[0]
            if not len(need) or len(arc.s) > 64 * self.flows.nodes:
                return
            mid = self._move(arc.st.take(need), 0.5 * ds[need])
            gm, dgm = self._values(mid)
            sm = arc.s[need] + 0.5 * ds[need]
            order = np.argsort(np.concatenate([arc.s, sm]), kind="stable")
            arc.s = np.concatenate([arc.s, sm])[order]
            arc.g = np.concatenate([arc.g, gm])[order]
            arc.dg = np.concatenate([arc.dg, dgm])[order]
            arc.st = FlowState.concat([arc.st, mid]).take(order)

    # -- queries -------------------------------------------------------------

    def intervals(self) -> list:
        """``[min, max]`` of ``x_other`` over each arc: the level set's image."""
        out = []
        for arc in self.arcs:
            lo, hi = float(np.min(arc.g)), float(np.max(arc.g))
            ds = np.diff(arc.s)
            m0, m1 = arc.dg[:-1] * ds, arc.dg[1:] * ds
            tau = np.linspace(0, 1, 17)[1:-1]
            turn = np.nonzero(np.sign(arc.dg[:-1]) != np.sign(arc.dg[1:]))[0]
            if len(turn):
                H = _hermite(arc.g[turn, None], arc.g[turn + 1, None], m0[turn, None],
                             m1[turn, None], tau[None, :])
                lo, hi = min(lo, float(H.min())), max(hi, float(H.max()))
            out.append((lo, hi))
        return out

    def crossings(self, v: float):
        """Labels where ``x_other = v``: list of ``(arc index, s, state)`` (refined)."""
        cand_arc, cand_i, cand_s = [], [], []
        tau = np.linspace(0, 1, 9)
        for ai, arc in enumerate(self.arcs):
            ds = np.diff(arc.s)
            H = _hermite(arc.g[:-1, None] - v, arc.g[1:, None] - v, (arc.dg[:-1] * ds)[:, None],
                         (arc.dg[1:] * ds)[:, None], tau[None, :])
            pos = H > 0
            ii, jj = np.nonzero(pos[:, :-1] != pos[:, 1:])
            for i, j in zip(ii, jj):
                h0, h1 = H[i, j], H[i, j + 1]
                t = tau[j] + (tau[j + 1] - tau[j]) * h0 / (h0 - h1)
                cand_arc.append(ai)
                cand_i.append(i)
                cand_s.append(arc.s[i] + t * ds[i])
        if not cand_arc:
            return []
        base = FlowState.concat([self.arcs[a].st.take([i]) for a, i in zip(cand_arc, cand_i)])
        s0 = np.array([self.arcs[a].s[i] for a, i in zip(cand_arc, cand_i)])
        s1 = np.array([self.arcs[a].s[i + 1] for a, i in zip(cand_arc, cand_i)])
        s = np.array(cand_s)
        for _ in range(12):
            st = self._move(base, s - s0)
            g, dg = self._values(st)
            step = np.where(dg != 0, (g - v) / np.where(dg != 0, dg, 1), 0)
            s = np.clip(s - step, s0, s1)
            if np.all(np.abs(step) < 1e-15 * (1 + np.abs(s))):
                break
        st = self._move(base, s - s0)
        out = []
        for n, (a, si) in enumerate(zip(cand_arc, s)):
            out.append((a, float(si), st.take([n])))
        # the same crossing can be bracketed twice at a shared sample
        out.sort(key=lambda e: (e[0], e[1]))
        uniq = []
        for e in out:
            if uniq and uniq[-1][0] == e[0] and abs(uniq[-1][1] - e[1]) < 1e-11:
                continue
            uniq.append(e)
        return uniq

    def _segments(self, v: float, crossings):
        """Sub-intervals of each arc where ``x_other < v``."""
        by_arc: dict = {}
        for a, s, _ in crossings:
            by_arc.setdefault(a, []).append(s)
        segs = []
        for ai, arc in enumerate(self.arcs):
            pts = [arc.s[0]] + by_arc.get(ai, []) + [arc.s[-1]]
            for lo, hi in zip(pts[:-1], pts[1:]):
                if hi <= lo:
                    continue
                mid = 0.5 * (lo + hi)
                i = min(max(int(np.searchsorted(arc.s, mid)) - 1, 0), len(arc.s) - 2)
                h = arc.s[i + 1] - arc.s[i]
                tau = (mid - arc.s[i]) / h
                gm = _hermite(arc.g[i], arc.g[i + 1], arc.dg[i] * h, arc.dg[i + 1] * h, tau)
                if gm < v:
                    segs.append((ai, lo, hi))
        return segs

    def measure_below(self, v: float, crossings=None) -> float:
        if crossings is None:
            crossings = self.crossings(v)
        return float(sum(hi - lo for _, lo, hi in self._segments(v, crossings)))

    def excess_integral(self, v: float, crossings=None) -> float:
        """``sum over arcs of int (v - x_other)_+ ds``."""
        if crossings is None:
            crossings = self.crossings(v)
        xs, ws = _GL8
        base_idx, arc_of, offs, weights = [], [], [], []
        for ai, lo, hi in self._segments(v, crossings):
            arc = self.arcs[ai]
            i0 = max(int(np.searchsorted(arc.s, lo, side="right")) - 1, 0)
            i1 = min(int(np.searchsorted(arc.s, hi, side="left")), len(arc.s) - 1)
            for i in range(i0, i1):
                a, b = max(lo, arc.s[i]), min(hi, arc.s[i + 1])
                if b <= a:
                    continue
                nodes = 0.5 * (a + b) + 0.5 * (b - a) * xs
                base_idx.extend([i] * len(xs))
                arc_of.extend([ai] * len(xs))
                offs.extend(nodes - arc.s[i])
                weights.extend(0.5 * (b - a) * ws)
        if not weights:
            return 0.0
        base_idx = np.array(base_idx)
        arc_of = np.array(arc_of)
        parts = []
        order = []
        for ai in np.unique(arc_of):
            sel = np.nonzero(arc_of == ai)[0]
            parts.append(self.arcs[ai].st.take(base_idx[sel]))
            order.append(sel)
        order = np.concatenate(order)
        base = FlowState.concat(parts)
        offs = np.asarray(offs)[order]
        w = np.asarray(weights)[order]
        g, _ = self._values(self._move(base, offs))
        return float(np.sum(w * np.maximum(v - g, 0.0)))
