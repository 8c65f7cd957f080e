"""Command-line front end.

    amoebalab amoeba   --input F --out-dir D [--window ...] [--resolution N]
    amoebalab ronkin   --input F --out-dir D --window ... [--resolution N] [--slow-mode]
    amoebalab polygon  --input F --out-dir D
    amoebalab harnack  --input F --out-dir D [--resolution N]
    amoebalab bloch    --input F --out-dir D [--window m0 m1 n0 n1]
    amoebalab selftest

Input files are Laurent polynomial text (``c : i j`` lines), Laurent JSON
(``{"terms": [...]}``), curve JSON (``{"genus": ..., "punctures": ..., "residues": ...}``)
or spectral JSON (``{"B": ..., "p": ...}``).  Every run writes ``run_config.json``
with the effective settings next to its CSV and SVG outputs.

Exit codes: 0 success, 2 input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import DEFAULT, Tolerances, thread_cap
from .laurent import LaurentError, LaurentPolynomial, newton_polygon

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# config and input


def parse_tolerances(items) -> Tolerances:
    over = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"tolerance override must be NAME=VALUE, got {item!r}")
        try:
            v = float(value)
        except ValueError:
            raise InputError(f"tolerance {name} is not a number") from None
        if not v > 0:
            raise InputError(f"tolerance {name} must be positive")
        over[name.strip()] = v
    try:
        return DEFAULT.replace(**over)
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from None


def load_input(path: str):
    """``(kind, object)`` with kind in laurent, curve, spectral."""
    if not path:
        raise InputError("--input is required")
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise InputError("JSON input must be an object")
        if "terms" in obj:
            return "laurent", obj
        if "genus" in obj:
            return "curve", obj
        if "B" in obj or "degenerate" in obj:
            return "spectral", obj
        raise InputError("unrecognized JSON input (expected terms, genus or B)")
    return "laurent", text


def build_laurent(obj) -> LaurentPolynomial:
    try:
        if isinstance(obj, dict):
            return LaurentPolynomial.from_json(obj)
        return LaurentPolynomial.from_text(obj)
    except LaurentError as exc:
        raise InputError(str(exc)) from None


def build_amoeba_data(obj, tol: Tolerances, nodes: int):
    from .gen_amoeba import AmoebaData
    from .plane_amoeba import AmoebaError
    from .riemann import CurveError

    genus = obj.get("genus")
    if genus not in (0, 1):
        raise InputError("unsupported genus")
    try:
        data = AmoebaData.from_json(obj, tol)
    except (AmoebaError, CurveError, ValueError, KeyError, TypeError) as exc:
        raise InputError(str(exc)) from None
    if nodes:
        data.nodes = int(nodes)
    return data


def effective_config(args, tol: Tolerances, extra=None) -> dict:
    cfg = {
        "subcommand": args.command,
        "input": getattr(args, "input", None),
        "window": list(args.window) if getattr(args, "window", None) else None,
        "resolution": getattr(args, "resolution", None),
        "nodes": getattr(args, "nodes", None),
        "slow_mode": bool(getattr(args, "slow_mode", False)),
        "threads": thread_cap(),
        "tolerances": {k: getattr(tol, k) for k in tol.__dataclass_fields__},
    }
    cfg.update(extra or {})
    return cfg


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_config(out: Path, cfg: dict):
    (out / "run_config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create {out}: {exc}") from None
    return out


def _resolution(args, default: int) -> int:
    r = args.resolution if args.resolution is not None else default
    if r < 16:
        raise InputError("resolution must be at least 16")
    return int(r)


def _window(args, required: bool = False):
    if args.window is None:
        if required:
            raise InputError("--window is required for this subcommand")
        return None
    w = tuple(float(v) for v in args.window)
    if not (w[0] < w[1] and w[2] < w[3]):
        raise InputError("window must satisfy x1min < x1max and x2min < x2max")
    return w


# ---------------------------------------------------------------------------
# subcommands


def cmd_amoeba(args, tol):
    from . import gen_amoeba as ga
    from . import plane_amoeba as pa
    from .plotting import plot_raster

    kind, obj = load_input(args.input)
    out = _out_dir(args)
    res = _resolution(args, 128)
    curves = []
    if kind == "laurent":
        f = build_laurent(obj)
        window = _window(args) or (-6.0, 6.0, -6.0, 6.0)
        raster = pa.membership_raster(f, window, res)
        title = "amoeba"
    elif kind == "curve":
        data = build_amoeba_data(obj, tol, args.nodes)
        window = _window(args) or tuple(float(v) for v in ga.default_window(data))
        raster = ga.membership_raster(data, window, res, normalized=False)
        loc = ga.critical_locus(data, resolution=min(res, 200))
        for pl in loc.polylines:
            z = pl.vertices[:, 0] + 1j * pl.vertices[:, 1]
            keep = np.array([data.curve.distance_to_punctures(complex(w)) > 1e-6 for w in z])
            if keep.sum() > 1:
                curves.append(ga.chi_array(data, z[keep]))
        title = "generalized amoeba"
    else:
        raise InputError("amoeba needs a Laurent polynomial or curve JSON")
    x, y = raster.axes()
    rows = [(x[i], y[j], bool(raster.cells[i, j])) for j in range(len(y)) for i in range(len(x))]
    write_csv(out / "amoeba.csv", ["x1", "x2", "member"], rows)
    plot_raster(raster, out / "amoeba.svg", curves=curves, title=title)
    write_config(out, effective_config(args, tol, {"window": list(window), "resolution": res}))
    print(f"amoeba: {int(raster.cells.sum())} of {raster.cells.size} cells, wrote {out / 'amoeba.csv'}")


def cmd_ronkin(args, tol):
    from . import gen_amoeba as ga
    from . import plane_amoeba as pa
    from .plane_amoeba import AmoebaError
    from .plotting import plot_field

    kind, obj = load_input(args.input)
    window = _window(args, required=True)
    out = _out_dir(args)
    res = args.resolution if args.resolution is not None else 21
    if res < 2:
        raise InputError("resolution must be at least 2")
    nodes = args.nodes or 256
    xs = np.linspace(window[0], window[1], res)
    ys = np.linspace(window[2], window[3], res)
    if kind == "laurent":
        f = build_laurent(obj)
        value = lambda x: pa.ronkin_value(f, x, nodes, tol)  # noqa: E731
        grad = lambda x: pa.ronkin_gradient(f, x, nodes)  # noqa: E731
        hess = lambda x: pa.ma_hessian(f, x, nodes, tol)  # noqa: E731
    elif kind == "curve":
        data = build_amoeba_data(obj, tol, args.nodes)
        value = lambda x: ga.rho_value(data, x, slow_mode=args.slow_mode)  # noqa: E731
        grad = lambda x: ga.rho_gradient(data, x)  # noqa: E731
        hess = lambda x: ga.rho_hessian(data, x)  # noqa: E731
    else:
        raise InputError("ronkin needs a Laurent polynomial or curve JSON")
    rows = []
    vals = np.zeros((res, res))
    for j, x2 in enumerate(ys):
        for i, x1 in enumerate(xs):
            x = np.array([x1, x2])
            v = value(x)
            g = grad(x)
            try:
                H = hess(x)
                h = (H.h11, H.h12, H.h22, H.det)
            except AmoebaError:
                h = (math.nan,) * 4
            vals[i, j] = v
            rows.append((x1, x2, v, g[0], g[1], *h))
    write_csv(out / "ronkin.csv", ["x1", "x2", "rho", "g1", "g2", "h11", "h12", "h22", "det"], rows)
    plot_field(xs, ys, vals, out / "ronkin.svg", title="Ronkin function", label="rho")
    write_config(out, effective_config(args, tol, {"resolution": res, "nodes": nodes}))
    print(f"ronkin: {len(rows)} points, wrote {out / 'ronkin.csv'}")


def cmd_polygon(args, tol):
    from . import gen_amoeba as ga
    from .plotting import plot_polygon

    kind, obj = load_input(args.input)
    out = _out_dir(args)
    if kind == "laurent":
        poly = newton_polygon(build_laurent(obj))
        rows = [(k, -1, v[0], v[1], math.nan, math.nan) for k, v in enumerate(poly.vertices)]
        assign = None
        extra = {}
    elif kind == "curve":
        data = build_amoeba_data(obj, tol, args.nodes)
        dp = ga.delta_polygon(data, brute_force=True)
        poly = dp.polygon
        bf = dp.vertices_by_puncture
        rows = []
        for k, (v, a) in enumerate(zip(poly.vertices, dp.vertex_assignments)):
            rows.append((k, a, v[0], v[1], bf[a][0], bf[a][1]))
        assign = dp.vertex_assignments
        extra = {"max_deviation": dp.max_deviation, "stable": dp.stable}
    else:
        raise InputError("polygon needs a Laurent polynomial or curve JSON")
    write_csv(out / "polygon.csv", ["vertex", "puncture", "v1", "v2", "brute_g1", "brute_g2"], rows)
    plot_polygon(poly, out / "polygon.svg", assignments=assign, title="polygon")
    write_config(out, effective_config(args, tol, extra))
    print(f"polygon: {len(poly.vertices)} vertices, area {poly.area!r}")


def cmd_harnack(args, tol):
    from . import gen_amoeba as ga
    from .plotting import plot_raster

    kind, obj = load_input(args.input)
    if kind != "curve":
        raise InputError("harnack needs curve JSON")
    data = build_amoeba_data(obj, tol, args.nodes)
    out = _out_dir(args)
    res = _resolution(args, 128)
    hr = ga.harnack_classify(data)
    window = _window(args) or tuple(float(v) for v in ga.default_window(data))
    ar = ga.area_report(data, window, res)
    inj = ga.injectivity_test(data, samples=4000, gradient_samples=0)
    lines = [
        f"is_harnack: {str(hr.is_harnack).lower()}",
        f"harnack_up_to_orientation: {str(hr.harnack_up_to_orientation).lower()}",
        f"m_curve: {str(hr.m_curve).lower()}",
        f"one_oval: {str(hr.one_oval).lower()}",
        f"order_matches: {str(hr.order_matches).lower()}",
        f"cyclic_order: {' '.join(map(str, hr.cyclic_order))}",
        f"vertex_order: {' '.join(map(str, hr.vertex_order))}",
        f"amoeba_area: {ar.amoeba_area!r}",
        f"polygon_area: {ar.polygon_area!r}",
        f"area_ratio: {ar.ratio!r}",
        f"chi_samples: {inj.samples}",
        f"chi_collisions: {inj.collisions}",
        f"chi_fold_samples: {inj.fold_samples}",
    ]
    lines += [f"reason: {r}" for r in hr.reasons]
    (out / "harnack.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    raster = ga.membership_raster(data, window, min(res, 128), normalized=False)
    verdict = "Harnack" if hr.is_harnack else "not Harnack"
    plot_raster(raster, out / "harnack.svg", title=f"{verdict}, area ratio {ar.ratio:.3f}")
    write_config(out, effective_config(args, tol, {"window": list(window), "resolution": res}))
    print("\n".join(lines))


def cmd_bloch(args, tol):
    from . import blochspec as bs
    from .plotting import plot_field

    kind, obj = load_input(args.input)
    if kind != "spectral":
        raise InputError("bloch needs spectral JSON")
    try:
        data = bs.SpectralData.from_json(obj, tol)
    except (bs.BlochError, ValueError) as exc:
        raise InputError(str(exc)) from None
    out = _out_dir(args)
    if args.window is not None:
        w = [int(round(v)) for v in args.window]
        mr, nr = (w[0], w[1]), (w[2], w[3])
    else:
        mr, nr = (0, 9), (0, 9)
    res_de = bs.verify_difference_equation(data, ((0, 4), (0, 4)), 20)
    res_g = bs.verify_gauge_form(data, ((0, 4), (0, 4)), 20)
    pos = bs.positivity_report(data, (mr, nr))
    U = bs.u_window(data, mr, nr)
    ms = np.arange(mr[0], mr[1] + 1)
    ns = np.arange(nr[0], nr[1] + 1)
    rows = [(m, n, U[i, j].real, U[i, j].imag) for i, m in enumerate(ms) for j, n in enumerate(ns)]
    write_csv(out / "bloch_u.csv", ["m", "n", "re_u", "im_u"], rows)
    if len(ms) > 1 and len(ns) > 1:
        plot_field(ms, ns, U.real, out / "bloch_u.svg", title="Re u(m, n)", label="Re u")
    lines = [
        f"difference_residual: {res_de!r}",
        f"gauge_residual: {res_g!r}",
        f"nonsingular: {str(pos.nonsingular).lower()}",
        f"positive: {str(pos.positive).lower()}",
        f"min_coeff: {pos.min_coeff!r}",
        f"real_tau: {str(pos.real_tau).lower()}",
    ] + [f"note: {n}" for n in pos.notes]
    (out / "bloch.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    write_config(out, effective_config(args, tol, {"m_range": list(mr), "n_range": list(nr)}))
    print("\n".join(lines))


def cmd_selftest(args, tol):
    """A handful of fast known values; exit 3 if any fails."""
    from . import blochspec as bs
    from . import plane_amoeba as pa
    from .riemann import Lattice

    f = LaurentPolynomial.from_text("1 : 0 0\n1 : 1 0\n1 : 0 1")
    checks = []
    checks.append(("theta(0|i)", abs(bs.theta_eval(bs.ThetaParams(1j), 0) - 1.0864348112133) < 1e-10))
    checks.append(("eta1(i) = pi", abs(Lattice(1j).eta1 - math.pi) < 1e-12))
    H = pa.ma_hessian(f, (0.0, 0.0))
    checks.append(("line det Hess = 1/pi^2", abs(H.det - 1 / math.pi**2) < 1e-8))
    checks.append(("line Ronkin(0,0)", abs(pa.ronkin_value(f, (0.0, 0.0)) - 0.3230659472) < 1e-9))
    deg = bs.SpectralData(None, (0.1, 0.35, 0.8))
    checks.append(("degenerate u = 1", abs(bs.u_coeff(deg, 3, 2) - 1) < 1e-12))
    bad = 0
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}")
        bad += not ok
    if bad:
        raise ArithmeticError(f"{bad} self-test(s) failed")


COMMANDS = {
    "amoeba": cmd_amoeba,
    "ronkin": cmd_ronkin,
    "polygon": cmd_polygon,
    "harnack": cmd_harnack,
    "bloch": cmd_bloch,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="amoebalab", description="Amoebas, Ronkin functions and Bloch spectral data")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--input", help="Laurent text, Laurent JSON, curve JSON or spectral JSON")
        p.add_argument("--out-dir", default=".", help="directory for CSV, SVG and run_config.json")
        p.add_argument("--window", nargs=4, type=float, metavar=("X1MIN", "X1MAX", "X2MIN", "X2MAX"))
        p.add_argument("--resolution", type=int)
        p.add_argument("--nodes", type=int)
        p.add_argument("--tolerance", action="append", metavar="NAME=VALUE")
        p.add_argument("--slow-mode", action="store_true", help="cross-check rho by path integration")
    return parser


def main(argv=None) -> int:
    from .blochspec import BlochError
    from .level_flows import FlowError
    from .numerics import NumericsError
    from .plane_amoeba import AmoebaError
    from .riemann import CurveError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        tol = parse_tolerances(args.tolerance)
        COMMANDS[args.command](args, tol)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (AmoebaError, CurveError, FlowError, NumericsError, BlochError, ArithmeticError,
            ValueError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
