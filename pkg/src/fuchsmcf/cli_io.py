"""Command-line entry points and deterministic CSV / key-value / SVG emission.

Exit codes: 0 success, 2 invalid input, 3 runtime failure, 4 a checked tolerance was violated.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import fields as dc_fields

import numpy as np

from .config import PLOT_KINDS, ConfigError, RunConfig, parse_config, serialize_config

__all__ = [
    "RunConfig", "ConfigError", "parse_config", "serialize_config",
    "emit_series", "emit_summary", "emit_plot", "emit_curve", "main",
]

log = logging.getLogger("fuchsmcf")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_TOLERANCE = 0, 2, 3, 4
SERIES_HEADER = ("t", "umax", "theta_min", "L", "a", "b", "U_t", "Phi_t", "I_member", "crit_lhs", "crit_rhs")


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def _write_text(path, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def series_rows(records) -> list[str]:
    rows = [",".join(SERIES_HEADER)]
    for r in records:
        vals = (r.t, r.umax, r.theta_min, r.L, r.a, r.b, r.U_t, r.Phi_t, r.I_member, r.crit_lhs, r.crit_rhs)
        rows.append(",".join(fmt(v) for v in vals))
    return rows


def emit_series(records, path) -> None:
    records = list(records)
    if not records:
        raise ValueError("refusing to write an empty monitor series")
    _write_text(path, "\n".join(series_rows(records)) + "\n")


def emit_curve(t, values, path, header=("t", "value")) -> None:
    t, values = np.asarray(t), np.asarray(values)
    if t.size == 0:
        raise ValueError("refusing to write an empty curve")
    lines = [",".join(header)] + [f"{fmt(a)},{fmt(b)}" for a, b in zip(t, values)]
    _write_text(path, "\n".join(lines) + "\n")


def summary_text(summary, extra: dict | None = None) -> str:
    items = [
        ("outcome", summary.outcome),
        ("t_final", summary.t_final),
        ("steps", summary.steps),
        ("slope_sinh_umax", summary.slope_sinh_umax),
        ("slope_theta_defect", summary.slope_theta_defect),
        ("threshold", summary.threshold),
        ("a0", summary.a0),
        ("theta0_min", summary.theta0_min),
        ("compliance", summary.compliance),
        ("barrier_violations", summary.barrier_violations),
        ("angle_violations", summary.angle_violations),
        ("records", summary.records),
    ]
    for k, v in (extra or {}).items():
        items.append((k, v))
    if summary.outcome == "graph-lost" and summary.final_record is not None:
        r = summary.final_record
        for f in dc_fields(r):
            v = getattr(r, f.name)
            if isinstance(v, tuple):
                v = " ".join(fmt(x) for x in v)
            items.append((f"final.{f.name}", v))
    out = []
    for k, v in items:
        out.append(f"{k} = {v if isinstance(v, str) else fmt(v)}")
    return "\n".join(out) + "\n"


def emit_summary(summary, path, extra: dict | None = None) -> None:
    _write_text(path, summary_text(summary, extra))


# -- SVG -----------------------------------------------------------------------------------

_W, _H, _PAD = 640, 420, 60


def _polyline(xs, ys, x0, x1, y0, y1, color, dash=None):
    sx = (_W - 2 * _PAD) / (x1 - x0)
    sy = (_H - 2 * _PAD) / (y1 - y0)
    pts = " ".join(f"{_PAD + (x - x0) * sx:.3f},{_H - _PAD - (y - y0) * sy:.3f}" for x, y in zip(xs, ys))
    d = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{d} points="{pts}"/>'


def _span(*arrays):
    v = np.concatenate([np.asarray(a, float).ravel() for a in arrays])
    v = v[np.isfinite(v)]
    lo, hi = (float(v.min()), float(v.max())) if v.size else (0.0, 1.0)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def plot_svg(t, data, bound, kind, data_label, bound_label, ylabel) -> str:
    t = np.asarray(t, float)
    x0, x1 = _span(t)
    y0, y1 = _span(data, bound)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<text x="{_W / 2}" y="{_H - 15}" text-anchor="middle" font-size="14">t</text>',
        f'<text x="18" y="{_H / 2}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 18 {_H / 2})">{ylabel}</text>',
        f'<text x="{_W / 2}" y="25" text-anchor="middle" font-size="15">{kind}</text>',
        f'<text x="{_PAD}" y="{_H - _PAD + 18}" font-size="11">{x0:.3g}</text>',
        f'<text x="{_W - _PAD}" y="{_H - _PAD + 18}" text-anchor="end" font-size="11">{x1:.3g}</text>',
        f'<text x="{_PAD - 5}" y="{_H - _PAD}" text-anchor="end" font-size="11">{y0:.3g}</text>',
        f'<text x="{_PAD - 5}" y="{_PAD + 4}" text-anchor="end" font-size="11">{y1:.3g}</text>',
        _polyline(t, bound, x0, x1, y0, y1, "#d62728", dash="6,4"),
        _polyline(t, data, x0, x1, y0, y1, "#1f77b4"),
        f'<text x="{_W - _PAD}" y="{_PAD - 20}" text-anchor="end" font-size="12" fill="#1f77b4">{data_label}</text>',
        f'<text x="{_W - _PAD}" y="{_PAD - 6}" text-anchor="end" font-size="12" fill="#d62728">{bound_label}</text>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def emit_plot(series, kind: str, path) -> None:
    """SVG of a monitor series with the matching closed-form curve overlaid."""
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {', '.join(PLOT_KINDS)}")
    series = list(series)
    if not series:
        raise ValueError("cannot plot an empty series")
    t = [r.t for r in series]
    if kind == "height-decay":
        svg = plot_svg(t, [r.umax for r in series], [r.U_t for r in series], kind,
                       "max |u|", "U(t) barrier", "height")
    elif kind == "angle-bound":
        svg = plot_svg(t, [r.theta_min for r in series], [r.Phi_t for r in series], kind,
                       "min Theta", "Phi(t) bound", "angle")
    else:
        svg = plot_svg(t, [r.abs_a for r in series], [r.crit_rhs for r in series], kind,
                       "|a| at argmin Theta", "-theta log theta + C theta", "curvature")
    _write_text(path, svg)


# -- commands -----------------------------------------------------------------------------

class ToleranceViolation(RuntimeError):
    pass


def _check(lines: list, name: str, value: float, tol: float, ok=None) -> bool:
    passed = bool(value <= tol) if ok is None else bool(ok)
    lines.append(f"{'PASS' if passed else 'FAIL'} {name}: {value:.3e} (tol {tol:.1e})")
    return passed


def _cmd_verify(args) -> int:
    from . import identity_lab as lab
    from .graph_geometry import constant_graph, sine_graph

    grids = tuple(int(g) for g in args.grids.split(","))
    if len(grids) < 3:
        raise ValueError("--grids needs at least 3 levels")
    L, Y = 2 * math.pi, 1.0
    rng = np.random.default_rng(args.seed)
    pts = np.stack([rng.uniform(0, L, args.points), rng.uniform(-Y, Y, args.points)], -1)
    lines: list[str] = []
    ok = True
    if args.suite == "static":
        S = sine_graph(0.2, L, Y)
        for k, r in lab.residual_static(S, pts).items():
            ok &= _check(lines, f"static {k} (analytic)", r.max_abs, 1e-9)
        levels = lab.discrete_sine_levels(0.2, L, Y, grids)
        for k, est in lab.static_convergence(levels).items():
            good = est.at_floor or est.order >= 1.9
            lines.append(f"{'PASS' if good else 'FAIL'} static {k} order over {args.grids}: {est.label}")
            ok &= good
    elif args.suite == "dynamic":
        S = sine_graph(0.1, L, Y)
        for k, r in lab.residual_dynamic(S, 1e-3, pts).items():
            ok &= _check(lines, f"dynamic {k} (extrapolated)", r.max_abs, 1e-6)
    else:
        S = sine_graph(0.2, L, Y)
        rep = lab.residual_appendix(S, 1e-3, pts)
        ok &= _check(lines, "appendix n-Hn (extrapolated)", rep["n-Hn"].max_abs, 1e-6)
        ok &= _check(lines, "appendix ev-theta-forms", rep["ev-theta-forms"].max_abs, 1e-9)
        ok &= _check(lines, "appendix n-transport (extrapolated)", rep["n-transport"].max_abs, 1e-6)
        from .graph_geometry import analytic_fields
        for c in (0.0, 0.7):
            f = analytic_fields(constant_graph(c), [0.4], [0.3], "static")
            val = float(lab.n_Hn_closed(f)[0])
            ok &= _check(lines, f"appendix umbilic n(H_n) at c={c}", abs(val - 2 / math.cosh(c) ** 2), 1e-9)
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_TOLERANCE


def _cmd_barrier(args) -> int:
    from .comparison_ode import umbilic_exact, umbilic_integrate

    if not args.a0 >= 0 or not args.t_max >= 0 or not args.dt > 0:
        raise ValueError("barrier needs a0 >= 0, t_max >= 0 and dt > 0")
    curve = umbilic_integrate(args.a0, args.t_max, args.dt)
    exact = umbilic_exact(args.a0, curve.t)
    err = float(np.max(np.abs(curve.values - exact)))
    if args.output:
        emit_curve(curve.t, exact, args.output)
    print(f"R({args.t_max:g}) = {float(exact[-1]):.12g}; max |RK4 - closed form| = {err:.3e}")
    return EXIT_OK


def _cmd_angle(args) -> int:
    from .comparison_ode import angle_lower_bound, angle_ode_integrate

    if not args.a0 > 0 or not 0 <= args.eps < 1 or not args.dt > 0 or not args.t_max >= 0:
        raise ValueError("angle-ode needs a0 > 0, eps in [0, 1), dt > 0 and t_max >= 0")
    phi0 = float(angle_lower_bound(args.a0, args.eps, 0.0))
    curve = angle_ode_integrate(args.a0, phi0, args.t_max, args.dt)
    closed = angle_lower_bound(args.a0, args.eps, curve.t)
    err = float(np.max(np.abs(curve.values - closed)))
    if args.output:
        emit_curve(curve.t, closed, args.output)
    print(f"phi0 = {phi0:.12g}; max |RK4 - closed form| on [0, {args.t_max:g}] = {err:.3e}")
    return EXIT_OK


def _load_config(args) -> RunConfig:
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc.strerror or exc}") from None
    cfg = parse_config(text)
    over = {}
    for key in ("series", "summary", "plot"):
        v = getattr(args, key, None)
        if v:
            over[f"output_{key}"] = v
    if over:
        from dataclasses import replace
        cfg = replace(cfg, **over)
    return cfg


def _emit_all(cfg: RunConfig, summary, records, extra=None, kind=None):
    if cfg.output_series:
        emit_series(records, cfg.output_series)
    if cfg.output_summary:
        emit_summary(summary, cfg.output_summary, extra)
    if cfg.output_plot:
        emit_plot(records, kind or cfg.plot_kind, cfg.output_plot)


def _cmd_flow(args) -> int:
    from .flow_engine import run

    cfg = _load_config(args)
    summary, records = run(cfg)
    _emit_all(cfg, summary, records)
    sys.stdout.write(summary_text(summary))
    return EXIT_OK


def _cmd_probe(args) -> int:
    from .flow_engine import singularity_probe

    cfg = _load_config(args)
    rep = singularity_probe(cfg)
    extra = {
        "classification": rep.classification,
        "C": rep.C,
        "I_fraction": rep.I_fraction,
        "inequality_fraction": rep.inequality_fraction,
        "inequality_tol": rep.tol,
    }
    # the probe plot unless the config asks for another kind
    kind = "probe" if cfg.plot_kind == RunConfig.plot_kind else cfg.plot_kind
    _emit_all(cfg, rep.summary, rep.records, extra, kind=kind)
    sys.stdout.write(summary_text(rep.summary, extra))
    return EXIT_OK


def _cmd_group(args) -> int:
    from .hyp_base import apply_word, hyperbolic_distance, octagon_generators, reduce_to_fundamental_domain

    G = octagon_generators()
    lines: list[str] = []
    ok = _check(lines, "commutator relator", G.relator_product().distance_to(G.word_map(())), 1e-10)
    ok &= _check(lines, "side relator", G.side_relator_product().distance_to(G.word_map(())), 1e-10)
    lengths = [g.translation_length() for g in G.generators]
    ok &= _check(lines, "translation length spread", max(lengths) - min(lengths), 1e-10)
    d0 = [hyperbolic_distance(0j, g(0j)) for g in G.generators]
    ok &= _check(lines, "orbit distance spread", max(d0) - min(d0), 1e-10)
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.points):
        r = 0.95 * math.sqrt(rng.uniform())
        z = r * complex(math.cos(a := rng.uniform(0, 2 * math.pi)), math.sin(a))
        z0, word = reduce_to_fundamental_domain(G, z)
        if not G.contains(z0, 1e-9):
            worst = math.inf
            break
        worst = max(worst, abs(apply_word(G, word, z0) - z))
    ok &= _check(lines, f"reduction round trip ({args.points} points)", worst, 1e-9)
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_TOLERANCE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fuchsmcf", description="Graphical MCF laboratory in Fuchsian manifolds")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="identity residual suites")
    v.add_argument("--suite", choices=("static", "dynamic", "appendix"), required=True)
    v.add_argument("--grids", default="64,128,256")
    v.add_argument("--points", type=int, default=32)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=_cmd_verify)

    b = sub.add_parser("barrier", help="umbilic barrier R(t)")
    b.add_argument("--a0", type=float, required=True)
    b.add_argument("--t-max", type=float, default=3.0)
    b.add_argument("--dt", type=float, default=1e-3)
    b.add_argument("--output", default="")
    b.set_defaults(func=_cmd_barrier)

    a = sub.add_parser("angle-ode", help="angle lower bound phi(t)")
    a.add_argument("--a0", type=float, required=True)
    a.add_argument("--eps", type=float, required=True)
    a.add_argument("--t-max", type=float, default=5.0)
    a.add_argument("--dt", type=float, default=1e-3)
    a.add_argument("--output", default="")
    a.set_defaults(func=_cmd_angle)

    for name, fn in (("flow", _cmd_flow), ("probe", _cmd_probe)):
        f = sub.add_parser(name, help=f"{name} run from a config file")
        f.add_argument("--config", required=True)
        f.add_argument("--series", default="")
        f.add_argument("--summary", default="")
        f.add_argument("--plot", default="")
        f.set_defaults(func=fn)

    g = sub.add_parser("group", help="octagon group checks")
    g.add_argument("--check", action="store_true", required=True)
    g.add_argument("--points", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=_cmd_group)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .flow_engine import FlowAbort
    from .graph_geometry import GraphLostError

    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FlowAbort, GraphLostError, OSError, RuntimeError, ArithmeticError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
