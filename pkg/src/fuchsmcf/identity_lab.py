"""Residual checks of the static, dynamic and appendix identities of graphical MCF.

Every residual is "measured left side minus closed-form right side" evaluated pointwise.
Analytic surfaces use exact (autodiff) derivatives; discrete surfaces use the grid stencils,
and their residuals shrink like h^2. Time derivatives are material: a point P of S is
followed to P - eps H nu on ``normal_push(S, eps)`` and first differences in eps are
Richardson-extrapolated over eps, eps/2, eps/4.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ambient
from .graph_geometry import (
    AnalyticGraph,
    DiscreteGraph,
    analytic_fields,
    discrete_static_fields,
    normal_push,
    principal_frame,
    push_displacement,
    tangent_normal_vectors,
)

FLOOR = 1e-12
STATIC_NAMES = ("eq-u", "eq-eta", "eq-theta", "grad-u-norm", "grad-theta")
DYNAMIC_NAMES = ("theta-t", "evo-theta", "evo-alpha", "evo-H", "evo-A2", "u-material", "u-heat")
APPENDIX_NAMES = ("n-Hn", "ev-theta-forms", "n-transport")


@dataclass(frozen=True)
class ResidualReport:
    name: str
    points: np.ndarray
    max_abs: float
    mean_abs: float
    h: float
    by_level: tuple = ()  # ((step, max |residual|), ...) before extrapolation

    def passes(self, tol: float) -> bool:
        return bool(self.max_abs <= tol)


@dataclass(frozen=True)
class ConvergenceEstimate:
    name: str
    levels: tuple  # ((h, max residual), ...)
    order: float | None
    at_floor: bool = False

    @property
    def label(self) -> str:
        return "at floor" if self.at_floor else f"{self.order:.3f}"


def _report(name, points, res, h, by_level=()) -> ResidualReport:
    a = np.abs(np.asarray(res, float))
    return ResidualReport(name, np.asarray(points), float(np.max(a)), float(np.mean(a)), float(h), tuple(by_level))


def _pair_n(f, d):
    """<grad f, n> = g^ij d_j f d_i u for a covector d = (d_x f, d_y f)."""
    ux, uy = f["ux"], f["uy"]
    return (f["ixx"] * d[..., 0] * ux + f["ixy"] * (d[..., 0] * uy + d[..., 1] * ux)
            + f["iyy"] * d[..., 1] * uy)


def _grad_sq(f, d):
    return f["ixx"] * d[..., 0] ** 2 + 2 * f["ixy"] * d[..., 0] * d[..., 1] + f["iyy"] * d[..., 1] ** 2


def _gradient_formula_residual(f):
    """|grad Theta - sum_i (k_i - tanh(u) Theta) <e_i, n> e_i| in the induced metric."""
    pf = principal_frame(f)
    T = np.tanh(f["u"])
    coef = (pf["kappa"] - (T * f["theta"])[..., None]) * pf["n_dot"]
    formula = np.einsum("...ki,...i->...k", pf["dirs"], coef)
    d = f["d_theta"]
    grad = np.stack([f["ixx"] * d[..., 0] + f["ixy"] * d[..., 1],
                     f["ixy"] * d[..., 0] + f["iyy"] * d[..., 1]], -1)
    e = grad - formula
    return np.sqrt(np.maximum(f["gxx"] * e[..., 0] ** 2 + 2 * f["gxy"] * e[..., 0] * e[..., 1]
                              + f["gyy"] * e[..., 1] ** 2, 0.0))


def static_residual_fields(f: dict) -> dict:
    u, th, H, A2 = f["u"], f["theta"], f["H"], f["A2"]
    T = np.tanh(u)
    ch2 = np.cosh(u) ** 2
    dHn = _pair_n(f, f["d_H"])
    dTn = _pair_n(f, f["d_theta"])
    return {
        "eq-u": f["lap_u"] - (T * (1 + th**2) - H * th),
        "eq-eta": f["lap_eta"] - (np.sinh(u) * H - A2 * f["eta"] + np.cosh(u) * dHn),
        "eq-theta": f["lap_theta"] - (dHn - A2 * th + T * (1 + th**2) * H - th * (1 - th**2) / ch2
                                      - 2 * T * dTn - 2 * T**2 * th),
        "grad-u-norm": f["grad_u_sq"] - (1 - th**2),
        "grad-theta": _gradient_formula_residual(f),
    }


def _resolve_points(S, points):
    if points is None:
        if S.kind == "discrete":
            return None
        rng = np.random.default_rng(0)
        L = S.chart.L if S.chart is not None else 2 * np.pi
        Y = S.chart.Y if S.chart is not None else 1.0
        return np.stack([rng.uniform(0, L, 64), rng.uniform(-Y, Y, 64)], -1)
    return np.atleast_2d(np.asarray(points, float))


def residual_static(S, points=None, names=STATIC_NAMES, margin: int | None = None) -> dict[str, ResidualReport]:
    """Static identities at ``points`` ((n, 2) array) for analytic S.

    Discrete S: all nodes at least ``margin`` rows away from the walls y = +-Y. Derived
    fields are differenced twice, so the wall reflection reaches two rows in for centred
    stencils and four for the one-sided variant (the defaults).
    """
    pts = _resolve_points(S, points)
    if S.kind == "analytic":
        f = analytic_fields(S, pts[:, 0], pts[:, 1], "static")
        h = 0.0
    else:
        f = discrete_static_fields(S)
        h = max(S.chart.hx, S.chart.hy)
        X, Yg = S.chart.mesh()
        if margin is None:
            margin = 2 if S.scheme == "central" else 4
        keep = slice(margin, S.chart.Ny - margin)
        f = {k: (v[:, keep] if np.ndim(v) >= 2 else v) for k, v in f.items()}
        pts = np.stack([X[:, keep].ravel(), Yg[:, keep].ravel()], -1)
    theta_min = float(np.min(f["theta"]))
    if not theta_min > 0:
        from .graph_geometry import GraphLostError
        raise GraphLostError(f"graph property lost: min Theta = {theta_min}", value=theta_min)
    res = static_residual_fields(f)
    return {k: _report(k, pts, res[k], h) for k in names}


def richardson3(r1, r2, r4):
    """Eliminate O(eps) and O(eps^2) from values at eps, eps/2, eps/4."""
    return (8 * r4 - 6 * r2 + r1) / 3


def _eps_levels(eps):
    eps = float(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    return (eps, eps / 2, eps / 4)


def _dynamic_at(S: AnalyticGraph, f0: dict, pts: np.ndarray, eps: float) -> dict:
    """Signed residuals of the evolution identities with an eps first difference."""
    disp = push_displacement(S, pts[:, 0], pts[:, 1])
    xq = pts[:, 0] + eps * disp[:, 1]
    yq = pts[:, 1] + eps * disp[:, 2]
    f1 = analytic_fields(normal_push(S, eps), xq, yq, "basic")

    def dt(k):
        return (f1[k] - f0[k]) / eps

    u, th, H, A2 = f0["u"], f0["theta"], f0["H"], f0["A2"]
    T = np.tanh(u)
    ch2 = np.cosh(u) ** 2
    alpha = th**2
    dHn = _pair_n(f0, f0["d_H"])
    dTn = _pair_n(f0, f0["d_theta"])
    dT_sq = _grad_sq(f0, f0["d_theta"])
    theta_t = dt("theta")
    alpha_t = (f1["theta"] ** 2 - alpha) / eps
    u_t = dt("u")
    return {
        "theta-t": theta_t - (dHn - H * T * (1 - th**2)),
        "evo-theta": theta_t - f0["lap_theta"] - (A2 * th - 2 * T * H + 2 * T * dTn
                                                   + th * (1 - th**2) / ch2 + 2 * T**2 * th),
        "evo-alpha": alpha_t - f0["lap_alpha"] - (2 * A2 * alpha - 4 * T * H * th + 4 * T * th * dTn
                                                   + 2 * alpha * (1 - alpha) / ch2 + 4 * T**2 * alpha
                                                   - 2 * dT_sq),
        "evo-H": dt("H") - f0["lap_H"] - H * (A2 - 2),
        "evo-A2": dt("A2") - f0["lap_A2"] - (-2 * f0["grad_A_sq"] + 2 * A2**2 + 4 * (A2 - H**2)),
        "u-material": u_t + H * th,
        "u-heat": u_t - f0["lap_u"] + T * (1 + th**2),
    }


def _require_analytic(S):
    if S.kind != "analytic":
        raise TypeError("time-derivative identities need an analytic surface (exact third derivatives)")


def residual_dynamic(S: AnalyticGraph, eps: float = 1e-3, points=None,
                     names=DYNAMIC_NAMES) -> dict[str, ResidualReport]:
    """Evolution identities at material points; max_abs is the Richardson-extrapolated value."""
    _require_analytic(S)
    pts = _resolve_points(S, points)
    f0 = analytic_fields(S, pts[:, 0], pts[:, 1], "dynamic")
    levels = _eps_levels(eps)
    raw = [_dynamic_at(S, f0, pts, e) for e in levels]
    out = {}
    for k in names:
        ext = richardson3(raw[0][k], raw[1][k], raw[2][k])
        by = tuple((e, float(np.max(np.abs(r[k])))) for e, r in zip(levels, raw))
        out[k] = _report(k, pts, ext, levels[0], by)
    return out


# -- appendix -------------------------------------------------------------------------

def n_Hn_closed(f: dict) -> np.ndarray:
    """Variation of H under the unit fiber field n, from L_n g (ambient closed form)."""
    u, y = np.asarray(f["u"]), np.asarray(f["y"])
    Fx, Fy, nu = tangent_normal_vectors(f)
    Lg = ambient.lie_derivative_ng_arrays(u, y)
    T, DT = Lg["T"], Lg["DT"]
    frames = np.stack([Fx, Fy], -2)  # (..., i, 3)
    ginv = np.stack([np.stack([f["ixx"], f["ixy"]], -1), np.stack([f["ixy"], f["iyy"]], -1)], -2)
    a = np.stack([np.stack([f["axx"], f["axy"]], -1), np.stack([f["axy"], f["ayy"]], -1)], -2)
    # (nabla_nu T)(F_i, F_j), (nabla_{F_i} T)(nu, F_j), T(F_i, F_j)
    DnuT = np.einsum("...k,...kab,...ia,...jb->...ij", nu, DT, frames, frames)
    DeT = np.einsum("...ik,...kab,...a,...jb->...ij", frames, DT, nu, frames)
    TFF = np.einsum("...ab,...ia,...jb->...ij", T, frames, frames)
    t1 = 0.5 * np.einsum("...ij,...ij->...", ginv, DnuT)
    t2 = -np.einsum("...ij,...ij->...", ginv, DeT)
    aup = np.einsum("...ik,...kl,...lj->...ij", ginv, a, ginv)
    t3 = -np.einsum("...ij,...ij->...", aup, TFF)
    th = f["theta"]
    t4 = f["H"] * np.tanh(u) * (1 - th**2)  # H <nu, nabla_nu n>
    return t1 + t2 + t3 + t4


def _shifted(S: AnalyticGraph, eps: float) -> AnalyticGraph:
    return AnalyticGraph(_shift_fn(S.fn), (S.params, float(eps)), S.chart)


_SHIFT_CACHE: dict = {}


def _shift_fn(fn):
    # the n-flow is a rigid shift of the height function
    if fn not in _SHIFT_CACHE:
        def shifted(x, y, p):
            base, e = p
            return fn(x, y, base) + e
        _SHIFT_CACHE[fn] = shifted
    return _SHIFT_CACHE[fn]


def _parallel_transport(start, end, V, steps: int = 16):
    """Transport V (..., 3) along the coordinate segment start -> end (RK4)."""
    start, end = np.asarray(start, float), np.asarray(end, float)
    d = end - start

    def rhs(s, W):
        p = start + s * d
        G = ambient.christoffel_arrays(p[..., 0], p[..., 2])
        return -np.einsum("...kij,...i,...j->...k", G, d, W)

    W = np.asarray(V, float)
    hs = 1.0 / steps
    for n in range(steps):
        s = n * hs
        k1 = rhs(s, W)
        k2 = rhs(s + hs / 2, W + hs / 2 * k1)
        k3 = rhs(s + hs / 2, W + hs / 2 * k2)
        k4 = rhs(s + hs, W + hs * k3)
        W = W + hs / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return W


def residual_appendix(S: AnalyticGraph, eps: float = 1e-3, points=None,
                      names=APPENDIX_NAMES) -> dict[str, ResidualReport]:
    """(n-Hn) closed-form n(H_n) vs the eps-variation of H under the n-flow;
    (ev-theta-forms) the Lie-derivative form of (d_t - Delta) Theta vs the explicit form;
    (n-transport) d n / dt along MCF vs -H nabla_nu n, via parallel transport.
    """
    _require_analytic(S)
    pts = _resolve_points(S, points)
    f0 = analytic_fields(S, pts[:, 0], pts[:, 1], "static")
    levels = _eps_levels(eps)
    closed = n_Hn_closed(f0)
    out = {}
    if "n-Hn" in names:
        raw = []
        for e in levels:
            f1 = analytic_fields(_shifted(S, e), pts[:, 0], pts[:, 1], "basic")
            raw.append((f1["H"] - f0["H"]) / e - closed)
        ext = richardson3(*raw)
        out["n-Hn"] = _report("n-Hn", pts, ext, levels[0],
                              tuple((e, float(np.max(np.abs(r)))) for e, r in zip(levels, raw)))
    if "ev-theta-forms" in names:
        u, th, H, A2 = f0["u"], f0["theta"], f0["H"], f0["A2"]
        T = np.tanh(u)
        lie_form = (A2 - 2) * th + closed - H * T * (1 - th**2)
        explicit = (A2 * th - 2 * T * H + 2 * T * _pair_n(f0, f0["d_theta"])
                    + th * (1 - th**2) / np.cosh(u) ** 2 + 2 * T**2 * th)
        out["ev-theta-forms"] = _report("ev-theta-forms", pts, lie_form - explicit, 0.0)
    if "n-transport" in names:
        disp = push_displacement(S, pts[:, 0], pts[:, 1])
        _, _, nu0 = tangent_normal_vectors(f0)
        P = np.stack([f0["u"], pts[:, 0], pts[:, 1]], -1)
        target = -f0["H"][:, None] * np.tanh(f0["u"])[:, None] * (nu0 - f0["theta"][:, None] * ambient.N_FIELD)
        raw = []
        for e in levels:
            Q = P + e * disp
            n_back = _parallel_transport(Q, P, np.broadcast_to(ambient.N_FIELD, Q.shape))
            diff = (n_back - ambient.N_FIELD) / e - target
            raw.append(diff)
        ext = richardson3(*raw)
        g = np.stack([np.ones(len(P)), *ambient.metric_diagonal(P[:, 0], P[:, 2])[1:]], -1)
        norm = np.sqrt(np.sum(g * ext**2, -1))
        out["n-transport"] = _report("n-transport", pts, norm, levels[0],
                                     tuple((e, float(np.max(np.sqrt(np.sum(g * r**2, -1)))))
                                           for e, r in zip(levels, raw)))
    return out


# -- refinement ------------------------------------------------------------------------

def convergence_order(name: str, levels) -> ConvergenceEstimate:
    """Least-squares slope of log(max residual) against log(h).

    ``levels``: iterable of (h, max residual) or of ResidualReport. Residuals all below
    1e-12 are reported as "at floor" (no order).
    """
    pts = []
    for lv in levels:
        if isinstance(lv, ResidualReport):
            pts.append((lv.h, lv.max_abs))
        else:
            pts.append((float(lv[0]), float(lv[1])))
    if len(pts) < 3:
        raise ValueError("a convergence estimate needs at least 3 grid levels")
    hs = np.array([p[0] for p in pts])
    rs = np.array([p[1] for p in pts])
    if np.all(rs < FLOOR):
        return ConvergenceEstimate(name, tuple(pts), None, at_floor=True)
    if np.any(rs <= 0) or np.any(hs <= 0):
        raise ValueError("residuals and spacings must be positive to fit an order")
    slope = np.polyfit(np.log(hs), np.log(rs), 1)[0]
    return ConvergenceEstimate(name, tuple(pts), float(slope))


def discrete_sine_levels(amplitude=0.2, L=2 * np.pi, Y=1.0, grids=(64, 128, 256), scheme="central",
                         offset=0.0, kx=1.0, ky=1.0):
    """Discrete samples of the sine test surface on nested grids (Ny = Nx/2 + 1)."""
    from .graph_geometry import sine_graph
    from .hyp_base import FermiChart

    S = sine_graph(amplitude, L, Y, offset, kx, ky)
    out = []
    for n in grids:
        chart = FermiChart(L, Y, int(n), int(n) // 2 + 1)
        out.append(DiscreteGraph.from_analytic(S, chart, scheme))
    return out


def static_convergence(surfaces, names=STATIC_NAMES, margin: int | None = None) -> dict[str, ConvergenceEstimate]:
    """Static-identity convergence over a list of discrete surfaces (coarse to fine)."""
    reports = [residual_static(S, names=names, margin=margin) for S in surfaces]
    return {k: convergence_order(k, [r[k] for r in reports]) for k in names}
