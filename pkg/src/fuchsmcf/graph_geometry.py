"""Pointwise geometry of geodesic graphs r = u(x, y) over the Fermi chart.

Two representations share one set of formulas (``graph_jet_fields``):

* ``AnalyticGraph`` -- a jax-traceable height ``fn(x, y, params)``; every derivative,
  including derivatives of derived fields (Theta, H, |A|^2, ...), comes from forward-mode
  automatic differentiation and is exact to roundoff.
* ``DiscreteGraph`` -- a height field on the chart grid, differentiated by centred
  second-order stencils (periodic in x, even reflection at y = +-Y).

Conventions: nu is the unit normal with Theta = <nu, d_r> > 0, a_ij = <nabla_{F_i} nu, F_j>,
H = g^ij a_ij, so the level set r = c has H = 2 tanh(c).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np
from scipy.interpolate import RectBivariateSpline

from .hyp_base import FermiChart

jax.config.update("jax_enable_x64", True)

DET_FLOOR = 1e-14
PUSH_THETA_MIN = 0.05
NEWTON_TOL = 1e-12
NEWTON_MAXITER = 50


class GraphLostError(RuntimeError):
    """The surface stopped being a geodesic graph (Theta <= threshold)."""

    def __init__(self, message: str, point=None, value: float | None = None):
        super().__init__(message)
        self.point = point
        self.value = value


class DegenerateMetricError(ValueError):
    pass


# -- shared formulas -----------------------------------------------------------

def graph_jet_fields(u, ux, uy, uxx, uxy, uyy, y, xp=np) -> dict:
    """Geometry of the graph F(x, y) = (u, x, y) from the 2-jet of u.

    Works elementwise on numpy arrays or jax tracers (pass ``xp=jnp``).
    """
    T = xp.tanh(u)
    cu2 = xp.cosh(u) ** 2
    A = cu2 * xp.cosh(y) ** 2  # g_M(d_x, d_x)
    B = cu2  # g_M(d_y, d_y)
    W = xp.sqrt(1.0 + ux * ux / A + uy * uy / B)
    theta = 1.0 / W
    gxx = ux * ux + A
    gxy = ux * uy
    gyy = uy * uy + B
    det = gxx * gyy - gxy * gxy
    ixx, ixy, iyy = gyy / det, -gxy / det, gxx / det
    # a_ij = -<nu, d_i d_j F + Gamma(F_i, F_j)>
    axx = (-uxx + T * A + 2 * T * ux * ux - xp.sinh(y) * xp.cosh(y) * uy) / W
    axy = (-uxy + 2 * T * ux * uy + xp.tanh(y) * ux) / W
    ayy = (-uyy + T * B + 2 * T * uy * uy) / W
    Sxx = ixx * axx + ixy * axy
    Sxy = ixx * axy + ixy * ayy
    Syx = ixy * axx + iyy * axy
    Syy = ixy * axy + iyy * ayy
    H = Sxx + Syy
    A2 = Sxx * Sxx + 2 * Sxy * Syx + Syy * Syy
    gux = ixx * ux + ixy * uy
    guy = ixy * ux + iyy * uy
    return {
        "u": u, "ux": ux, "uy": uy, "y": y,
        "W": W, "theta": theta, "eta": xp.cosh(u) * theta,
        "gxx": gxx, "gxy": gxy, "gyy": gyy, "det": det,
        "ixx": ixx, "ixy": ixy, "iyy": iyy,
        "axx": axx, "axy": axy, "ayy": ayy,
        "H": H, "A2": A2,
        "grad_u_x": gux, "grad_u_y": guy,
        "grad_u_sq": ux * gux + uy * guy,
    }


def mean_curvature_and_angle(u, ux, uy, uxx, uxy, uyy, y):
    """Fast path for the flow: (H, Theta) only."""
    f = graph_jet_fields(u, ux, uy, uxx, uxy, uyy, y)
    return f["H"], f["theta"]


def principal_frame(f: dict) -> dict:
    """Principal curvatures/directions from a field dict (numpy, vectorized).

    kappa is ascending; ``dirs[..., :, i]`` holds the (x, y) coefficients of e_i in the
    (F_x, F_y) basis; ``n_dot[..., i] = <e_i, n>``.
    """
    gxx, gxy, det = np.asarray(f["gxx"]), np.asarray(f["gxy"]), np.asarray(f["det"])
    shape = gxx.shape
    # Gram-Schmidt: e1 = F_x / |F_x|, e2 orthogonal completion
    E = np.zeros(shape + (2, 2))
    E[..., 0, 0] = 1.0 / np.sqrt(gxx)
    s = np.sqrt(det / gxx)
    E[..., 0, 1] = -gxy / gxx / s
    E[..., 1, 1] = 1.0 / s
    a = np.stack([np.stack([f["axx"], f["axy"]], -1), np.stack([f["axy"], f["ayy"]], -1)], -2)
    a = np.broadcast_to(a, shape + (2, 2))
    ahat = np.einsum("...ki,...kl,...lj->...ij", E, a, E)
    kappa, V = np.linalg.eigh(ahat)
    dirs = np.einsum("...ik,...kj->...ij", E, V)
    ux, uy = np.broadcast_to(f["ux"], shape), np.broadcast_to(f["uy"], shape)
    n_dot = dirs[..., 0, :] * ux[..., None] + dirs[..., 1, :] * uy[..., None]
    return {"kappa": kappa, "dirs": dirs, "n_dot": n_dot}


def tangent_normal_vectors(f: dict):
    """Ambient components (r, x, y) of F_x, F_y and nu."""
    ux, uy = np.asarray(f["ux"]), np.asarray(f["uy"])
    shape = np.broadcast(ux, f["u"]).shape
    one, zero = np.ones(shape), np.zeros(shape)
    ux, uy = np.broadcast_to(ux, shape), np.broadcast_to(uy, shape)
    Fx = np.stack([ux, one, zero], -1)
    Fy = np.stack([uy, zero, one], -1)
    cu2 = np.cosh(f["u"]) ** 2
    A = cu2 * np.cosh(f["y"]) ** 2
    W = np.asarray(f["W"])
    nu = np.stack([one, -ux / A, -uy / cu2], -1) / W[..., None]
    return Fx, Fy, nu


@dataclass(frozen=True)
class GeomSample:
    point: tuple
    u: float
    g: np.ndarray
    F_x: np.ndarray
    F_y: np.ndarray
    nu: np.ndarray
    theta: float
    a: np.ndarray
    H: float
    A2: float
    eta: float
    grad_u: np.ndarray
    kappa: np.ndarray
    principal_dirs: np.ndarray
    n_dot: np.ndarray


def _sample_from_fields(f: dict, point) -> GeomSample:
    theta = float(f["theta"])
    if not np.isfinite(theta) or theta <= 0.0:
        raise GraphLostError(f"graph property lost at {point}: Theta = {theta}", point, theta)
    pf = principal_frame(f)
    Fx, Fy, nu = tangent_normal_vectors(f)
    return GeomSample(
        point=tuple(float(c) for c in point),
        u=float(f["u"]),
        g=np.array([[f["gxx"], f["gxy"]], [f["gxy"], f["gyy"]]], dtype=float),
        F_x=Fx, F_y=Fy, nu=nu,
        theta=theta,
        a=np.array([[f["axx"], f["axy"]], [f["axy"], f["ayy"]]], dtype=float),
        H=float(f["H"]), A2=float(f["A2"]), eta=float(f["eta"]),
        grad_u=np.array([f["grad_u_x"], f["grad_u_y"]], dtype=float),
        kappa=pf["kappa"], principal_dirs=pf["dirs"], n_dot=pf["n_dot"],
    )


# -- analytic surfaces ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AnalyticGraph:
    """Height ``fn(x, y, params)``, jax-traceable; ``params`` is a pytree of floats."""

    fn: Callable
    params: tuple = ()
    chart: FermiChart | None = None
    kind: str = field(default="analytic", init=False)

    def height(self, x, y):
        return np.asarray(_vmapped(self.fn)(jnp.asarray(x, float), jnp.asarray(y, float), self.params))


@lru_cache(maxsize=None)
def _vmapped(fn):
    return jax.jit(jnp.vectorize(fn, excluded={2}))


def _const(x, y, p):
    return p[0] + 0.0 * x + 0.0 * y


def _sine(x, y, p):
    amp, L, Y, offset, kx, ky = p
    return offset + amp * jnp.sin(2 * jnp.pi * kx * x / L) * jnp.cos(jnp.pi * ky * y / (2 * Y))


def constant_graph(c: float, chart: FermiChart | None = None) -> AnalyticGraph:
    return AnalyticGraph(_const, (float(c),), chart)


def sine_graph(amplitude: float, L: float, Y: float, offset: float = 0.0, kx: float = 1.0,
               ky: float = 1.0, chart: FermiChart | None = None) -> AnalyticGraph:
    """offset + amplitude sin(2 pi kx x / L) cos(pi ky y / (2 Y))."""
    return AnalyticGraph(_sine, tuple(float(v) for v in (amplitude, L, Y, offset, kx, ky)), chart)


def _jet(fn, x, y, p):
    u = fn(x, y, p)
    ux, uy = jax.grad(fn, (0, 1))(x, y, p)
    (uxx, uxy), (_, uyy) = jax.hessian(fn, (0, 1))(x, y, p)
    return u, ux, uy, uxx, uxy, uyy


def _fields_jax(fn, x, y, p) -> dict:
    return graph_jet_fields(*_jet(fn, x, y, p), y, xp=jnp)


def _scalar(fn, name):
    return lambda x, y, p: _fields_jax(fn, x, y, p)[name]


def _metric_matrix(fn):
    def g(x, y, p):
        f = _fields_jax(fn, x, y, p)
        return jnp.array([[f["gxx"], f["gxy"]], [f["gxy"], f["gyy"]]])
    return g


def _induced_christoffel(fn, x, y, p):
    """(g, g^-1, Gamma[k, i, j]) of the induced metric."""
    gfun = _metric_matrix(fn)
    g = gfun(x, y, p)
    gi = jnp.linalg.inv(g)
    dgx, dgy = jax.jacfwd(gfun, (0, 1))(x, y, p)
    dg = jnp.stack([dgx, dgy])  # dg[l, i, j] = d_l g_ij
    low = 0.5 * (jnp.transpose(dg, (2, 0, 1)) + jnp.transpose(dg, (2, 1, 0)) - dg)
    return g, gi, jnp.einsum("kl,lij->kij", gi, low)


def _grad(f, x, y, p):
    return jnp.stack(jax.grad(f, (0, 1))(x, y, p))


def _laplacian(fn, f, x, y, p):
    _, gi, Gam = _induced_christoffel(fn, x, y, p)
    df = _grad(f, x, y, p)
    hf = jnp.array(jax.hessian(f, (0, 1))(x, y, p))
    return jnp.sum(gi * (hf - jnp.einsum("kij,k->ij", Gam, df)))


def _second_form(fn):
    def a(x, y, p):
        f = _fields_jax(fn, x, y, p)
        return jnp.array([[f["axx"], f["axy"]], [f["axy"], f["ayy"]]])
    return a


def _grad_A_sq(fn, x, y, p):
    """|nabla A|^2 with the induced Levi-Civita connection."""
    _, gi, Gam = _induced_christoffel(fn, x, y, p)
    afun = _second_form(fn)
    a = afun(x, y, p)
    dax, day = jax.jacfwd(afun, (0, 1))(x, y, p)
    da = jnp.stack([dax, day])  # da[k, i, j]
    Da = da - jnp.einsum("lki,lj->kij", Gam, a) - jnp.einsum("lkj,il->kij", Gam, a)
    return jnp.einsum("ab,cd,ef,ace,bdf->", gi, gi, gi, Da, Da)


def _static_extras(fn, x, y, p) -> dict:
    theta = _scalar(fn, "theta")
    eta = _scalar(fn, "eta")
    H = _scalar(fn, "H")
    return {
        "d_theta": _grad(theta, x, y, p),
        "d_H": _grad(H, x, y, p),
        "lap_u": _laplacian(fn, fn, x, y, p),
        "lap_theta": _laplacian(fn, theta, x, y, p),
        "lap_eta": _laplacian(fn, eta, x, y, p),
    }


def _dynamic_extras(fn, x, y, p) -> dict:
    H = _scalar(fn, "H")
    A2 = _scalar(fn, "A2")
    theta = _scalar(fn, "theta")
    alpha = lambda xx, yy, pp: theta(xx, yy, pp) ** 2  # noqa: E731
    return {
        "lap_H": _laplacian(fn, H, x, y, p),
        "lap_A2": _laplacian(fn, A2, x, y, p),
        "lap_alpha": _laplacian(fn, alpha, x, y, p),
        "grad_A_sq": _grad_A_sq(fn, x, y, p),
    }


LEVELS = ("basic", "static", "dynamic")


@lru_cache(maxsize=None)
def _batched(fn, level: str):
    def point(x, y, p):
        out = dict(_fields_jax(fn, x, y, p))
        if level in ("static", "dynamic"):
            out.update(_static_extras(fn, x, y, p))
        if level == "dynamic":
            out.update(_dynamic_extras(fn, x, y, p))
        return out

    return jax.jit(jax.vmap(point, in_axes=(0, 0, None)))


def analytic_fields(S: AnalyticGraph, xs, ys, level: str = "basic") -> dict:
    """All fields of ``S`` at the points (xs, ys) as numpy arrays.

    ``level``: "basic" (jet-level geometry), "static" (+ dTheta, dH, Laplacians of u, Theta,
    eta), "dynamic" (+ Laplacians of H, |A|^2, Theta^2 and |nabla A|^2).
    """
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    xs = jnp.atleast_1d(jnp.asarray(xs, float))
    ys = jnp.atleast_1d(jnp.asarray(ys, float))
    xs, ys = jnp.broadcast_arrays(xs, ys)
    out = _batched(S.fn, level)(xs.ravel(), ys.ravel(), S.params)
    return {k: np.asarray(v).reshape(xs.shape + np.shape(v)[1:]) for k, v in out.items()}


# -- discrete surfaces ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscreteGraph:
    chart: FermiChart
    u: np.ndarray
    scheme: str = "central"
    kind: str = field(default="discrete", init=False)

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        if u.shape != (self.chart.Nx, self.chart.Ny):
            raise ValueError(f"height field shape {u.shape} != ({self.chart.Nx}, {self.chart.Ny})")
        if not np.all(np.isfinite(u)):
            raise ValueError("height field has non-finite entries")
        if self.scheme not in ("central", "forward"):
            raise ValueError(f"unknown stencil scheme {self.scheme!r}")
        object.__setattr__(self, "u", u)

    @classmethod
    def from_analytic(cls, S: AnalyticGraph, chart: FermiChart, scheme: str = "central") -> "DiscreteGraph":
        X, Yg = chart.mesh()
        return cls(chart, S.height(X, Yg), scheme)


def pad_field(f: np.ndarray, width: int = 2) -> np.ndarray:
    """Ghost cells: periodic in x, even reflection about the wall nodes in y."""
    f = np.pad(f, ((width, width), (0, 0)), mode="wrap")
    return np.pad(f, ((0, 0), (width, width)), mode="reflect")


def grid_derivatives(f: np.ndarray, hx: float, hy: float, scheme: str = "central"):
    """(fx, fy, fxx, fxy, fyy) on the node grid."""
    p = pad_field(f, 2)
    c = p[2:-2, 2:-2]

    def s(i, j):
        return p[2 + i: p.shape[0] - 2 + i, 2 + j: p.shape[1] - 2 + j]

    if scheme == "central":
        fx = (s(1, 0) - s(-1, 0)) / (2 * hx)
        fy = (s(0, 1) - s(0, -1)) / (2 * hy)
        fxx = (s(1, 0) - 2 * c + s(-1, 0)) / hx**2
        fyy = (s(0, 1) - 2 * c + s(0, -1)) / hy**2
        fxy = (s(1, 1) - s(1, -1) - s(-1, 1) + s(-1, -1)) / (4 * hx * hy)
    elif scheme == "forward":
        fx = (s(1, 0) - c) / hx
        fy = (s(0, 1) - c) / hy
        fxx = (s(2, 0) - 2 * s(1, 0) + c) / hx**2
        fyy = (s(0, 2) - 2 * s(0, 1) + c) / hy**2
        fxy = (s(1, 1) - s(1, 0) - s(0, 1) + c) / (hx * hy)
    else:
        raise ValueError(f"unknown stencil scheme {scheme!r}")
    return fx, fy, fxx, fxy, fyy


def grid_gradient(f, hx, hy, scheme="central"):
    fx, fy, *_ = grid_derivatives(f, hx, hy, scheme)
    return fx, fy


def discrete_fields(S: DiscreteGraph) -> dict:
    ch = S.chart
    _, Yg = ch.mesh()
    jet = grid_derivatives(S.u, ch.hx, ch.hy, S.scheme)
    return graph_jet_fields(S.u, *jet, Yg)


def discrete_laplacian(f: dict, values: np.ndarray, hx: float, hy: float, scheme: str = "central") -> np.ndarray:
    """g^ij (d_i d_j v - Gamma^k_ij d_k v), induced Christoffels from differences of g."""
    if np.any(f["det"] <= DET_FLOOR):
        raise DegenerateMetricError("induced metric is degenerate (det g <= 1e-14)")
    gxx_x, gxx_y = grid_gradient(f["gxx"], hx, hy, scheme)
    gxy_x, gxy_y = grid_gradient(f["gxy"], hx, hy, scheme)
    gyy_x, gyy_y = grid_gradient(f["gyy"], hx, hy, scheme)
    # Gamma_{l,ij} = 0.5 (d_i g_jl + d_j g_il - d_l g_ij)
    Lxxx = 0.5 * gxx_x
    Lxxy = 0.5 * gxx_y
    Lxyy = gxy_y - 0.5 * gyy_x
    Lyxx = gxy_x - 0.5 * gxx_y
    Lyxy = 0.5 * gyy_x
    Lyyy = 0.5 * gyy_y
    ixx, ixy, iyy = f["ixx"], f["ixy"], f["iyy"]
    # contract first with g^ij: c_l = g^ij Gamma_{l,ij}
    cx = ixx * Lxxx + 2 * ixy * Lxxy + iyy * Lxyy
    cy = ixx * Lyxx + 2 * ixy * Lyxy + iyy * Lyyy
    vx, vy, vxx, vxy, vyy = grid_derivatives(values, hx, hy, scheme)
    # Gamma^k contraction: g^ij Gamma^k_ij d_k v = g^{kl} c_l d_k v
    gk_x = ixx * cx + ixy * cy
    gk_y = ixy * cx + iyy * cy
    return ixx * vxx + 2 * ixy * vxy + iyy * vyy - (gk_x * vx + gk_y * vy)


def discrete_static_fields(S: DiscreteGraph) -> dict:
    """Field dict plus the same derivative extras as ``analytic_fields(level="static")``."""
    f = dict(discrete_fields(S))
    hx, hy = S.chart.hx, S.chart.hy
    f["d_theta"] = np.stack(grid_gradient(f["theta"], hx, hy, S.scheme), -1)
    f["d_H"] = np.stack(grid_gradient(f["H"], hx, hy, S.scheme), -1)
    f["lap_u"] = discrete_laplacian(f, S.u, hx, hy, S.scheme)
    f["lap_theta"] = discrete_laplacian(f, f["theta"], hx, hy, S.scheme)
    f["lap_eta"] = discrete_laplacian(f, f["eta"], hx, hy, S.scheme)
    return f


# -- public operations ---------------------------------------------------------------

def _node_index(chart: FermiChart, p, tol=1e-9):
    x, y = p
    i = int(round((x % chart.L) / chart.hx)) % chart.Nx
    j = int(round((y + chart.Y) / chart.hy))
    if not (0 <= j < chart.Ny) or abs(chart.x[i] - (x % chart.L)) > tol * max(1, chart.L) \
            or abs(chart.y[j] - y) > tol * max(1, chart.Y):
        raise ValueError(f"point {p} is not a grid node of the chart")
    return i, j


def sample_geometry(S, p) -> GeomSample:
    """All pointwise quantities of ``S`` at chart point ``p`` (a grid node for discrete S)."""
    x, y = p
    if S.chart is not None and not S.chart.contains(p):
        raise ValueError(f"point {p} outside the chart")
    if S.kind == "analytic":
        f = {k: v[0] for k, v in analytic_fields(S, [x], [y]).items()}
    else:
        i, j = _node_index(S.chart, p)
        f = {k: (v[i, j] if np.ndim(v) == 2 else v) for k, v in discrete_fields(S).items()}
    return _sample_from_fields(f, p)


def surface_laplacian(S, f, p=None):
    """Laplace-Beltrami of ``f`` on ``S``.

    Analytic S: ``f`` is a field name ("u", "theta", "eta", "H", "A2") or a jax-traceable
    ``f(x, y, params)``; ``p`` is a point or a pair of arrays. Discrete S: ``f`` is a grid
    array (or field name); returns the whole grid, or the node value when ``p`` is given.
    """
    if S.kind == "analytic":
        if isinstance(f, str):
            func = S.fn if f == "u" else _scalar(S.fn, f)
        else:
            func = f
        xs, ys = p
        xs = jnp.atleast_1d(jnp.asarray(xs, float))
        ys = jnp.atleast_1d(jnp.asarray(ys, float))
        g = jax.vmap(lambda a, b: jnp.linalg.det(_metric_matrix(S.fn)(a, b, S.params)))(xs, ys)
        if np.any(np.asarray(g) <= DET_FLOOR):
            raise DegenerateMetricError("induced metric is degenerate (det g <= 1e-14)")
        lap = jax.vmap(lambda a, b: _laplacian(S.fn, func, a, b, S.params))(xs, ys)
        out = np.asarray(lap)
        return float(out[0]) if np.ndim(p[0]) == 0 else out
    fd = discrete_fields(S)
    values = S.u if isinstance(f, str) and f == "u" else (fd[f] if isinstance(f, str) else np.asarray(f, float))
    lap = discrete_laplacian(fd, values, S.chart.hx, S.chart.hy, S.scheme)
    if p is None:
        return lap
    i, j = _node_index(S.chart, p)
    return float(lap[i, j])


# -- normal push (one explicit Euler step of dF/dt = -H nu) --------------------------

def _displacement_jax(fn, x, y, p):
    """-H nu in ambient coordinates (r, x, y)."""
    f = _fields_jax(fn, x, y, p)
    cu2 = jnp.cosh(f["u"]) ** 2
    A = cu2 * jnp.cosh(y) ** 2
    H, W = f["H"], f["W"]
    return jnp.stack([-H / W, H * f["ux"] / (A * W), H * f["uy"] / (cu2 * W)])


@lru_cache(maxsize=None)
def _pushed_fn(fn):
    """Height of the pushed surface over base point (x', y'); params = (base_params, eps).

    Newton on (x, y) + eps * d_xy(x, y) = (x', y'), differentiated implicitly.
    """
    def height(xp_, yp_, params):
        base, eps = params
        tgt = jnp.stack([xp_, yp_])

        def F(q):
            d = _displacement_jax(fn, q[0], q[1], base)
            return q + eps * d[1:] - tgt

        def solve(G, q0):
            def body(state):
                q, _, k = state
                step = jnp.linalg.solve(jax.jacfwd(G)(q), G(q))
                return q - step, jnp.max(jnp.abs(step)), k + 1

            def cond(state):
                _, err, k = state
                return (err > NEWTON_TOL) & (k < NEWTON_MAXITER)

            q, _, _ = jax.lax.while_loop(cond, body, (q0, jnp.inf, 0))
            return q

        def tsolve(G, v):
            return jnp.linalg.solve(jax.jacfwd(G)(jnp.zeros_like(v)), v)

        q = jax.lax.custom_root(F, tgt, solve, tsolve)
        d = _displacement_jax(fn, q[0], q[1], base)
        return fn(q[0], q[1], base) + eps * d[0]

    return height


def push_displacement(S: AnalyticGraph, xs, ys) -> np.ndarray:
    """-H nu at material points, shape (..., 3)."""
    xs, ys = np.broadcast_arrays(np.asarray(xs, float), np.asarray(ys, float))
    out = _disp_batched(S.fn)(jnp.asarray(xs.ravel()), jnp.asarray(ys.ravel()), S.params)
    return np.asarray(out).reshape(xs.shape + (3,))


@lru_cache(maxsize=None)
def _disp_batched(fn):
    return jax.jit(jax.vmap(lambda x, y, p: _displacement_jax(fn, x, y, p), in_axes=(0, 0, None)))


def _check_pushable(theta_min: float):
    if not theta_min > PUSH_THETA_MIN:
        raise GraphLostError(
            f"normal push needs min Theta > {PUSH_THETA_MIN}, got {theta_min}", value=theta_min)


def normal_push(S, eps: float):
    """Move every point by -eps H nu and re-express the result as a height field."""
    if eps == 0:
        return S
    if S.kind == "analytic":
        if S.chart is not None:
            X, Yg = FermiChart(S.chart.L, S.chart.Y, 32, 17).mesh()
            f = analytic_fields(S, X, Yg)
            _check_pushable(float(np.min(f["theta"])))
        return AnalyticGraph(_pushed_fn(S.fn), (S.params, float(eps)), S.chart)
    return _push_discrete(S, eps)


def _periodic_spline(chart: FermiChart, values: np.ndarray, pad: int = 4) -> RectBivariateSpline:
    p = pad_field(values, pad)
    xs = (np.arange(-pad, chart.Nx + pad)) * chart.hx
    ys = -chart.Y + np.arange(-pad, chart.Ny + pad) * chart.hy
    return RectBivariateSpline(xs, ys, p, kx=3, ky=3)


def _push_discrete(S: DiscreteGraph, eps: float) -> DiscreteGraph:
    ch = S.chart
    f = discrete_fields(S)
    _check_pushable(float(np.min(f["theta"])))
    Fx, Fy, nu = tangent_normal_vectors(f)
    disp = -f["H"][..., None] * nu
    sx = _periodic_spline(ch, disp[..., 1])
    sy = _periodic_spline(ch, disp[..., 2])
    sr = _periodic_spline(ch, disp[..., 0])
    su = _periodic_spline(ch, S.u)
    X, Yg = ch.mesh()
    qx, qy = X - eps * disp[..., 1], Yg - eps * disp[..., 2]
    for _ in range(NEWTON_MAXITER):
        rx = qx + eps * sx.ev(qx, qy) - X
        ry = qy + eps * sy.ev(qx, qy) - Yg
        j11 = 1 + eps * sx.ev(qx, qy, dx=1)
        j12 = eps * sx.ev(qx, qy, dy=1)
        j21 = eps * sy.ev(qx, qy, dx=1)
        j22 = 1 + eps * sy.ev(qx, qy, dy=1)
        det = j11 * j22 - j12 * j21
        if np.any(det <= 0):
            raise GraphLostError("normal push folded the surface over the base")
        dx = (j22 * rx - j12 * ry) / det
        dy = (-j21 * rx + j11 * ry) / det
        qx, qy = qx - dx, qy - dy
        if max(np.max(np.abs(dx)), np.max(np.abs(dy))) < NEWTON_TOL:
            break
    new_u = su.ev(qx, qy) + eps * sr.ev(qx, qy)
    out = DiscreteGraph(ch, new_u, S.scheme)
    _check_theta_positive(discrete_fields(out)["theta"])
    return out


def _check_theta_positive(theta):
    m = float(np.min(theta))
    if not np.isfinite(m) or m <= 0:
        raise GraphLostError(f"graph property lost: min Theta = {m}", value=m)
