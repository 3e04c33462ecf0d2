"""Ambient Fuchsian 3-manifold dr^2 + cosh^2(r) g0 over the Fermi chart.

Coordinates are ordered (r, x, y); the metric is diag(1, cosh^2 r cosh^2 y, cosh^2 r).
Tangent vectors and 2-tensors are plain component arrays in that ordering.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FD_STEP = 1e-4
CONSISTENCY_TOL = 1e-8


class ConsistencyError(RuntimeError):
    """Two independent evaluations of the same closed form disagree."""


@dataclass(frozen=True)
class AmbientPoint:
    r: float
    x: float
    y: float

    @property
    def coords(self) -> np.ndarray:
        return np.array([self.r, self.x, self.y], dtype=float)

    @classmethod
    def from_coords(cls, c) -> "AmbientPoint":
        return cls(float(c[0]), float(c[1]), float(c[2]))


def _coords(p) -> np.ndarray:
    return p.coords if isinstance(p, AmbientPoint) else np.asarray(p, dtype=float)


def metric_diagonal(r, y, xp=np):
    """(g_rr, g_xx, g_yy); works elementwise on arrays or jax tracers."""
    cr2 = xp.cosh(r) ** 2
    return xp.ones_like(cr2), cr2 * xp.cosh(y) ** 2, cr2


def ambient_metric(p) -> np.ndarray:
    r, _, y = _coords(p)
    return np.diag(metric_diagonal(r, y))


def christoffel(p) -> np.ndarray:
    """Gamma[k, i, j] from hand differentiation of the diagonal metric."""
    r, _, y = _coords(p)
    tr, ty = np.tanh(r), np.tanh(y)
    gxx = np.cosh(r) ** 2 * np.cosh(y) ** 2
    gyy = np.cosh(r) ** 2
    G = np.zeros((3, 3, 3))
    G[0, 1, 1] = -tr * gxx
    G[0, 2, 2] = -tr * gyy
    G[1, 0, 1] = G[1, 1, 0] = tr
    G[1, 1, 2] = G[1, 2, 1] = ty
    G[2, 0, 2] = G[2, 2, 0] = tr
    G[2, 1, 1] = -np.sinh(y) * np.cosh(y)
    return G


def inner(p, X, Y) -> float:
    return float(np.asarray(X) @ ambient_metric(p) @ np.asarray(Y))


def norm(p, X) -> float:
    return float(np.sqrt(max(inner(p, X, X), 0.0)))


def covariant_derivative(p, X, V, dV) -> np.ndarray:
    """nabla_X V given V's components and coordinate Jacobian dV[k, i] = d_i V^k at p."""
    X = np.asarray(X, dtype=float)
    return np.asarray(dV) @ X + np.einsum("kij,i,j->k", christoffel(p), X, np.asarray(V))


# -- finite-difference oracles -------------------------------------------------

def christoffel_fd(p, h: float = FD_STEP, metric_fn=ambient_metric) -> np.ndarray:
    c = _coords(p)
    dg = np.empty((3, 3, 3))  # dg[l, i, j] = d_l g_ij
    for l in range(3):
        e = np.zeros(3)
        e[l] = h
        dg[l] = (metric_fn(c + e) - metric_fn(c - e)) / (2 * h)
    ginv = np.linalg.inv(metric_fn(c))
    # low[l, i, j] = 0.5 (d_i g_jl + d_j g_il - d_l g_ij)
    low = 0.5 * (np.transpose(dg, (2, 0, 1)) + np.transpose(dg, (2, 1, 0)) - dg)
    return np.einsum("kl,lij->kij", ginv, low)


def riemann_fd(p, h: float = FD_STEP, metric_fn=ambient_metric) -> np.ndarray:
    """R[l, i, j, k] with R(d_i, d_j) d_k = R^l_{ijk} d_l, built only from the metric."""
    c = _coords(p)
    dG = np.empty((3, 3, 3, 3))  # dG[m, k, i, j] = d_m Gamma^k_ij
    for m in range(3):
        e = np.zeros(3)
        e[m] = h
        dG[m] = (christoffel_fd(c + e, h, metric_fn) - christoffel_fd(c - e, h, metric_fn)) / (2 * h)
    G = christoffel_fd(c, h, metric_fn)
    R = (np.einsum("iljk->lijk", dG) - np.einsum("jlik->lijk", dG)
         + np.einsum("lim,mjk->lijk", G, G) - np.einsum("ljm,mik->lijk", G, G))
    return R


def sectional_curvature_fd(p, X, Y, h: float = FD_STEP) -> float:
    g = ambient_metric(p)
    Rlow = np.einsum("ml,lijk->mijk", g, riemann_fd(p, h))
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    num = np.einsum("mijk,i,j,k,m->", Rlow, X, Y, Y, X)
    den = (X @ g @ X) * (Y @ g @ Y) - (X @ g @ Y) ** 2
    return float(num / den)


def ricci_fd(p, h: float = FD_STEP) -> np.ndarray:
    return np.einsum("iijk->jk", riemann_fd(p, h))


# -- ambient objects along the fibres ----------------------------------------

N_FIELD = np.array([1.0, 0.0, 0.0])


def field_V(p) -> np.ndarray:
    """V = cosh(r) d_r."""
    r = _coords(p)[0]
    return np.array([np.cosh(r), 0.0, 0.0])


def field_V_jacobian(p) -> np.ndarray:
    r = _coords(p)[0]
    dV = np.zeros((3, 3))
    dV[0, 0] = np.sinh(r)
    return dV


def killing_residual(p, X) -> float:
    """|nabla_X V - sinh(r) X| in the ambient metric."""
    r = _coords(p)[0]
    res = covariant_derivative(p, X, field_V(p), field_V_jacobian(p)) - np.sinh(r) * np.asarray(X, float)
    return norm(p, res)


def nabla_n_closed(p, X) -> np.ndarray:
    r = _coords(p)[0]
    X = np.asarray(X, dtype=float)
    return np.tanh(r) * (X - inner(p, X, N_FIELD) * N_FIELD)


def nabla_n(p, X) -> np.ndarray:
    """nabla_X n; the Christoffel evaluation must match tanh(r)(X - <X,n>n)."""
    closed = nabla_n_closed(p, X)
    via_gamma = covariant_derivative(p, X, N_FIELD, np.zeros((3, 3)))
    scale = max(1.0, norm(p, X))
    if norm(p, via_gamma - closed) > CONSISTENCY_TOL * scale:
        raise ConsistencyError(f"nabla_X n mismatch at {p}: {via_gamma} vs {closed}")
    return closed


def levelset_shape(r: float) -> tuple[float, float]:
    """(principal curvature, mean curvature) of the level set r = const w.r.t. n = d_r."""
    k = float(np.tanh(r))
    return k, 2.0 * k


def lie_derivative_ng_closed(p) -> np.ndarray:
    r = _coords(p)[0]
    T = ambient_metric(p).copy()
    T[0, 0] = 0.0
    return 2.0 * np.tanh(r) * T


def lie_derivative_ng(p) -> np.ndarray:
    """(L_n g)(X, Y) = <nabla_X n, Y> + <X, nabla_Y n>, checked against 2 tanh(r)(g - dr dr)."""
    g = ambient_metric(p)
    # column j of D is nabla_{d_j} n
    D = np.einsum("kij,j->ki", christoffel(p), N_FIELD)
    via_gamma = g @ D
    via_gamma = via_gamma + via_gamma.T
    closed = lie_derivative_ng_closed(p)
    if np.max(np.abs(via_gamma - closed)) > CONSISTENCY_TOL * max(1.0, np.max(np.abs(g))):
        raise ConsistencyError(f"L_n g mismatch at {p}")
    return closed


def lie_derivative_ng_arrays(r, y):
    """Nonzero components (T_xx, T_yy) of L_n g and their covariant derivatives.

    Returns dict with T (..., 3, 3) and DT (..., 3, 3, 3) where DT[..., k, i, j] = (nabla_k T)_ij,
    vectorized over arrays r, y.
    """
    r = np.asarray(r, float)
    y = np.asarray(y, float)
    shape = np.broadcast(r, y).shape
    r = np.broadcast_to(r, shape)
    y = np.broadcast_to(y, shape)
    s2r = np.sinh(2 * r)
    c2r = np.cosh(2 * r)
    cy2 = np.cosh(y) ** 2
    T = np.zeros(shape + (3, 3))
    T[..., 1, 1] = s2r * cy2
    T[..., 2, 2] = s2r
    dT = np.zeros(shape + (3, 3, 3))  # dT[..., k, i, j] = d_k T_ij
    dT[..., 0, 1, 1] = 2 * c2r * cy2
    dT[..., 2, 1, 1] = s2r * 2 * np.sinh(y) * np.cosh(y)
    dT[..., 0, 2, 2] = 2 * c2r
    Gam = christoffel_arrays(r, y)
    DT = dT - np.einsum("...lki,...lj->...kij", Gam, T) - np.einsum("...lkj,...il->...kij", Gam, T)
    return {"T": T, "DT": DT}


def christoffel_arrays(r, y) -> np.ndarray:
    """Vectorized ``christoffel``: shape (..., 3, 3, 3)."""
    r = np.asarray(r, float)
    y = np.asarray(y, float)
    shape = np.broadcast(r, y).shape
    tr, ty = np.tanh(r), np.tanh(y)
    cr2 = np.cosh(r) ** 2
    G = np.zeros(shape + (3, 3, 3))
    G[..., 0, 1, 1] = -tr * cr2 * np.cosh(y) ** 2
    G[..., 0, 2, 2] = -tr * cr2
    G[..., 1, 0, 1] = G[..., 1, 1, 0] = tr
    G[..., 1, 1, 2] = G[..., 1, 2, 1] = ty
    G[..., 2, 0, 2] = G[..., 2, 2, 0] = tr
    G[..., 2, 1, 1] = -np.sinh(y) * np.cosh(y)
    return G


def ricci_nu_nu(nu, p, tol: float = 1e-10) -> float:
    """Ric(nu, nu) for a unit vector; constant curvature -1 gives -2."""
    if abs(norm(p, nu) - 1.0) > tol:
        raise ValueError(f"ricci_nu_nu needs a unit vector, got |nu| = {norm(p, nu)}")
    return -2.0
