"""Umbilic barriers and the angle lower bound, in closed form and by RK4.

R(t) = arcsinh(e^{-2t} sinh a0) solves dR/dt = -2 tanh R (level sets moving by MCF).
phi(t) = (eps + s e^{-4t}) / (1 + s e^{-4t}), s = sinh^2 a0, bounds min Theta^2 from below
for compliant data; it solves the equality case
    phi' = -4 (1 - phi) s e^{-4t} / (1 + s e^{-4t}).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

DEFAULT_DT = 1e-3


@dataclass(frozen=True)
class BarrierCurve:
    a0: float

    def __call__(self, t):
        return umbilic_exact(self.a0, t)


@dataclass(frozen=True)
class AngleBoundCurve:
    a0: float
    eps: float

    def __post_init__(self):
        if not 0.0 <= self.eps < 1.0:
            raise ValueError(f"eps must lie in [0, 1), got {self.eps}")

    def __call__(self, t):
        return angle_lower_bound(self.a0, self.eps, t)

    @property
    def phi0(self) -> float:
        return float(angle_lower_bound(self.a0, self.eps, 0.0))


@dataclass(frozen=True)
class SampledCurve:
    t: np.ndarray
    values: np.ndarray


def umbilic_exact(a0, t):
    return np.arcsinh(np.exp(-2.0 * np.asarray(t, float)) * np.sinh(a0))


def rk4(f: Callable, y0: float, t_max: float, dt: float) -> SampledCurve:
    """Classic four-stage Runge-Kutta on a uniform grid; the last step is shortened to hit t_max."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if t_max < 0:
        raise ValueError("t_max must be nonnegative")
    n = int(np.ceil(t_max / dt - 1e-9))
    ts = np.minimum(np.arange(n + 1) * dt, t_max)
    ys = np.empty(n + 1)
    y = float(y0)
    ys[0] = y
    for k in range(n):
        t, h = ts[k], ts[k + 1] - ts[k]
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[k + 1] = y
    return SampledCurve(ts, ys)


def umbilic_integrate(a0: float, t_max: float, dt: float = DEFAULT_DT) -> SampledCurve:
    return rk4(lambda t, r: -2.0 * np.tanh(r), a0, t_max, dt)


def squeeze_bound(a0, t):
    R = umbilic_exact(a0, t)
    return -R, R


def angle_threshold(a0):
    if np.any(np.asarray(a0) < 0):
        raise ValueError("a0 must be nonnegative")
    return np.tanh(a0)


def angle_lower_bound(a0, eps, t):
    s = np.sinh(a0) ** 2 * np.exp(-4.0 * np.asarray(t, float))
    return (eps + s) / (1.0 + s)


def eps_from_phi0(a0: float, phi0: float) -> float:
    """Invert phi(0) = (eps + s) / (1 + s) for eps; negative means phi0 < tanh^2(a0)."""
    s = np.sinh(a0) ** 2
    return float(phi0 * (1.0 + s) - s)


def angle_ode_rhs(a0: float):
    s = np.sinh(a0) ** 2

    def f(t, phi):
        e = s * np.exp(-4.0 * t)
        return -4.0 * (1.0 - phi) * e / (1.0 + e)

    return f


def angle_ode_integrate(a0: float, phi0: float, t_max: float, dt: float = DEFAULT_DT) -> SampledCurve:
    if not 0.0 < phi0 <= 1.0:
        raise ValueError(f"phi0 must lie in (0, 1], got {phi0}")
    return rk4(angle_ode_rhs(a0), phi0, t_max, dt)
