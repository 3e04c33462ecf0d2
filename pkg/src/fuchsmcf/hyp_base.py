"""Hyperbolic base surface: Poincare disk arithmetic, the genus-2 octagon group,
and the Fermi chart on which the flow grid lives.

Disk points are stored as ``DiskPoint(x, y)``; Mobius maps in the disk-preserving
SU(1,1) form ``z -> (alpha z + beta) / (conj(beta) z + conj(alpha))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DET_TOL = 1e-12


class OutsideDiskError(ValueError):
    pass


class OutsideChartError(ValueError):
    pass


class ReductionError(RuntimeError):
    pass


@dataclass(frozen=True)
class DiskPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise OutsideDiskError(f"non-finite disk point ({self.x}, {self.y})")
        if self.x * self.x + self.y * self.y >= 1.0:
            raise OutsideDiskError(f"point ({self.x}, {self.y}) is not inside the open unit disk")

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)

    @classmethod
    def from_complex(cls, z: complex) -> "DiskPoint":
        return cls(float(z.real), float(z.imag))


def _as_complex(z) -> complex:
    if isinstance(z, DiskPoint):
        return z.z
    z = complex(z)
    if abs(z) >= 1.0:
        raise OutsideDiskError(f"point {z} is not inside the open unit disk")
    return z


@dataclass(frozen=True)
class MobiusMap:
    """Disk automorphism with |alpha|^2 - |beta|^2 = 1."""

    alpha: complex
    beta: complex

    def __post_init__(self):
        a, b = complex(self.alpha), complex(self.beta)
        det = abs(a) ** 2 - abs(b) ** 2
        if abs(det - 1.0) > DET_TOL * max(1.0, abs(a) ** 2):
            raise ValueError(f"|alpha|^2 - |beta|^2 = {det!r}, expected 1")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @classmethod
    def normalized(cls, alpha: complex, beta: complex) -> "MobiusMap":
        s = np.sqrt(abs(alpha) ** 2 - abs(beta) ** 2)
        return cls(alpha / s, beta / s)

    @classmethod
    def identity(cls) -> "MobiusMap":
        return cls(1.0 + 0j, 0j)

    @classmethod
    def rotation(cls, angle: float) -> "MobiusMap":
        return cls(np.exp(0.5j * angle), 0j)

    @classmethod
    def translation(cls, direction: float, length: float) -> "MobiusMap":
        """Hyperbolic translation of the given length along the diameter at angle ``direction``."""
        return cls(complex(np.cosh(length / 2)), np.sinh(length / 2) * np.exp(1j * direction))

    @property
    def matrix(self) -> np.ndarray:
        a, b = self.alpha, self.beta
        return np.array([[a, b], [b.conjugate(), a.conjugate()]])

    def __call__(self, z):
        return mobius_apply(self, z)

    def __matmul__(self, other: "MobiusMap") -> "MobiusMap":
        a1, b1, a2, b2 = self.alpha, self.beta, other.alpha, other.beta
        return MobiusMap.normalized(a1 * a2 + b1 * b2.conjugate(), a1 * b2 + b1 * a2.conjugate())

    def inverse(self) -> "MobiusMap":
        return MobiusMap(self.alpha.conjugate(), -self.beta)

    @property
    def trace(self) -> float:
        return 2.0 * self.alpha.real

    def translation_length(self) -> float:
        t = abs(self.trace)
        return 2.0 * float(np.arccosh(t / 2.0)) if t > 2.0 else 0.0

    def distance_to(self, other: "MobiusMap") -> float:
        """Coefficient-wise distance modulo the sign ambiguity of SU(1,1)."""
        d1 = max(abs(self.alpha - other.alpha), abs(self.beta - other.beta))
        d2 = max(abs(self.alpha + other.alpha), abs(self.beta + other.beta))
        return min(d1, d2)


def mobius_apply(m: MobiusMap, z):
    """Apply ``m`` to a disk point; returns the same type it was given."""
    w = _as_complex(z)
    out = (m.alpha * w + m.beta) / (m.beta.conjugate() * w + m.alpha.conjugate())
    if abs(out) >= 1.0:
        # only reachable through roundoff for points within ~1e-16 of the circle
        raise OutsideDiskError(f"image {out} left the disk")
    return DiskPoint.from_complex(out) if isinstance(z, DiskPoint) else out


def hyperbolic_distance(z1, z2) -> float:
    a, b = _as_complex(z1), _as_complex(z2)
    q = abs(a - b) / abs(1.0 - a.conjugate() * b)
    return 2.0 * float(np.arctanh(min(q, 1.0 - 1e-17)))


# regular octagon with interior angle pi/4: cosh(inradius) = cot(pi/8), cosh(circumradius) = cot^2(pi/8)
OCTAGON_INRADIUS = float(np.arccosh(1.0 / np.tan(np.pi / 8)))
OCTAGON_CIRCUMRADIUS = float(np.arccosh(1.0 / np.tan(np.pi / 8) ** 2))


def _inverse_index(k: int) -> int:
    return (k + 4) % 8


@dataclass(frozen=True)
class FuchsianGroupOctagon:
    """Side pairings of the regular {8,8} octagon centred at 0.

    ``generators[k]`` translates along the diameter at angle k*pi/4 by twice the
    inradius, carrying side k+4 onto side k; ``generators[k+4]`` is its inverse.
    The commutator basis g1..g4 is (m0, m0^-1 m1, m0^-1 m1 m2^-1, m2 m3^-1), which
    turns the opposite-side relation into [g1, g2][g3, g4] = 1.
    """

    generators: tuple[MobiusMap, ...]
    # words in generator indices, applied left to right as a product
    basis_words: tuple[tuple[int, ...], ...] = (
        (0,),
        (4, 1),
        (4, 1, 6),
        (2, 7),
    )
    # opposite-side boundary relation m0 m1^-1 m2 m3^-1 m0^-1 m1 m2^-1 m3
    side_relator: tuple[int, ...] = (0, 5, 2, 7, 4, 1, 6, 3)

    def word_map(self, word) -> MobiusMap:
        m = MobiusMap.identity()
        for k in word:
            m = m @ self.generators[k]
        return m

    @cached_property
    def basis(self) -> tuple[MobiusMap, ...]:
        return tuple(self.word_map(w) for w in self.basis_words)

    def relator_product(self) -> MobiusMap:
        """g1 g2 g1^-1 g2^-1 g3 g4 g3^-1 g4^-1."""
        g1, g2, g3, g4 = self.basis
        return g1 @ g2 @ g1.inverse() @ g2.inverse() @ g3 @ g4 @ g3.inverse() @ g4.inverse()

    def side_relator_product(self) -> MobiusMap:
        return self.word_map(self.side_relator)

    @property
    def vertices(self) -> np.ndarray:
        rho = np.tanh(OCTAGON_CIRCUMRADIUS / 2)
        return rho * np.exp(1j * (np.pi / 8 + np.arange(8) * np.pi / 4))

    def contains(self, z, tol: float = 1e-12) -> bool:
        """Closed Dirichlet-domain test: no side pairing brings z closer to 0."""
        w = _as_complex(z)
        d0 = hyperbolic_distance(0j, w)
        return all(hyperbolic_distance(0j, g(w)) >= d0 - tol for g in self.generators)


def octagon_generators() -> FuchsianGroupOctagon:
    two_d = 2.0 * OCTAGON_INRADIUS
    gens = tuple(MobiusMap.translation(k * np.pi / 4, two_d) for k in range(8))
    return FuchsianGroupOctagon(gens)


def apply_word(G: FuchsianGroupOctagon, word, z):
    """m_{w0}(m_{w1}(...m_{wn}(z)))."""
    for k in reversed(list(word)):
        z = mobius_apply(G.generators[k], z)
    return z


def reduce_to_fundamental_domain(G: FuchsianGroupOctagon, z, max_steps: int = 10_000, tol: float = 1e-12):
    """Greedy Dirichlet reduction toward the centre.

    Returns ``(z0, word)`` with z0 in the closed octagon and ``apply_word(G, word, z0) == z``.
    Each step applies the pairing that most decreases the distance to 0 (lowest index on ties).
    """
    w = _as_complex(z)
    word: list[int] = []
    for _ in range(max_steps):
        d0 = hyperbolic_distance(0j, w)
        best_k, best_d = -1, d0 - tol
        for k, g in enumerate(G.generators):
            d = hyperbolic_distance(0j, g(w))
            if d < best_d - tol:
                best_k, best_d = k, d
        if best_k < 0:
            out = DiskPoint.from_complex(w) if isinstance(z, DiskPoint) else w
            return out, word
        w = G.generators[best_k](w)
        word.append(_inverse_index(best_k))
    raise ReductionError(f"reduction of {z} did not terminate within {max_steps} steps")


@dataclass(frozen=True)
class FermiChart:
    """Rectangle x in [0, L) (periodic), y in [-Y, Y] with metric dy^2 + cosh^2(y) dx^2.

    Nodes: x_i = i L / Nx, y_j = -Y + 2 Y j / (Ny - 1) (both walls are nodes).
    """

    L: float = 2 * np.pi
    Y: float = 1.0
    Nx: int = 128
    Ny: int = 64

    def __post_init__(self):
        if not (self.L > 0 and self.Y > 0 and np.isfinite(self.L) and np.isfinite(self.Y)):
            raise ValueError("chart needs L > 0 and Y > 0")
        if self.Nx < 4 or self.Ny < 4:
            raise ValueError("chart needs at least 4 nodes per direction")

    @property
    def hx(self) -> float:
        return self.L / self.Nx

    @property
    def hy(self) -> float:
        return 2 * self.Y / (self.Ny - 1)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.Nx) * self.hx

    @property
    def y(self) -> np.ndarray:
        return -self.Y + np.arange(self.Ny) * self.hy

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    def contains(self, p, tol: float = 1e-12) -> bool:
        x, y = p
        return bool(np.isfinite(x) and abs(y) <= self.Y + tol)

    def refined(self, factor: int = 2) -> "FermiChart":
        return FermiChart(self.L, self.Y, self.Nx * factor, (self.Ny - 1) * factor + 1)


def fermi_metric(chart: FermiChart, p) -> np.ndarray:
    """Base metric at (x, y) in (x, y) ordering: diag(cosh^2 y, 1)."""
    if not chart.contains(p):
        raise OutsideChartError(f"point {p} outside chart |y| <= {chart.Y}")
    _, y = p
    return np.diag([np.cosh(y) ** 2, 1.0])


def gauss_curvature_fd(metric_fn, p, h: float = 1e-4) -> float:
    """Gauss curvature of an orthogonal 2D metric diag(E, G) by centred differences (Brioschi)."""
    x, y = p

    def EG(xx, yy):
        m = metric_fn((xx, yy))
        return m[0, 0], m[1, 1]

    def sq(xx, yy):
        E, G = EG(xx, yy)
        return np.sqrt(E * G)

    def term_x(xx, yy):
        # G_x / sqrt(EG)
        Gp = EG(xx + h, yy)[1]
        Gm = EG(xx - h, yy)[1]
        return (Gp - Gm) / (2 * h) / sq(xx, yy)

    def term_y(xx, yy):
        Ep = EG(xx, yy + h)[0]
        Em = EG(xx, yy - h)[0]
        return (Ep - Em) / (2 * h) / sq(xx, yy)

    dx = (term_x(x + h, y) - term_x(x - h, y)) / (2 * h)
    dy = (term_y(x, y + h) - term_y(x, y - h)) / (2 * h)
    return float(-(dx + dy) / (2 * sq(x, y)))
