"""Upper half-plane arithmetic: Moebius actions, distances, geodesics and axes.

Everything here is double precision and pure.  Boundary points are real
numbers or the tag :data:`INF`, never a large float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DET_TOL = 1e-12
EQ_TOL = 1e-9
HYPERBOLIC_TOL = 1e-12
FLUSH_TOL = 1e-15


class NotHyperbolic(ValueError):
    """Raised when an operation needs |tr| > 2."""


class DegenerateGeodesic(ValueError):
    pass


class _Infinity:
    """The boundary point at infinity of the upper half-plane."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()


def is_inf(p) -> bool:
    return p is INF


@dataclass(frozen=True, eq=False)
class MoebiusElement:
    """A real 2x2 matrix of determinant one, identified with its negative."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if not det > 0:
            raise ValueError(f"matrix must have positive determinant, got {det}")
        s = math.sqrt(det)
        a, b, c, d = self.a / s, self.b / s, self.c / s, self.d / s
        # entries below roundoff of the others are exact zeros; otherwise a fixed
        # point that belongs at infinity lands at some absurd finite value
        tiny = FLUSH_TOL * max(abs(a), abs(b), abs(c), abs(d))
        a, b, c, d = (0.0 if abs(v) < tiny else v for v in (a, b, c, d))
        # canonical sign: first nonzero entry positive
        for v in (a, b, c, d):
            if abs(v) > EQ_TOL:
                if v < 0:
                    a, b, c, d = -a, -b, -c, -d
                break
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    @classmethod
    def identity(cls) -> MoebiusElement:
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def scaling(cls, length: float) -> MoebiusElement:
        """z -> e^length * z."""
        h = math.exp(length / 2)
        return cls(h, 0.0, 0.0, 1.0 / h)

    @classmethod
    def from_array(cls, m) -> MoebiusElement:
        m = np.asarray(m, dtype=float).reshape(4)
        return cls(*map(float, m))

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def entries(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    @property
    def trace(self) -> float:
        return self.a + self.d

    def __matmul__(self, other: MoebiusElement) -> MoebiusElement:
        a, b, c, d = self.entries()
        e, f, g, h = other.entries()
        return MoebiusElement(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)

    def inverse(self) -> MoebiusElement:
        return MoebiusElement(self.d, -self.b, -self.c, self.a)

    def __pow__(self, k: int) -> MoebiusElement:
        m = self.as_array()
        if k < 0:
            m = np.array([[self.d, -self.b], [-self.c, self.a]])
            k = -k
        return MoebiusElement.from_array(np.linalg.matrix_power(m, k))

    def __eq__(self, other):
        if not isinstance(other, MoebiusElement):
            return NotImplemented
        x = np.array(self.entries())
        y = np.array(other.entries())
        return bool(np.all(np.abs(x - y) <= EQ_TOL) or np.all(np.abs(x + y) <= EQ_TOL))

    __hash__ = None

    def is_identity(self, tol: float = EQ_TOL) -> bool:
        return abs(self.a - 1) <= tol and abs(self.b) <= tol and abs(self.c) <= tol and abs(self.d - 1) <= tol

    def __call__(self, z):
        """Act on a complex number (or array), an HPoint, or a boundary point."""
        if isinstance(z, HPoint):
            return HPoint.from_complex(self(z.z))
        if z is INF:
            return INF if self.c == 0 else self.a / self.c
        if isinstance(z, (int, float)) and not isinstance(z, bool):
            den = self.c * z + self.d
            if den == 0:
                return INF
            return (self.a * z + self.b) / den
        return (self.a * z + self.b) / (self.c * z + self.d)

    def derivative(self, z):
        return 1.0 / (self.c * z + self.d) ** 2


def conjugate(g: MoebiusElement, m: MoebiusElement) -> MoebiusElement:
    """g m g^-1."""
    return g @ m @ g.inverse()


@dataclass(frozen=True)
class HPoint:
    x: float
    y: float

    def __post_init__(self):
        if not self.y > 0:
            raise ValueError(f"point must lie in the upper half-plane, got y={self.y}")

    @classmethod
    def from_complex(cls, z: complex) -> HPoint:
        return cls(float(z.real), float(z.imag))

    @classmethod
    def polar(cls, r: float, theta: float) -> HPoint:
        return cls(r * math.cos(theta), r * math.sin(theta))

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)

    @property
    def r(self) -> float:
        return math.hypot(self.x, self.y)

    @property
    def theta(self) -> float:
        return math.atan2(self.y, self.x)


def _as_complex(z):
    return z.z if isinstance(z, HPoint) else z


def apply(m: MoebiusElement, z: HPoint) -> HPoint:
    return HPoint.from_complex(m(z.z))


def cosh_dist(z, w):
    """cosh of the hyperbolic distance; works elementwise on complex arrays."""
    z = _as_complex(z)
    w = _as_complex(w)
    return 1.0 + np.abs(z - w) ** 2 / (2.0 * np.imag(z) * np.imag(w))


def dist(z, w):
    return np.arccosh(np.maximum(cosh_dist(z, w), 1.0))


def dist_to_imaginary_axis(z):
    """ln|csc(theta) + |cot(theta)|| for z = r e^{i theta}."""
    z = _as_complex(z)
    theta = np.angle(z)
    s = np.sin(theta)
    return np.log(np.abs(1.0 / s + np.abs(np.cos(theta) / s)))


def translation_length(m: MoebiusElement) -> float:
    t = abs(m.trace)
    if t <= 2.0 + HYPERBOLIC_TOL:
        raise NotHyperbolic(f"|trace| = {t} is not > 2")
    return 2.0 * math.acosh(t / 2.0)


@dataclass(frozen=True)
class GeodesicLine:
    """A complete geodesic given by two distinct boundary points."""

    p: object
    q: object

    def __post_init__(self):
        p, q = self.p, self.q
        if p is INF and q is INF:
            raise DegenerateGeodesic("both endpoints at infinity")
        if p is INF:
            p, q = q, p
        elif q is not INF:
            p, q = float(p), float(q)
            if p == q:
                raise DegenerateGeodesic("endpoints coincide")
            if p > q:
                p, q = q, p
        else:
            p = float(p)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)

    @property
    def vertical(self) -> bool:
        return self.q is INF

    def apply(self, m: MoebiusElement) -> GeodesicLine:
        return GeodesicLine(m(self.p), m(self.q))

    def normalizer(self) -> MoebiusElement:
        """An element taking this line to the imaginary axis (p -> 0, q -> INF)."""
        if self.q is INF:
            return MoebiusElement(1.0, -self.p, 0.0, 1.0)
        p, q = self.p, self.q
        return MoebiusElement(1.0, -p, -1.0, q)

    def frame(self) -> MoebiusElement:
        """An element taking the imaginary axis onto this line, i to the apex."""
        if self.q is INF:
            return MoebiusElement(1.0, self.p, 0.0, 1.0)
        # z -> (q z + p)/(z + 1) sends 0 -> p, INF -> q, i -> point over the center
        p, q = self.p, self.q
        s = math.sqrt(q - p)
        return MoebiusElement(q / s, p / s, 1.0 / s, 1.0 / s)

    def dist_to(self, z):
        """Hyperbolic distance from z (complex or array) to this line."""
        z = _as_complex(z)
        if self.q is INF:
            return np.arcsinh(np.abs(np.real(z) - self.p) / np.imag(z))
        c = 0.5 * (self.p + self.q)
        r = 0.5 * (self.q - self.p)
        return np.arcsinh(np.abs(np.abs(z - c) ** 2 - r * r) / (2.0 * r * np.imag(z)))

    def point(self, s: float) -> complex:
        """Arc-length parametrisation through the apex."""
        return self.frame()(complex(0.0, math.exp(s)))


def axis(m: MoebiusElement) -> GeodesicLine:
    translation_length(m)
    a, b, c, d = m.entries()
    if abs(c) < 1e-300:
        return GeodesicLine(b / (d - a), INF)
    # roots of c z^2 + (d - a) z - b, in the form that avoids cancellation
    disc = math.sqrt((a + d) ** 2 - 4.0)
    B = d - a
    q = -0.5 * (B + math.copysign(disc, B))
    return GeodesicLine(q / c, -b / q)


def geodesic_separation(g1: GeodesicLine, g2: GeodesicLine) -> tuple[float, float]:
    """(u, d) where u = cosh of the distance between disjoint lines.

    Crossing lines return (u < 1, 0) and asymptotic ones (1, 0).
    """
    if g1 == g2:
        raise DegenerateGeodesic("identical geodesics")
    n = g1.normalizer()
    a, b = n(g2.p), n(g2.q)
    if a is INF or b is INF or a == 0.0 or b == 0.0:
        return 1.0, 0.0
    u = abs(a + b) / abs(a - b)
    if a * b < 0:
        return u, 0.0
    return u, math.acosh(u)


IMAGINARY_AXIS = GeodesicLine(0.0, INF)


def frame_at(p: complex, direction: complex) -> MoebiusElement:
    """The element sending i to p and the upward unit vector at i to `direction`."""
    phi = math.atan2(direction.imag, direction.real) - math.pi / 2
    rot = MoebiusElement(math.cos(phi / 2), math.sin(phi / 2), -math.sin(phi / 2), math.cos(phi / 2))
    sy = math.sqrt(p.imag)
    aff = MoebiusElement(sy, p.real / sy, 0.0, 1.0 / sy)
    return aff @ rot


def tangent_towards(z: complex, w: complex) -> complex:
    """Unit tangent (as a Euclidean direction) at z of the geodesic towards w."""
    line = GeodesicLine(*_endpoints_through(z, w))
    f = line.normalizer()
    fz, fw = f(z), f(w)
    # on the imaginary axis the direction is +-i; pull back by f
    v = 1j if abs(fw) > abs(fz) else -1j
    dv = v / f.derivative(z)
    return dv / abs(dv)


def _endpoints_through(z: complex, w: complex):
    if abs(z.real - w.real) < 1e-14 * max(1.0, abs(z)):
        return (z.real, INF)
    # center on real axis equidistant from z and w
    c = (abs(w) ** 2 - abs(z) ** 2) / (2 * (w.real - z.real))
    r = abs(z - c)
    return (c - r, c + r)


def common_perpendicular_feet(g1: GeodesicLine, g2: GeodesicLine) -> tuple[complex, complex]:
    """Feet on g1 and g2 of their common perpendicular (lines must be disjoint)."""
    n = g1.normalizer()
    a, b = n(g2.p), n(g2.q)
    if a is INF or b is INF or a * b <= 0:
        raise DegenerateGeodesic("lines are not ultraparallel")
    rr = a * b
    foot1 = complex(0.0, math.sqrt(rr))
    x = 2 * a * b / (a + b)
    y = math.sqrt(max(rr - x * x, 0.0))
    foot2 = complex(x, y)
    ninv = n.inverse()
    return ninv(foot1), ninv(foot2)
