"""Closed hyperbolic surfaces as Fuchsian groups.

Constructions (Fenchel-Nielsen genus 2, Bolza, the cylinder used as a
closed-form oracle), breadth-first enumeration of group balls, Dirichlet
reduction, systoles, injectivity radii and collar bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mobius import (
    INF,
    GeodesicLine,
    HPoint,
    MoebiusElement,
    axis,
    common_perpendicular_feet,
    cosh_dist,
    dist,
    frame_at,
    tangent_towards,
    translation_length,
)

KEY_GRID = 1e-7
SATURATION_LEVEL = 3
DEFAULT_SLACK = 2.0
DEFAULT_CAP = 2_000_000


class ConstructionFailure(RuntimeError):
    pass


class BudgetExceeded(RuntimeError):
    pass


class InsufficientBall(RuntimeError):
    pass


class NotClosed(ValueError):
    pass


@dataclass(frozen=True)
class NamedCurve:
    """A designated simple closed geodesic.

    `frame` maps the imaginary axis onto the axis of `element` so that
    ``frame^-1 element frame`` is the scaling ``z -> e^length z``.
    """

    label: str
    element: MoebiusElement
    length: float
    frame: MoebiusElement


@dataclass(frozen=True)
class SurfaceModel:
    generators: tuple[MoebiusElement, ...]
    genus: int | str
    basepoint: HPoint
    named_curves: dict[str, NamedCurve]
    kind: str = "custom"
    fn_coords: dict | None = None

    @property
    def closed(self) -> bool:
        return self.genus != "cylinder"

    @property
    def area(self) -> float:
        if not self.closed:
            raise NotClosed("the cylinder has infinite area")
        return 4.0 * math.pi * (self.genus - 1)

    @property
    def diam_est(self) -> float:
        """Radius of the disk twice as large as the surface; a coarse scale."""
        return math.acosh(1.0 + self.area / math.pi)

    def curve(self, label: str) -> NamedCurve:
        try:
            return self.named_curves[label]
        except KeyError:
            raise KeyError(f"no curve {label!r}; have {sorted(self.named_curves)}") from None

    def generator_array(self) -> np.ndarray:
        """Generators and their inverses as an (n, 4) array."""
        rows = []
        for g in self.generators:
            rows.append(g.entries())
            rows.append(g.inverse().entries())
        return np.array(rows, dtype=float)

    def conjugated(self, g: MoebiusElement) -> SurfaceModel:
        """The same surface with the group replaced by g^-1 Gamma g."""
        gi = g.inverse()
        gens = tuple(gi @ h @ g for h in self.generators)
        curves = {
            k: NamedCurve(k, gi @ c.element @ g, c.length, gi @ c.frame)
            for k, c in self.named_curves.items()
        }
        return SurfaceModel(gens, self.genus, HPoint.from_complex(gi(self.basepoint.z)), curves,
                            self.kind, self.fn_coords)


def curve_frame(element: MoebiusElement) -> MoebiusElement:
    """Frame F with F^-1 element F = scaling(+length)."""
    line = axis(element)
    f = line.frame()
    m = f.inverse() @ element @ f
    if m.a < m.d:
        flip = MoebiusElement(0.0, -1.0, 1.0, 0.0)
        f = f @ flip
    return f


def _named(label: str, element: MoebiusElement) -> NamedCurve:
    return NamedCurve(label, element, translation_length(element), curve_frame(element))


# ---------------------------------------------------------------- constructions


def _arr(m: MoebiusElement) -> np.ndarray:
    return m.as_array()


def _pants_pair(l1: float, l2: float, l3: float) -> tuple[np.ndarray, np.ndarray]:
    """SL(2,R) lifts A, B of a pants group with tr A, tr B > 0, tr AB = -2 cosh(l3/2).

    A is the scaling by e^l1; the common perpendicular of the two axes runs
    along the unit semicircle from i into Re z > 0.
    """
    ch = (math.cosh(l3 / 2) + math.cosh(l1 / 2) * math.cosh(l2 / 2)) / (
        math.sinh(l1 / 2) * math.sinh(l2 / 2))
    d = math.acosh(ch)
    a = np.diag([math.exp(l1 / 2), math.exp(-l1 / 2)])
    m = np.array([[math.cosh(d / 2), math.sinh(d / 2)], [math.sinh(d / 2), math.cosh(d / 2)]])
    mi = np.linalg.inv(m)
    target = -2.0 * math.cosh(l3 / 2)
    for eps in (-1.0, 1.0):
        b = m @ np.diag([math.exp(eps * l2 / 2), math.exp(-eps * l2 / 2)]) @ mi
        if abs(np.trace(a @ b) - target) <= 1e-8 * abs(target):
            return a, b
    raise ConstructionFailure(f"no pants group for lengths {(l1, l2, l3)}")


def _mirror(m: np.ndarray) -> np.ndarray:
    """Conjugate by z -> -conj(z)."""
    return np.array([[m[0, 0], -m[0, 1]], [-m[1, 0], m[1, 1]]])


def _gluing_map(line1: GeodesicLine, line2: GeodesicLine, twist: float, twist_line: GeodesicLine) -> MoebiusElement:
    """Isometry taking line1 to line2 and the imaginary-axis side of line1 to the far side of line2.

    Seam feet (common perpendiculars from the imaginary axis) are matched,
    then the result is translated by `twist` along line2.
    """
    from .mobius import IMAGINARY_AXIS

    q1, p1 = common_perpendicular_feet(IMAGINARY_AXIS, line1)
    q2, p2 = common_perpendicular_feet(IMAGINARY_AXIS, line2)
    v1 = tangent_towards(p1, q1)
    v2 = -tangent_towards(p2, q2)
    t = frame_at(p2, v2) @ frame_at(p1, v1).inverse()
    if twist:
        f = twist_line.frame()
        t = f @ MoebiusElement.scaling(twist) @ f.inverse() @ t
    return t


def from_fenchel_nielsen(lengths, twists=(0.0, 0.0, 0.0), labels=("alpha", "beta", "gamma")) -> SurfaceModel:
    """Genus-2 surface from two pants glued along all three cuffs.

    Twists are displacements along the pants curves, so a twist equal to the
    curve length is a full Dehn twist.
    """
    l1, l2, l3 = map(float, lengths)
    t1, t2, t3 = map(float, twists)
    if min(l1, l2, l3) <= 0:
        raise ConstructionFailure("pants lengths must be positive")
    a, b1 = _pants_pair(l1, l2, l3)
    c1 = np.linalg.inv(a @ b1)
    s = np.diag([math.exp(t1 / 2), math.exp(-t1 / 2)])
    si = np.linalg.inv(s)
    b2 = s @ _mirror(b1) @ si
    c2 = np.linalg.inv(a @ b2)

    A = MoebiusElement.from_array(a)
    B1, C1 = MoebiusElement.from_array(b1), MoebiusElement.from_array(c1)
    B2, C2 = MoebiusElement.from_array(b2), MoebiusElement.from_array(c2)
    beta1, beta2 = axis(B1), axis(B2)
    gamma1, gamma2 = axis(C1), axis(C2)
    Tb = _gluing_map(beta1, beta2, t2, beta2)
    Tg = _gluing_map(gamma1, gamma2, t3, gamma2)

    # the gluing must conjugate each cuff onto its partner
    for t, x, y in ((Tb, B1, B2), (Tg, C1, C2)):
        m = np.array((t @ x @ t.inverse()).entries())
        scale = 1e-8 * max(1.0, float(np.max(np.abs(m))))
        if not any(np.max(np.abs(m - np.array(w.entries()))) <= scale for w in (y, y.inverse())):
            raise ConstructionFailure("gluing map does not match cuffs")

    curves = {
        labels[0]: _named(labels[0], A),
        labels[1]: _named(labels[1], B1),
        labels[2]: _named(labels[2], C1),
    }
    for lab, want in zip(labels, (l1, l2, l3)):
        if abs(curves[lab].length - want) > 1e-6:
            raise ConstructionFailure(f"curve {lab} has length {curves[lab].length}, expected {want}")
    return SurfaceModel(
        generators=(A, B1, B2, Tb, Tg),
        genus=2,
        basepoint=HPoint(0.0, 1.0),
        named_curves=curves,
        kind="fn2",
        fn_coords={"lengths": [l1, l2, l3], "twists": [t1, t2, t3], "labels": list(labels)},
    )


def bolza() -> SurfaceModel:
    """The Bolza surface from the regular octagon with opposite sides paired."""
    r2 = math.sqrt(2.0)
    g0 = np.array([[1 + r2, math.sqrt(2 + 2 * r2)], [math.sqrt(2 + 2 * r2), 1 + r2]], dtype=complex)
    cayley = np.array([[1, -1j], [1, 1j]])
    ci = np.linalg.inv(cayley)
    gens = []
    for k in range(4):
        w = np.exp(1j * k * math.pi / 8)
        rot = np.diag([w, 1 / w])
        gd = rot @ g0 @ np.linalg.inv(rot)
        gu = ci @ gd @ cayley
        if np.max(np.abs(gu.imag)) > 1e-9:
            raise ConstructionFailure("octagon generator is not real")
        gens.append(MoebiusElement.from_array(gu.real))
    curves = {"alpha": _named("alpha", gens[0])}
    for k in range(1, 4):
        lab = f"a{k}"
        curves[lab] = _named(lab, gens[k])
    return SurfaceModel(tuple(gens), 2, HPoint(0.0, 1.0), curves, kind="bolza")


def cylinder(length: float) -> SurfaceModel:
    """<A> with A: z -> e^length z; its quotient is an infinite-area annulus."""
    if not length > 0:
        raise ConstructionFailure("length must be positive")
    a = MoebiusElement.scaling(length)
    return SurfaceModel((a,), "cylinder", HPoint(0.0, 1.0), {"alpha": _named("alpha", a)}, kind="cylinder",
                        fn_coords={"lengths": [float(length)]})


def parse_surface_spec(text: str) -> dict:
    """Parse the key = value surface file (comments start with #)."""
    out: dict = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line and ":" not in line:
            raise ValueError(f"bad line in surface spec: {raw!r}")
        sep = "=" if "=" in line else ":"
        k, v = (s.strip() for s in line.split(sep, 1))
        k = k.lower()
        if k in ("lengths", "twists"):
            out[k] = [float(x) for x in v.replace(",", " ").split()]
        elif k in ("curves", "labels"):
            out["labels"] = [x for x in v.replace(",", " ").split()]
        elif k == "length":
            out["lengths"] = [float(v)]
        else:
            out[k] = v
    if "kind" not in out:
        raise ValueError("surface spec needs a 'kind'")
    return out


def build_surface(kind: str, lengths=None, twists=None, labels=None) -> SurfaceModel:
    kind = kind.lower()
    if kind == "bolza":
        return bolza()
    if kind == "cylinder":
        if not lengths:
            raise ConstructionFailure("cylinder needs a length")
        return cylinder(lengths[0])
    if kind in ("fn2", "fn"):
        if not lengths or len(lengths) != 3:
            raise ConstructionFailure("fn2 needs three lengths")
        twists = twists or (0.0, 0.0, 0.0)
        if len(twists) != 3:
            raise ConstructionFailure("fn2 needs three twists")
        labels = labels or ("alpha", "beta", "gamma")
        return from_fenchel_nielsen(lengths, twists, tuple(labels))
    raise ConstructionFailure(f"unknown surface kind {kind!r}")


# ------------------------------------------------------------- batched algebra


def mul_right(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Rows of x (n, 4) times the single matrix g (4,)."""
    a, b, c, d = x[:, 0], x[:, 1], x[:, 2], x[:, 3]
    e, f, h, k = g
    return np.stack([a * e + b * h, a * f + b * k, c * e + d * h, c * f + d * k], axis=1)


def act(x: np.ndarray, z: complex) -> np.ndarray:
    return (x[:, 0] * z + x[:, 1]) / (x[:, 2] * z + x[:, 3])


def renormalize(x: np.ndarray) -> np.ndarray:
    det = x[:, 0] * x[:, 3] - x[:, 1] * x[:, 2]
    x = x / np.sqrt(det)[:, None]
    lead = np.where(np.abs(x[:, 0]) > 1e-12, x[:, 0], np.where(np.abs(x[:, 1]) > 1e-12, x[:, 1], x[:, 2]))
    return x * np.where(lead < 0, -1.0, 1.0)[:, None]


class KeySet:
    """Approximate-duplicate filter on float vectors.

    Two offset grids are used so that a value sitting on a cell boundary of
    one grid is still caught by the other.
    """

    def __init__(self, grid: float = KEY_GRID):
        self.grid = grid
        self._a: set = set()
        self._b: set = set()

    def _keys(self, v: np.ndarray):
        # asinh makes the grid relative for large entries
        s = np.arcsinh(v) / self.grid
        ka = np.floor(s).astype(np.int64)
        kb = np.floor(s + 0.5).astype(np.int64)
        return list(map(tuple, ka.tolist())), list(map(tuple, kb.tolist()))

    def add_new(self, v: np.ndarray) -> np.ndarray:
        """Insert rows of v; return a mask of the rows that were new."""
        ka, kb = self._keys(v)
        mask = np.zeros(len(ka), dtype=bool)
        for i, (p, q) in enumerate(zip(ka, kb)):
            if p in self._a or q in self._b:
                continue
            self._a.add(p)
            self._b.add(q)
            mask[i] = True
        return mask

    def __len__(self):
        return len(self._a)


@dataclass
class BFSResult:
    elements: np.ndarray  # (n, 4)
    scores: np.ndarray  # admission score per element
    levels: np.ndarray
    saturation_level: int
    max_level: int


def orbit_bfs(
    gens: np.ndarray,
    score: Callable[[np.ndarray], np.ndarray],
    limit: float,
    prune: float,
    key: Callable[[np.ndarray], np.ndarray],
    canon: Callable[[np.ndarray], np.ndarray] | None = None,
    cap: int = DEFAULT_CAP,
    saturation: int = SATURATION_LEVEL,
    key_grid: float = KEY_GRID,
) -> BFSResult:
    """Breadth-first search by right multiplication with generators.

    Elements with ``score <= prune`` are expanded; those with
    ``score <= limit`` are admitted.  Stops when the frontier is empty or
    `saturation` consecutive levels admit nothing new.
    """
    start = np.array([[1.0, 0.0, 0.0, 1.0]])
    seen = KeySet(key_grid)
    seen.add_new(key(start))
    kept = [start]
    kept_scores = [score(start)]
    kept_levels = [np.zeros(1, dtype=np.int64)]
    frontier = start
    quiet = 0
    level = 0
    total = 1
    while len(frontier):
        level += 1
        cand = np.concatenate([mul_right(frontier, g) for g in gens])
        cand = renormalize(cand)
        if canon is not None:
            cand = canon(cand)
        s = score(cand)
        ok = s <= prune
        cand, s = cand[ok], s[ok]
        if len(cand) == 0:
            break
        order = np.lexsort((cand[:, 3], cand[:, 2], cand[:, 1], cand[:, 0], s))
        cand, s = cand[order], s[order]
        new = seen.add_new(key(cand))
        cand, s = cand[new], s[new]
        total += len(cand)
        if total > cap:
            raise BudgetExceeded(f"more than {cap} elements at level {level}")
        kept.append(cand)
        kept_scores.append(s)
        kept_levels.append(np.full(len(cand), level, dtype=np.int64))
        frontier = cand
        if np.any(s <= limit):
            quiet = 0
        else:
            quiet += 1
            if quiet >= saturation:
                break
    el = np.concatenate(kept)
    sc = np.concatenate(kept_scores)
    lv = np.concatenate(kept_levels)
    inside = sc <= limit
    return BFSResult(el[inside], sc[inside], lv[inside], quiet, level)


# ---------------------------------------------------------------- group balls


@dataclass
class GroupBall:
    radius: float
    elements: np.ndarray  # (n, 4), identity first
    displacements: np.ndarray
    levels: np.ndarray
    saturation_level: int
    basepoint: complex
    slack: float

    def __len__(self):
        return len(self.elements)

    def element(self, i: int) -> MoebiusElement:
        return MoebiusElement.from_array(self.elements[i])

    def within(self, radius: float) -> np.ndarray:
        return self.elements[self.displacements <= radius + 1e-12]


def enumerate_ball(model: SurfaceModel, R: float, slack: float = DEFAULT_SLACK, cap: int = DEFAULT_CAP) -> GroupBall:
    """All gamma with dist(basepoint, gamma basepoint) <= R found by pruned BFS."""
    b = model.basepoint.z
    gens = model.generator_array()

    def score(x):
        return np.arccosh(np.maximum(cosh_dist(b, act(x, b)), 1.0))

    def key(x):
        return x

    res = orbit_bfs(gens, score, R, R + slack, key, cap=cap)
    order = np.lexsort((res.elements[:, 3], res.elements[:, 2], res.elements[:, 1], res.elements[:, 0],
                        np.round(res.scores, 12)))
    return GroupBall(R, res.elements[order], res.scores[order], res.levels[order], res.saturation_level, b, slack)


def reduce_to_domain(model: SurfaceModel, ball: GroupBall, z: HPoint, max_steps: int = 64) -> HPoint:
    """Move z into the Dirichlet domain at the basepoint.

    The result w is certified when 2 dist(basepoint, w) <= ball radius:
    every element that could bring w closer is then in the ball.
    """
    b = ball.basepoint
    w = z.z
    x = ball.elements
    for _ in range(max_steps):
        imgs = act(x, w)
        cd = cosh_dist(b, imgs)
        lo = cd.min()
        # on a tie take the shortest element, which keeps w on the near face
        ties = np.flatnonzero(cd <= lo * (1 + 1e-12))
        j = int(ties[np.argmin(ball.displacements[ties])])
        if cd[j] < cosh_dist(b, w) * (1 - 1e-13):
            w = complex(imgs[j])
        else:
            break
    else:
        raise InsufficientBall("reduction did not converge")
    if 2 * float(dist(b, w)) > ball.radius:
        raise InsufficientBall(f"ball radius {ball.radius} < {2 * float(dist(b, w)):.3f} needed")
    return HPoint.from_complex(w)


def in_dirichlet_domain(ball: GroupBall, zs: np.ndarray, neighbor_radius: float, chunk: int = 20000) -> np.ndarray:
    """Mask of points no farther from the basepoint than from any translate within reach."""
    b = ball.basepoint
    sel = (ball.displacements > 0) & (ball.displacements <= neighbor_radius)
    x = ball.elements[sel]
    # images of the basepoint under gamma^-1
    inv = np.stack([x[:, 3], -x[:, 1], -x[:, 2], x[:, 0]], axis=1)
    pts = act(inv, b)
    out = np.empty(len(zs), dtype=bool)
    for s in range(0, len(zs), chunk):
        z = zs[s:s + chunk]
        d0 = cosh_dist(b, z)
        dn = cosh_dist(pts[None, :], z[:, None])
        out[s:s + chunk] = np.all(dn >= d0[:, None] * (1 - 1e-14), axis=1)
    return out


def injectivity_radius(model: SurfaceModel, ball: GroupBall, z: HPoint) -> float:
    """Half the shortest nontrivial loop through z."""
    w = z.z
    x = ball.elements[ball.displacements > 1e-12]
    d = dist(w, act(x, w))
    j = int(np.argmin(d))
    inj = 0.5 * float(d[j])
    need = 2 * inj + 2 * float(dist(ball.basepoint, w))
    if need > ball.radius + 1e-9:
        raise InsufficientBall(f"need ball radius {need:.3f}, have {ball.radius}")
    return inj


@dataclass
class SystoleResult:
    length: float
    witness: MoebiusElement
    search_radius: float
    cover_radius: float
    ball_size: int
    rigorous: bool = False
    notes: str = field(default="search radius from a covering-radius heuristic")


def systole(model: SurfaceModel, cover_radius: float | None = None, slack: float = DEFAULT_SLACK,
            cap: int = DEFAULT_CAP) -> SystoleResult:
    """Minimal translation length over a ball large enough for the shortest class.

    A closed geodesic of length L passes within the covering radius rho of
    some orbit point of the basepoint, so a conjugate displaces the basepoint
    by at most 2 asinh(sinh(L/2) cosh rho).
    """
    if not model.closed:
        g = model.generators[0]
        return SystoleResult(translation_length(g), g, 0.0, 0.0, 1, True, "single generator")
    if cover_radius is None:
        # thin collars push points far from the basepoint
        rho = model.diam_est + max(collar_width_general(c.length) for c in model.named_curves.values())
    else:
        rho = cover_radius
    lmin = min(translation_length(g) for g in model.generators)
    radius = 2 * math.asinh(math.sinh(lmin / 2) * math.cosh(rho))
    while True:
        ball = enumerate_ball(model, radius, slack=slack, cap=cap)
        x = ball.elements[1:]
        tr = np.abs(x[:, 0] + x[:, 3])
        hyp = tr > 2 + 1e-12
        if not hyp.any():
            radius += 1.0
            continue
        lengths = np.where(hyp, 2 * np.arccosh(np.maximum(tr, 2) / 2), np.inf)
        j = int(np.argmin(lengths))
        best = float(lengths[j])
        need = 2 * math.asinh(math.sinh(best / 2) * math.cosh(rho))
        if need <= radius + 1e-9:
            return SystoleResult(best, MoebiusElement.from_array(x[j]), radius, rho, len(ball))
        radius = need


# --------------------------------------------------------------------- collars


def collar_width_general(length: float) -> float:
    """Collar width guaranteed for any simple closed geodesic."""
    c = math.cosh(length / 2)
    return 0.5 * math.log((c + 1) / (c - 1))


def collar_width_systolic(length: float) -> float:
    return length / 4


@dataclass(frozen=True)
class CollarReport:
    curve_length: float
    width_lower_general: float
    width_lower_systolic: float | None
    combined_bound: float
    is_systolic: bool


def collar_bounds(length: float, is_systolic: bool) -> CollarReport:
    if not length > 0:
        raise ValueError("length must be positive")
    g = collar_width_general(length)
    s = collar_width_systolic(length) if is_systolic else None
    comb = max(g, s) if is_systolic else g
    return CollarReport(length, g, s, comb, is_systolic)


def collar_crossing() -> tuple[float, float]:
    """Length where the two systolic collar bounds meet, and the common value.

    With t = e^{l/4} the equality reduces to t^3 - t^2 - t - 1 = 0.
    """
    roots = np.roots([1.0, -1.0, -1.0, -1.0])
    t = float(max(r.real for r in roots if abs(r.imag) < 1e-12))
    # polish under the original equation
    for _ in range(3):
        f = t ** 3 - t ** 2 - t - 1
        t -= f / (3 * t * t - 2 * t - 1)
    return 4 * math.log(t), math.log(t)
