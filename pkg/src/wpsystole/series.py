"""Coset enumeration and the Poincare series for geodesic-length gradients.

All tables live in the frame of the chosen curve: its lift is the imaginary
axis, its element is z -> e^l z and the reference point is i.  A coset
<A>E is recorded through the lift E^-1(axis) of the curve, which does not
depend on the representative.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .mobius import HPoint, MoebiusElement
from .surface import (
    DEFAULT_CAP,
    InsufficientBall,
    KeySet,
    SurfaceModel,
    orbit_bfs,
)

TABLE_SLACK = 2.0
R_SERIES = 6.0
LIFT_KEY_GRID = 1e-9
MIN_HALF_COUNT = 4
MAX_CUTOFF_U = 1e7


class NonSimpleCurveSuspected(RuntimeError):
    """Two lifts of the curve meet, which cannot happen for a simple geodesic."""


# ------------------------------------------------------------- coset tables


def _lift_endpoints(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Endpoints of E^-1(imaginary axis) for rows E = (p, q, r, s)."""
    p, q, r, s = x[:, 0], x[:, 1], x[:, 2], x[:, 3]
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(p != 0, -q / np.where(p != 0, p, 1.0), np.inf)
        b = np.where(r != 0, -s / np.where(r != 0, r, 1.0), np.inf)
    return a, b


def _lift_key(x: np.ndarray) -> np.ndarray:
    """Symmetric functions of the endpoints on the boundary circle.

    Continuous through infinity, so a lift whose endpoint is numerically
    huge but finite still matches the exact vertical one.
    """
    p, q, r, s = x[:, 0], x[:, 1], x[:, 2], x[:, 3]
    # Cayley image of E^-1(0) = -q/p and E^-1(inf) = -s/r
    s1 = (-q - 1j * p) / (-q + 1j * p)
    s2 = (-s - 1j * r) / (-s + 1j * r)
    su, pr = s1 + s2, s1 * s2
    return np.stack([su.real, su.imag, pr.real, pr.imag], axis=1)


def _axis_dist_of_orbit_point(x: np.ndarray) -> np.ndarray:
    """dist(E i, imaginary axis) = dist(i, E^-1 axis)."""
    num = x[:, 0] * 1j + x[:, 1]
    den = x[:, 2] * 1j + x[:, 3]
    w = num / den
    return np.arcsinh(np.abs(w.real) / w.imag)


def _canon_slab(length: float):
    def canon(x: np.ndarray) -> np.ndarray:
        w = (x[:, 0] * 1j + x[:, 1]) / (x[:, 2] * 1j + x[:, 3])
        k = np.floor(np.log(np.abs(w)) / length)
        f = np.exp(-0.5 * k * length)
        out = x.copy()
        out[:, 0] *= f
        out[:, 1] *= f
        out[:, 2] /= f
        out[:, 3] /= f
        return out

    return canon


def dist_point_to_lifts(z: complex, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from z to the geodesics (a, b); b = inf allowed."""
    x, y = z.real, z.imag
    fin = np.isfinite(a) & np.isfinite(b)
    out = np.empty(len(a))
    c = 0.5 * (a[fin] + b[fin])
    r = 0.5 * np.abs(b[fin] - a[fin])
    out[fin] = np.arcsinh(np.abs((x - c) ** 2 + y * y - r * r) / (2 * r * y))
    vert = ~fin
    p = np.where(np.isfinite(a[vert]), a[vert], b[vert])
    out[vert] = np.arcsinh(np.abs(x - p) / y)
    return out


@dataclass(frozen=True)
class CosetTable:
    """Cosets <A>E with dist(i, E^-1 axis) <= cutoff, in the curve frame.

    Row 0 is the identity coset.  Rows are sorted by distance to i.
    """

    label: str
    length: float
    frame: MoebiusElement
    representatives: np.ndarray
    lift_a: np.ndarray
    lift_b: np.ndarray
    dist_to_base: np.ndarray
    cutoff: float
    slack: float
    saturation_level: int
    includes_identity_coset: bool = True

    def __len__(self):
        return len(self.representatives)

    def representative(self, k: int) -> MoebiusElement:
        return MoebiusElement.from_array(self.representatives[k])

    def restrict(self, cutoff: float) -> CosetTable:
        if cutoff > self.cutoff:
            raise ValueError("cannot extend a table by restriction")
        n = int(np.searchsorted(self.dist_to_base, cutoff, side="right"))
        return CosetTable(self.label, self.length, self.frame, self.representatives[:n], self.lift_a[:n],
                          self.lift_b[:n], self.dist_to_base[:n], cutoff, self.slack, self.saturation_level)

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "length": self.length,
            "frame": list(self.frame.entries()),
            "cutoff": self.cutoff,
            "slack": self.slack,
            "entries": [
                {"matrix": list(map(float, m)), "dist": float(d)}
                for m, d in zip(self.representatives, self.dist_to_base)
            ],
        }


def coset_table(model: SurfaceModel, label: str, cutoff: float, slack: float = TABLE_SLACK,
                cap: int = DEFAULT_CAP) -> CosetTable:
    """Enumerate <A>\\Gamma up to distance `cutoff` between i and the lift.

    Breadth-first search over cosets: each step multiplies a representative
    on the right by a generator and slides it back with a power of A so
    that E i lies in the slab 1 <= |z| < e^l.
    """
    if not cutoff > 0:
        raise ValueError("cutoff must be positive")
    curve = model.curve(label)
    frame = curve.frame
    ell = curve.length
    fi = frame.inverse()
    gens = []
    for g in model.generators:
        h = fi @ g @ frame
        gens.append(h.entries())
        gens.append(h.inverse().entries())
    gens = np.array(gens)
    res = orbit_bfs(gens, _axis_dist_of_orbit_point, cutoff, cutoff + slack, _lift_key, canon=_canon_slab(ell),
                    cap=cap, key_grid=LIFT_KEY_GRID)
    x = res.elements
    a, b = _lift_endpoints(x)
    # infinity only ever appears as the larger endpoint
    a, b = np.minimum(a, b), np.maximum(a, b)
    d = res.scores
    order = np.lexsort((b, a, d))
    x, a, b, d = x[order], a[order], b[order], d[order]
    if not (d[0] < 1e-9 and abs(a[0]) < 1e-9 and abs(b[0]) > 1e9):
        raise RuntimeError("identity coset missing from table")
    x[0] = (1.0, 0.0, 0.0, 1.0)
    a[0], b[0], d[0] = 0.0, np.inf, 0.0
    rest_a, rest_b = a[1:], b[1:]
    bad = ~np.isfinite(rest_b) | (rest_a * rest_b <= 0)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0]) + 1
        raise NonSimpleCurveSuspected(f"lift ({a[k]}, {b[k]}) meets the axis of {label}")
    return CosetTable(label, ell, frame, x, a, b, d, cutoff, slack, res.saturation_level)


# ---------------------------------------------------------- double cosets


def riera_term(u: np.ndarray) -> np.ndarray:
    """u ln((u+1)/(u-1)) - 2, with the large-u series to avoid cancellation."""
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    big = u > 30.0
    s = 1.0 / (u[big] * u[big])
    out[big] = s * (2.0 / 3 + s * (2.0 / 5 + s * (2.0 / 7 + s * 2.0 / 9)))
    v = u[~big]
    out[~big] = v * np.log1p(2.0 / (v - 1.0)) - 2.0
    return out


@dataclass(frozen=True)
class DoubleCosetTable:
    """One lift per double coset <A>E<A> with u <= cutoff_u; identity omitted."""

    label: str
    length: float
    u: np.ndarray
    d: np.ndarray
    lift_a: np.ndarray
    lift_b: np.ndarray
    representatives: np.ndarray
    cutoff_u: float
    tail_estimate: float
    coset_cutoff: float

    def __len__(self):
        return len(self.u)

    def count_upto(self, u: float) -> int:
        return int(np.searchsorted(self.u, u, side="right"))

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "length": self.length,
            "cutoff_u": self.cutoff_u,
            "tail_estimate": self.tail_estimate,
            "entries": [
                {"matrix": list(map(float, m)), "u": float(u), "d": float(d)}
                for m, u, d in zip(self.representatives, self.u, self.d)
            ],
        }


def double_cosets_from(table: CosetTable, cutoff_u: float) -> DoubleCosetTable:
    if not cutoff_u > 1:
        raise ValueError("cutoff_u must exceed 1")
    need = math.acosh(cutoff_u) + table.length
    if need > table.cutoff + 1e-12:
        raise InsufficientBall(f"coset table cutoff {table.cutoff:.3f} < {need:.3f} needed for u <= {cutoff_u}")
    a, b = table.lift_a[1:], table.lift_b[1:]
    x = table.representatives[1:]
    foot = 0.5 * np.log(a * b) / table.length
    canon = (foot >= 0) & (foot < 1)
    a, b, x = a[canon], b[canon], x[canon]
    u = np.abs(a + b) / np.abs(a - b)
    if np.any(u <= 1 + 1e-9):
        raise NonSimpleCurveSuspected("double coset with u <= 1")
    keep = u <= cutoff_u
    a, b, x, u = a[keep], b[keep], x[keep], u[keep]
    order = np.lexsort((b, a, u))
    a, b, x, u = a[order], b[order], x[order], u[order]
    n_half = int(np.searchsorted(u, cutoff_u / 2, side="right"))
    # terms beyond U are about 2/(3u^2) and N(u) grows linearly, so the tail is
    # about 2 N(U) / (3 U); the doubling count is the same thing when N is dense
    tail = max(4.0 * (len(u) - n_half), 2.0 * len(u)) / (3.0 * cutoff_u ** 2)
    return DoubleCosetTable(table.label, table.length, u, np.arccosh(u), a, b, x, float(cutoff_u), tail,
                            table.cutoff)


def double_coset_table(model: SurfaceModel, label: str, cutoff_u: float, slack: float = TABLE_SLACK,
                       cap: int = DEFAULT_CAP, min_half: int = MIN_HALF_COUNT,
                       max_u: float = MAX_CUTOFF_U) -> DoubleCosetTable:
    """Double cosets up to cutoff_u, raised until min_half of them lie below half the cutoff.

    Thin curves have their first double coset far out; without raising the
    cutoff the sum would be empty and the tail estimate meaningless.
    """
    ell = model.curve(label).length
    while True:
        table = coset_table(model, label, math.acosh(cutoff_u) + ell, slack=slack, cap=cap)
        dt = double_cosets_from(table, cutoff_u)
        if dt.count_upto(cutoff_u / 2) >= min_half or cutoff_u * 4 > max_u:
            return dt
        cutoff_u *= 4


@dataclass(frozen=True)
class RieraResult:
    value: float
    tail: float
    doubling_change: float
    cutoff_u: float
    n_double_cosets: int

    def to_json(self) -> dict:
        return dict(self.__dict__)


def riera_norm_sq(model: SurfaceModel, label: str, dtable: DoubleCosetTable | None) -> tuple[float, float]:
    """Squared Weil-Petersson norm of the gradient and the tail estimate (same units)."""
    r = riera(model, label, dtable)
    return r.value, r.tail


def riera(model: SurfaceModel, label: str, dtable: DoubleCosetTable | None) -> RieraResult:
    ell = model.curve(label).length
    if dtable is None or len(dtable) == 0:
        tail = 0.0 if dtable is None else 2 / math.pi * dtable.tail_estimate
        cu = 0.0 if dtable is None else dtable.cutoff_u
        return RieraResult(2 / math.pi * ell, tail, 0.0, cu, 0)
    if dtable.label != label:
        raise ValueError("table built for another curve")
    terms = riera_term(dtable.u)
    # terms sorted by increasing u are nonincreasing; add smallest first
    s = float(np.sum(terms[::-1]))
    half = dtable.count_upto(dtable.cutoff_u / 2)
    s_half = float(np.sum(terms[:half][::-1]))
    scale = 2 / math.pi
    return RieraResult(scale * (ell + s), scale * dtable.tail_estimate, scale * (s - s_half), dtable.cutoff_u,
                       len(dtable))


# -------------------------------------------------------------- evaluator


def collar_half_width(length: float) -> float:
    c = math.cosh(length / 2)
    return 0.5 * math.log((c + 1) / (c - 1))


@dataclass(frozen=True)
class SlabGrid:
    """Cells covering {0 <= t < l, |rho| <= dmax} in Fermi coordinates about the axis."""

    length: float
    dmax: float
    rho_edges: np.ndarray
    t_counts: np.ndarray
    row_offset: np.ndarray

    @classmethod
    def build(cls, length: float, dmax: float, step: float = 0.5) -> SlabGrid:
        nr = max(2, int(math.ceil(2 * dmax / step)))
        edges = np.linspace(-dmax, dmax, nr + 1)
        rmax = np.maximum(np.abs(edges[:-1]), np.abs(edges[1:]))
        counts = np.maximum(1, np.ceil(length * np.cosh(rmax) / step)).astype(np.int64)
        offset = np.concatenate([[0], np.cumsum(counts)])
        return cls(length, dmax, edges, counts, offset)

    @property
    def n_cells(self) -> int:
        return int(self.row_offset[-1])

    def cells(self):
        """Centers (complex), radius bounds and max |rho| of every cell."""
        centers, radii, rhomax = [], [], []
        for i in range(len(self.t_counts)):
            r0, r1 = self.rho_edges[i], self.rho_edges[i + 1]
            rc = 0.5 * (r0 + r1)
            rm = max(abs(r0), abs(r1))
            n = self.t_counts[i]
            dt = self.length / n
            for j in range(n):
                tc = (j + 0.5) * dt
                centers.append(math.exp(tc) * complex(math.tanh(rc), 1 / math.cosh(rc)))
                radii.append(0.5 * (r1 - r0) + 0.5 * dt * math.cosh(rm))
                rhomax.append(rm)
        return np.array(centers), np.array(radii), np.array(rhomax)

    def locate(self, t: np.ndarray, rho: np.ndarray) -> np.ndarray:
        i = np.clip(np.searchsorted(self.rho_edges, rho, side="right") - 1, 0, len(self.t_counts) - 1)
        n = self.t_counts[i]
        j = np.clip(np.floor(t / self.length * n).astype(np.int64), 0, n - 1)
        return self.row_offset[i] + j


def fermi_to_z(t, rho):
    return np.exp(t) * (np.tanh(rho) + 1j / np.cosh(rho))


def z_to_fermi(z):
    z = np.asarray(z)
    t = np.log(np.abs(z))
    rho = np.arcsinh(z.real / z.imag)
    return t, rho


@dataclass
class GradientEvaluator:
    """Point evaluation of the length gradient and its envelope for one curve.

    Terms are kept when the lift lies within `r_series` of the point.  Cell
    lists over the collar slab make evaluation cost independent of the
    table size.
    """

    table: CosetTable
    r_series: float
    dmax: float
    grid: SlabGrid
    cell_start: np.ndarray
    members: np.ndarray
    reach: float = field(default=0.0)

    @classmethod
    def build(cls, model: SurfaceModel, label: str, r_series: float = R_SERIES, dmax: float | None = None,
              slack: float = TABLE_SLACK, cap: int = DEFAULT_CAP) -> GradientEvaluator:
        ell = model.curve(label).length
        if dmax is None:
            dmax = collar_half_width(ell) + 2.5
        grid = SlabGrid.build(ell, dmax)
        centers, radii, rhomax = grid.cells()
        d0 = np.arccosh(np.maximum(1.0, 1 + np.abs(centers - 1j) ** 2 / (2 * centers.imag)))
        need_c = d0 + radii + np.maximum(r_series, rhomax)
        cutoff = float(np.max(need_c)) + 1e-6
        if model.closed:
            table = coset_table(model, label, cutoff, slack=slack, cap=cap)
        else:
            table = coset_table(model, label, 1.0, slack=slack, cap=cap)
            table = CosetTable(table.label, table.length, table.frame, table.representatives, table.lift_a,
                               table.lift_b, table.dist_to_base, math.inf, slack, table.saturation_level)
        return cls.from_table(table, r_series, dmax, grid)

    @classmethod
    def from_table(cls, table: CosetTable, r_series: float, dmax: float, grid: SlabGrid | None = None):
        grid = grid or SlabGrid.build(table.length, dmax)
        centers, radii, rhomax = grid.cells()
        start = [0]
        mem = []
        for c, r, rm in zip(centers, radii, rhomax):
            dl = dist_point_to_lifts(c, table.lift_a, table.lift_b)
            idx = np.flatnonzero(dl <= r + max(r_series, rm) + 1e-9)
            mem.append(idx)
            start.append(start[-1] + len(idx))
        members = np.concatenate(mem).astype(np.int64) if mem else np.zeros(0, np.int64)
        return cls(table, float(r_series), float(dmax), grid, np.array(start, dtype=np.int64), members)

    # full-table index for points outside the slab grid
    def _full_index(self):
        n = len(self.table)
        return np.array([0, n], dtype=np.int64), np.arange(n, dtype=np.int64)

    @property
    def length(self) -> float:
        return self.table.length

    def evaluate_local(self, w: np.ndarray, check_inside: bool = False):
        """Sums at points w already in the curve frame (any position).

        Points are first slid into the slab by a power of A.  Returns
        (theta, envelope, nterms, inside, slid points); theta refers to the
        slid point.
        """
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        ell = self.length
        t, rho = z_to_fermi(w)
        k = np.floor(t / ell)
        w = w * np.exp(-k * ell)
        t = t - k * ell
        in_grid = np.abs(rho) <= self.dmax
        theta = np.zeros(len(w), dtype=complex)
        env = np.zeros(len(w))
        cnt = np.zeros(len(w), dtype=np.int64)
        inside = np.ones(len(w), dtype=bool)
        if np.any(in_grid):
            cells = self.grid.locate(t[in_grid], rho[in_grid])
            out = _kernels.series_sum(w[in_grid].real.copy(), w[in_grid].imag.copy(), self.table.lift_a,
                                      self.table.lift_b, self.table.dist_to_base, cells, self.cell_start,
                                      self.members, self.r_series, check_inside)
            theta[in_grid] = out[0] + 1j * out[1]
            env[in_grid], cnt[in_grid], inside[in_grid] = out[2], out[3], out[4]
        if np.any(~in_grid):
            far = ~in_grid
            d0 = np.arccosh(np.maximum(1.0, 1 + np.abs(w[far] - 1j) ** 2 / (2 * w[far].imag)))
            need = d0 + np.maximum(self.r_series, np.abs(rho[far]))
            if np.any(need > self.table.cutoff):
                raise InsufficientBall("point too far from the curve for this coset table")
            s, m = self._full_index()
            out = _kernels.series_sum(w[far].real.copy(), w[far].imag.copy(), self.table.lift_a,
                                      self.table.lift_b, self.table.dist_to_base, np.zeros(int(far.sum()), np.int64),
                                      s, m, self.r_series, check_inside)
            theta[far] = out[0] + 1j * out[1]
            env[far], cnt[far], inside[far] = out[2], out[3], out[4]
        return theta, env, cnt, inside, w

    def magnitude_local(self, w, check_inside: bool = False):
        """|grad| at points in the curve frame, and the membership mask."""
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        theta, _, _, inside, ws = self.evaluate_local(w, check_inside)
        return 2 / math.pi * np.abs(theta) * ws.imag ** 2, inside

    def to_local(self, z):
        return self.table.frame.inverse()(np.asarray(z, dtype=complex))

    def gradient_at(self, z) -> complex:
        """Value of the Beltrami differential at z (original coordinates)."""
        zc = z.z if isinstance(z, HPoint) else complex(z)
        return complex(self.gradient_many(np.array([zc]))[0])

    def gradient_many(self, zs: np.ndarray) -> np.ndarray:
        f = self.table.frame
        fi = f.inverse()
        w = fi(np.asarray(zs, dtype=complex))
        theta, _, _, _, ws = self.evaluate_local(w)
        # mu is invariant under z -> e^l z, so its value at the slid point is the value at w
        mu_local = 2 / math.pi * np.conj(theta) * ws.imag ** 2
        # change of frame: mu(z) = mu'(w) F'(w) / conj(F'(w))
        fp = f.derivative(w)
        return mu_local * fp / np.conj(fp)

    def envelope_H(self, z) -> float:
        zc = z.z if isinstance(z, HPoint) else complex(z)
        return float(self.envelope_many(np.array([zc]))[0])

    def envelope_many(self, zs: np.ndarray) -> np.ndarray:
        env = self.evaluate_local(self.to_local(zs))[1]
        return env

    def magnitude(self, zs: np.ndarray) -> np.ndarray:
        return np.abs(self.gradient_many(zs))

    def metadata(self) -> dict:
        return {
            "curve": self.table.label,
            "length": self.table.length,
            "r_series": self.r_series,
            "collar_extent": self.dmax,
            "coset_cutoff": self.table.cutoff,
            "cosets": len(self.table),
            "cells": self.grid.n_cells,
        }


def gradient_at(ev: GradientEvaluator, z) -> complex:
    return ev.gradient_at(z)


def envelope_H(ev: GradientEvaluator, z) -> float:
    return ev.envelope_H(z)


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj.to_json(), fh, indent=1, sort_keys=True)
