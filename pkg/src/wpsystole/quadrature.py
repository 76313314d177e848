"""Integrals of Gamma-invariant fields over fundamental domains.

Two domains are available for closed surfaces.

* The collar domain of a curve: points of the slab 1 <= |z| < e^l (curve
  frame) whose nearest lift of the curve is the imaginary axis.  It stays
  compact in Fermi coordinates however short the curve is.
* The Dirichlet domain at the basepoint, used for area checks and as an
  independent cross-check.

The cylinder uses its annulus with a deterministic tensor grid.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .series import GradientEvaluator, fermi_to_z, z_to_fermi
from .surface import GroupBall, InsufficientBall, NotClosed, SurfaceModel, enumerate_ball, in_dirichlet_domain

SQRT2_LOG = math.log(1 + math.sqrt(2))


class DegenerateField(ValueError):
    pass


class InconsistentReports(ValueError):
    pass


@dataclass(frozen=True)
class NormReport:
    p: float
    value: float
    stat_error: float
    truncation_note: str
    samples: int
    seed: int | None
    integral: float = 0.0
    integral_error: float = 0.0
    domain: str = ""
    area_estimate: float | None = None
    lower_bound_only: bool = False

    def to_json(self) -> dict:
        d = asdict(self)
        d["p"] = "inf" if math.isinf(self.p) else self.p
        return d


@dataclass(frozen=True)
class QuadratureConfig:
    samples: int = 200_000
    seed: int = 0
    strata: int = 24
    pilot_fraction: float = 0.1
    min_per_stratum: int = 64
    chunk: int = 200_000


def _strata_rngs(seed: int, k: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k)]


def _allocate(total: int, weights: np.ndarray, minimum: int) -> np.ndarray:
    w = np.maximum(weights, 0)
    if w.sum() <= 0:
        w = np.ones_like(w)
    raw = w / w.sum() * max(total - minimum * len(w), 0)
    n = np.floor(raw).astype(np.int64) + minimum
    # hand out the remainder to the largest fractional parts, ties by index
    rem = total - int(n.sum())
    if rem > 0:
        frac = raw - np.floor(raw)
        n[np.argsort(-frac, kind="stable")[:rem]] += 1
    return n


@dataclass
class _StratumSums:
    """Running sums per stratum for several exponents."""

    ps: tuple
    k: int
    n: np.ndarray = None
    s1: np.ndarray = None
    s2: np.ndarray = None
    hits: np.ndarray = None

    def __post_init__(self):
        m = len(self.ps)
        self.n = np.zeros(self.k, dtype=np.int64)
        self.s1 = np.zeros((m, self.k))
        self.s2 = np.zeros((m, self.k))
        self.hits = np.zeros(self.k)

    def add(self, j: int, values: np.ndarray, inside: np.ndarray):
        self.n[j] += len(values)
        self.hits[j] += float(np.count_nonzero(inside))
        v = np.where(inside, values, 0.0)
        for i, p in enumerate(self.ps):
            f = v ** p
            self.s1[i, j] += float(np.sum(f))
            self.s2[i, j] += float(np.sum(f * f))

    def integrals(self, areas: np.ndarray):
        n = np.maximum(self.n, 1)
        mean = self.s1 / n
        var = np.maximum(self.s2 / n - mean ** 2, 0.0) * n / np.maximum(n - 1, 1)
        integ = (mean * areas).sum(axis=1)
        err = np.sqrt((var * areas ** 2 / n).sum(axis=1))
        frac = self.hits / n
        area = float((frac * areas).sum())
        area_err = float(np.sqrt((frac * (1 - frac) * areas ** 2 / n).sum()))
        return integ, err, area, area_err


def _reports(ps, integ, err, samples, seed, note, domain, area):
    out = {}
    for p, integral, e in zip(ps, integ, err):
        if integral <= 0:
            raise DegenerateField("field vanished on every sample")
        value = integral ** (1 / p)
        out[p] = NormReport(p, float(value), float(value * e / (p * integral)), note, int(samples), seed,
                            float(integral), float(e), domain, area)
    return out


# ----------------------------------------------------------- collar domain


def _collar_strata(ev: GradientEvaluator, k: int):
    edges = np.linspace(-ev.dmax, ev.dmax, k + 1)
    areas = ev.length * np.diff(np.sinh(edges))
    return edges, areas


def _sample_slab(rng, n, ell, r0, r1):
    t = ell * rng.random(n)
    v = np.sinh(r0) + (np.sinh(r1) - np.sinh(r0)) * rng.random(n)
    return t, np.arcsinh(v)


def collar_norms(ev: GradientEvaluator, ps: Sequence[float], cfg: QuadratureConfig = QuadratureConfig()):
    """Stratified Monte-Carlo of the integrals of |grad|^p over the collar domain.

    Strata are bands in the signed distance to the curve.  A pilot pass
    sets a Neyman allocation from the p = 2 integrand; pilot samples are
    kept in the estimate.
    """
    ps = tuple(float(p) for p in ps)
    k = cfg.strata
    edges, areas = _collar_strata(ev, k)
    rngs = _strata_rngs(cfg.seed, k)
    sums = _StratumSums(ps + (2.0,), k)
    pilot = max(cfg.min_per_stratum, int(cfg.samples * cfg.pilot_fraction) // k)
    rho_seen = 0.0

    def run(j, n):
        nonlocal rho_seen
        done = 0
        while done < n:
            m = min(cfg.chunk, n - done)
            t, rho = _sample_slab(rngs[j], m, ev.length, edges[j], edges[j + 1])
            w = fermi_to_z(t, rho)
            mag, inside = ev.magnitude_local(w, check_inside=True)
            sums.add(j, mag, inside)
            if np.any(inside):
                rho_seen = max(rho_seen, float(np.max(np.abs(rho[inside]))))
            done += m

    for j in range(k):
        run(j, pilot)
    n0 = sums.n.copy()
    mean = sums.s1[-1] / n0
    sd = np.sqrt(np.maximum(sums.s2[-1] / n0 - mean ** 2, 0.0))
    # keep some weight on strata that decide the area
    frac = sums.hits / n0
    w = areas * (sd + 1e-3 * np.sqrt(frac * (1 - frac)) * max(float(np.max(sd)), 1e-12))
    rest = max(cfg.samples - int(n0.sum()), 0)
    alloc = _allocate(rest, w, 0) if rest else np.zeros(k, dtype=np.int64)
    for j in range(k):
        if alloc[j]:
            run(j, int(alloc[j]))
    integ, err, area, area_err = sums.integrals(areas)
    return integ[:-1], err[:-1], area, area_err, int(sums.n.sum()), rho_seen


def lp_norms(model: SurfaceModel, ev: GradientEvaluator, ps: Sequence[float],
             cfg: QuadratureConfig = QuadratureConfig(), ball: GroupBall | None = None,
             domain: str = "collar") -> dict:
    """NormReports for several finite exponents from one set of samples."""
    ps = tuple(float(p) for p in ps)
    if any(not (p >= 1) or math.isinf(p) for p in ps):
        raise ValueError("finite exponents >= 1 only; use sup_norm for p = inf")
    if not model.closed:
        return {p: cylinder_norm(ev, p) for p in ps}
    if domain == "dirichlet":
        if ball is None:
            raise InsufficientBall("the Dirichlet domain needs a group ball")
        return dirichlet_norms(model, ball, ev.magnitude, ps, cfg)
    integ, err, area, area_err, n, rho_seen = collar_norms(ev, ps, cfg)
    note = (f"collar domain, |rho| <= {ev.dmax:.3f} (max accepted {rho_seen:.3f}); "
            f"terms within {ev.r_series} of the point; cosets to {ev.table.cutoff:.3f}")
    if rho_seen > ev.dmax - 0.25:
        note += "; WARNING domain touches the slab edge"
    return _reports(ps, integ, err, n, cfg.seed, note, "collar", area)


def lp_norm(model: SurfaceModel, ball: GroupBall | None, field: GradientEvaluator, p: float, budget: int,
            seed: int = 0, domain: str = "collar") -> NormReport:
    cfg = QuadratureConfig(samples=budget, seed=seed)
    return lp_norms(model, field, [p], cfg, ball=ball, domain=domain)[float(p)]


def collar_area(ev: GradientEvaluator, cfg: QuadratureConfig = QuadratureConfig()) -> tuple[float, float]:
    """Area of the collar domain by acceptance ratio; equals the surface area."""
    edges, areas = _collar_strata(ev, cfg.strata)
    alloc = _allocate(cfg.samples, areas, cfg.min_per_stratum)
    rngs = _strata_rngs(cfg.seed, cfg.strata)
    tab = ev.table
    hits = np.zeros(cfg.strata)
    for j in range(cfg.strata):
        t, rho = _sample_slab(rngs[j], int(alloc[j]), ev.length, edges[j], edges[j + 1])
        w = fermi_to_z(t, rho)
        cells = ev.grid.locate(t, rho)
        ok = _kernels.nearest_lift_ok(w.real.copy(), w.imag.copy(), tab.lift_a, tab.lift_b, tab.dist_to_base, cells,
                                      ev.cell_start, ev.members)
        hits[j] = np.count_nonzero(ok)
    frac = hits / alloc
    return float((frac * areas).sum()), float(np.sqrt((frac * (1 - frac) * areas ** 2 / alloc).sum()))


# --------------------------------------------------------- Dirichlet domain


def _disk_to_upper(w):
    return 1j * (1 + w) / (1 - w)


def _upper_to_disk(z):
    return (z - 1j) / (z + 1j)


@dataclass
class DirichletSampler:
    """Hyperbolic-uniform points in a disk about the basepoint, filtered by the domain test."""

    model: SurfaceModel
    ball: GroupBall
    cap: float

    def __post_init__(self):
        if not self.model.closed:
            raise NotClosed("the cylinder has no compact fundamental domain")
        if self.ball.radius < 2 * self.cap - 1e-9:
            raise InsufficientBall(f"ball radius {self.ball.radius} < {2 * self.cap} needed")
        self._b = self.model.basepoint.z

    def _to_base(self, z):
        # the affine map taking i to the basepoint
        return z * self._b.imag + self._b.real

    def strata(self, k: int):
        edges = np.linspace(0.0, self.cap, k + 1)
        areas = 2 * math.pi * np.diff(np.cosh(edges))
        return edges, areas

    def sample(self, rng, n, r0, r1):
        c = np.cosh(r0) + (np.cosh(r1) - np.cosh(r0)) * rng.random(n)
        r = np.arccosh(c)
        phi = 2 * math.pi * rng.random(n)
        w = np.tanh(r / 2) * np.exp(1j * phi)
        return self._to_base(_disk_to_upper(w)), r

    def inside(self, z):
        return in_dirichlet_domain(self.ball, z, 2 * self.cap)


def dirichlet_norms(model, ball, field: Callable, ps, cfg: QuadratureConfig, cap: float | None = None):
    cap = min(model.diam_est + 1, ball.radius / 2) if cap is None else cap
    ps = tuple(float(p) for p in ps)
    smp = DirichletSampler(model, ball, cap)
    k = cfg.strata
    edges, areas = smp.strata(k)
    alloc = _allocate(cfg.samples, areas, cfg.min_per_stratum)
    rngs = _strata_rngs(cfg.seed, k)
    sums = _StratumSums(ps, k)
    rmax = 0.0
    for j in range(k):
        done = 0
        while done < alloc[j]:
            m = int(min(cfg.chunk, alloc[j] - done))
            z, r = smp.sample(rngs[j], m, edges[j], edges[j + 1])
            inside = smp.inside(z)
            vals = np.zeros(m)
            if np.any(inside):
                vals[inside] = field(z[inside])
                rmax = max(rmax, float(np.max(r[inside])))
            sums.add(j, vals, inside)
            done += m
    if rmax > cap - 0.1:
        # accepted points at the rim: the domain is truncated and the integral is wrong
        raise InsufficientBall(f"Dirichlet domain reaches the sampling radius {cap:.3f}; enlarge the ball")
    integ, err, area, _ = sums.integrals(areas)
    note = f"Dirichlet domain at the basepoint, sampled to radius {cap:.3f} (max accepted {rmax:.3f})"
    return _reports(ps, integ, err, int(sums.n.sum()), cfg.seed, note, "dirichlet", area)


@dataclass(frozen=True)
class AreaReport:
    area: float
    stat_error: float
    expected: float
    samples: int
    seed: int
    cap: float
    max_accepted_radius: float
    domain: str = "dirichlet"

    @property
    def relative_error(self) -> float:
        return abs(self.area - self.expected) / self.expected

    def to_json(self) -> dict:
        return asdict(self)


def area_check(model: SurfaceModel, ball: GroupBall | None = None, budget: int = 1_000_000, seed: int = 0,
               cap: float | None = None, strata: int = 32) -> AreaReport:
    """Monte-Carlo area of the Dirichlet domain at the basepoint.

    The sampling disk grows until no accepted point comes near its rim.
    """
    if not model.closed:
        raise NotClosed("the cylinder has infinite area")
    cap = model.diam_est + 1 if cap is None else cap
    while True:
        if ball is None or ball.radius < 2 * cap:
            ball = enumerate_ball(model, 2 * cap)
        smp = DirichletSampler(model, ball, cap)
        edges, areas = smp.strata(strata)
        alloc = _allocate(budget, areas, 64)
        rngs = _strata_rngs(seed, strata)
        hits = np.zeros(strata)
        rmax = 0.0
        for j in range(strata):
            done = 0
            while done < alloc[j]:
                m = int(min(200_000, alloc[j] - done))
                z, r = smp.sample(rngs[j], m, edges[j], edges[j + 1])
                ok = smp.inside(z)
                hits[j] += np.count_nonzero(ok)
                if np.any(ok):
                    rmax = max(rmax, float(np.max(r[ok])))
                done += m
        if rmax <= cap - 0.1:
            break
        cap += 1.0
    frac = hits / alloc
    area = float((frac * areas).sum())
    err = float(np.sqrt((frac * (1 - frac) * areas ** 2 / alloc).sum()))
    return AreaReport(area, err, model.area, int(alloc.sum()), seed, cap, rmax)


# --------------------------------------------------------------- cylinder


def _panel_rule(lo, hi, panels, nodes):
    x, w = np.polynomial.legendre.leggauss(nodes)
    e = np.linspace(lo, hi, panels + 1)
    mid = 0.5 * (e[1:] + e[:-1])[:, None]
    half = 0.5 * np.diff(e)[:, None]
    return (mid + half * x).ravel(), (half * w).ravel()


def cylinder_norm(ev: GradientEvaluator, p: float, nodes: int = 20) -> NormReport:
    """Deterministic tensor-grid quadrature over the annulus 1 <= |z| <= e^l.

    The angular variable is parametrised by the signed distance rho to the
    core (sin theta = sech rho), which makes the integrand smooth and
    exponentially decaying.
    """
    ell = ev.length
    # |grad| <= (2/pi) sech^2 rho, so the tail beyond R is below 4 e^{-(2p-1)R}
    big = min(40.0 / (2 * p - 1), 700.0)

    def integral(panels):
        rho, wr = _panel_rule(-big, big, panels, nodes)
        t, wt = _panel_rule(0.0, ell, 1, 4)
        tt, rr = np.meshgrid(t, rho, indexing="ij")
        w = np.outer(wt, wr * np.cosh(rho))
        z = fermi_to_z(tt.ravel(), rr.ravel())
        mag, _ = ev.magnitude_local(z)
        return float(np.sum(w.ravel() * mag ** p))

    panels = int(math.ceil(2 * big))
    i1 = integral(panels)
    i2 = integral(2 * panels)
    note = f"annulus tensor grid, |rho| <= {big:.1f}, {2 * panels} panels x {nodes} nodes; change on halving {abs(i2 - i1):.2e}"
    return NormReport(p, i2 ** (1 / p), 0.0, note, 4 * 2 * panels * nodes, None, i2, abs(i2 - i1), "annulus")


# ---------------------------------------------------------------- sup norm


def _slab_grid(dmax: float, ell: float, budget: int, near: float = SQRT2_LOG + 0.05):
    """Grid on the slab with doubled density in rho within `near` of the core."""
    # rows: uniform in rho, extra rows near the core; columns scale with cosh rho
    budget = max(budget, 100)
    base_rows = max(11, int(math.sqrt(budget / 4)) | 1)
    rho = np.linspace(-dmax, dmax, base_rows)
    step = rho[1] - rho[0]
    fine = np.arange(-near, near + 1e-12, step / 2)
    rho = np.unique(np.concatenate([rho, fine, [0.0]]))
    weights = np.cosh(rho)
    cols = np.maximum(4, np.round(weights / weights.sum() * budget).astype(int))
    cols = np.where(np.abs(rho) <= near, 2 * cols, cols)
    ts, rs = [], []
    for r, c in zip(rho, cols):
        ts.append((np.arange(c) + 0.5) * ell / c)
        rs.append(np.full(c, r))
    return np.concatenate(ts), np.concatenate(rs)


def _maximize(fun, t0, r0, ell, dmax):
    def neg(v):
        t, r = v
        if abs(r) > dmax:
            return 0.0
        return -float(fun(np.array([t % ell]), np.array([r]))[0])

    res = minimize(neg, np.array([t0, r0]), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000,
                            "initial_simplex": np.array([[t0, r0], [t0 + ell / 50, r0], [t0, r0 + 0.05]])})
    return float(-res.fun), float(res.x[0] % ell), float(res.x[1])


@dataclass(frozen=True)
class MaxReport:
    value: float
    t: float
    rho: float
    grid_points: int
    point_local: complex


def slab_max(ev: GradientEvaluator, fun, grid_budget: int, top: int = 10) -> MaxReport:
    """Grid search plus local Nelder-Mead from the best `top` grid points.

    The slab contains a fundamental domain, so its maximum is the maximum
    over the surface of any Gamma-invariant function.
    """
    dmax = ev.dmax if ev.table.cutoff < math.inf else min(ev.dmax, 6.0)
    t, rho = _slab_grid(dmax, ev.length, grid_budget)
    vals = fun(t, rho)
    order = np.argsort(-vals, kind="stable")[:top]
    best = (float(vals[order[0]]), float(t[order[0]]), float(rho[order[0]]))
    for j in order:
        v, tt, rr = _maximize(fun, float(t[j]), float(rho[j]), ev.length, dmax)
        if v > best[0]:
            best = (v, tt, rr)
    return MaxReport(best[0], best[1], best[2], len(t), complex(fermi_to_z(best[1], best[2])))


def sup_norm(model: SurfaceModel, ball: GroupBall | None, field: GradientEvaluator, grid_budget: int = 40_000,
             kind: str = "gradient") -> NormReport:
    """Largest value found; a lower bound for the supremum."""
    ev = field

    if kind == "gradient":
        def fun(t, rho):
            return ev.magnitude_local(fermi_to_z(t, rho))[0]
    elif kind == "envelope":
        def fun(t, rho):
            return ev.evaluate_local(fermi_to_z(t, rho))[1]
    else:
        raise ValueError(kind)
    m = slab_max(ev, fun, grid_budget)
    note = (f"grid of {m.grid_points} points on the collar slab plus local search; "
            f"argmax at rho={m.rho:.6f}; lower bound for the supremum")
    return NormReport(math.inf, m.value, 0.0, note, m.grid_points, None, domain="collar-slab", lower_bound_only=True)


# -------------------------------------------------------------- dual norms


@dataclass(frozen=True)
class DualNormBracket:
    p: float
    lower: float
    upper: float
    q: float
    lower_error: float = 0.0
    upper_error: float = 0.0

    def to_json(self) -> dict:
        d = asdict(self)
        for k in ("p", "q"):
            if math.isinf(d[k]):
                d[k] = "inf"
        return d


def conjugate_exponent(p: float) -> float:
    if math.isinf(p):
        return 1.0
    if p == 1:
        return math.inf
    return p / (p - 1)


def _same_exponent(a: float, b: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= 1e-9 * max(abs(a), abs(b))


def _report_for(reports: dict, p: float) -> NormReport:
    # conjugates of 4/3 and friends come back a rounding error away
    for k, r in reports.items():
        if _same_exponent(float(k), p):
            return r
    raise InconsistentReports(f"missing report for exponent {p}")


def dual_lp_bracket(reports: dict, p: float) -> DualNormBracket:
    """Hoelder bracket  ||mu||_2^2 / ||mu||_p <= ||mu||_{L^p} <= ||mu||_q."""
    p = float(p)
    q = conjugate_exponent(p)
    r2, rp, rq = (_report_for(reports, x) for x in (2.0, p, q))
    for want, r in ((2.0, r2), (p, rp), (q, rq)):
        if not _same_exponent(r.p, want):
            raise InconsistentReports(f"report for {want} has p={r.p}")
    lower = r2.value ** 2 / rp.value
    lower_err = lower * math.hypot(2 * r2.stat_error / r2.value, rp.stat_error / rp.value)
    return DualNormBracket(p, lower, rq.value, q, lower_err, rq.stat_error)
