"""Family-level checks: gradient-norm scaling, curvature brackets, stratum distances."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .quadrature import (
    NormReport,
    QuadratureConfig,
    conjugate_exponent,
    lp_norms,
    slab_max,
    sup_norm,
)
from .series import R_SERIES, GradientEvaluator, RieraResult, dist_point_to_lifts, double_coset_table, fermi_to_z, riera
from .surface import SurfaceModel, build_surface, from_fenchel_nielsen, systole

FINITE_EXPONENTS = (1.0, 4.0 / 3.0, 2.0, 4.0)
INF = math.inf
SQRT2_LOG = math.log(1 + math.sqrt(2))


def parse_exponent(s: str) -> float:
    s = s.strip().lower()
    if s in ("inf", "infinity", "oo"):
        return INF
    if "/" in s:
        a, b = s.split("/")
        return float(a) / float(b)
    return float(s)


def exponent_label(p: float) -> str:
    if math.isinf(p):
        return "inf"
    if abs(p - 4 / 3) < 1e-12:
        return "4/3"
    return f"{p:g}"


@dataclass(frozen=True)
class FamilySpec:
    """Genus-2 surfaces with lengths (t, *fixed) as t runs over a grid."""

    lengths: tuple = tuple(float(x) for x in np.geomspace(0.05, 3.0, 8))
    fixed: tuple = (2.0, 2.0)
    twists: tuple = (0.0, 0.0, 0.0)
    label: str = "alpha"
    kind: str = "fn2-pinch"
    # scale ratios by the systole (part 1) or by the curve length (part 2)
    normalize_by: str = "systole"

    def __post_init__(self):
        ls = np.asarray(self.lengths, dtype=float)
        if np.any(ls <= 0) or np.any(np.diff(ls) <= 0):
            raise ValueError("family lengths must be positive and strictly increasing")

    @classmethod
    def from_grid(cls, text: str, **kw) -> FamilySpec:
        lo, hi, n = text.split(":")
        return cls(lengths=tuple(float(x) for x in np.geomspace(float(lo), float(hi), int(n))), **kw)

    def member(self, t: float) -> SurfaceModel:
        return from_fenchel_nielsen((t, *self.fixed), self.twists)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AnalysisConfig:
    samples: int = 200_000
    seed: int = 0
    sup_grid: int = 20_000
    r_series: float = R_SERIES
    riera_u: float = 1000.0
    band: float = 10.0
    exponent_tol: float = 0.1

    def quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(samples=self.samples, seed=self.seed)


@dataclass
class MemberResult:
    surface: str
    curve: str
    curve_length: float
    systole: float
    norms: dict
    riera: RieraResult
    evaluator: dict

    def norm(self, p: float) -> NormReport:
        return self.norms[float(p)]

    def to_json(self) -> dict:
        return {
            "surface": self.surface,
            "curve": self.curve,
            "curve_length": self.curve_length,
            "systole": self.systole,
            "norms": {exponent_label(p): r.to_json() for p, r in sorted(self.norms.items())},
            "riera": self.riera.to_json(),
            "evaluator": self.evaluator,
        }


def describe(model: SurfaceModel) -> str:
    if model.kind == "fn2":
        ls = ",".join(f"{x:.6g}" for x in model.fn_coords["lengths"])
        tw = ",".join(f"{x:.6g}" for x in model.fn_coords["twists"])
        return f"fn2({ls};{tw})"
    if model.kind == "cylinder":
        return f"cylinder({model.fn_coords['lengths'][0]:.6g})"
    return model.kind


def evaluate_member(model: SurfaceModel, label: str, cfg: AnalysisConfig = AnalysisConfig(),
                    ev: GradientEvaluator | None = None) -> MemberResult:
    """All the norms the family checks need, from one evaluator and one sample set."""
    ev = ev or GradientEvaluator.build(model, label, r_series=cfg.r_series)
    norms = dict(lp_norms(model, ev, FINITE_EXPONENTS, cfg.quadrature()))
    norms[INF] = sup_norm(model, None, ev, cfg.sup_grid)
    if model.closed:
        dt = double_coset_table(model, label, cfg.riera_u)
        rr = riera(model, label, dt)
        sys_len = systole(model).length
    else:
        rr = riera(model, label, None)
        sys_len = model.curve(label).length
    return MemberResult(describe(model), label, model.curve(label).length, sys_len, norms, rr, ev.metadata())


def evaluate_family(family: FamilySpec, cfg: AnalysisConfig = AnalysisConfig()) -> list[MemberResult]:
    return [evaluate_member(family.member(t), family.label, cfg) for t in family.lengths]


# ------------------------------------------------------------ ratio table


@dataclass(frozen=True)
class RatioRow:
    surface: str
    curve: str
    curve_length: float
    systole: float
    p: float
    value: float
    stat_error: float
    ratio: float


@dataclass
class RatioTable:
    rows: list
    bands: dict
    threshold: float
    normalize_by: str

    def passes(self) -> bool:
        return all(b["max_over_min"] <= self.threshold for b in self.bands.values())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["surface", "curve", "curve_length", "systole", "p", "value", "stat_error", "ratio"])
        for r in self.rows:
            w.writerow([r.surface, r.curve, repr(r.curve_length), repr(r.systole), exponent_label(r.p),
                        repr(r.value), repr(r.stat_error), repr(r.ratio)])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "threshold": self.threshold,
            "normalize_by": self.normalize_by,
            "bands": self.bands,
            "rows": [{**asdict(r), "p": exponent_label(r.p)} for r in self.rows],
        }


def gradient_ratio_table(family: FamilySpec, exponents=(1.0, 2.0, 4.0, INF), cfg: AnalysisConfig = AnalysisConfig(),
                         results: list[MemberResult] | None = None) -> RatioTable:
    """||grad||_p / L^{1/p} per member, with max/min bands per exponent.

    L is the systole or the curve length depending on the family; for
    p = inf the scale factor is 1.
    """
    results = results if results is not None else evaluate_family(family, cfg)
    rows = []
    for m in results:
        scale_len = m.systole if family.normalize_by == "systole" else m.curve_length
        for p in exponents:
            p = float(p)
            r = m.norm(p)
            s = 1.0 if math.isinf(p) else scale_len ** (1 / p)
            rows.append(RatioRow(m.surface, m.curve, m.curve_length, m.systole, p, r.value, r.stat_error,
                                 r.value / s))
    bands = {}
    for p in exponents:
        rs = [r.ratio for r in rows if r.p == float(p)]
        bands[exponent_label(float(p))] = {"min": min(rs), "max": max(rs), "max_over_min": max(rs) / min(rs)}
    return RatioTable(rows, bands, cfg.band, family.normalize_by)


# -------------------------------------------------------------- curvature


@dataclass(frozen=True)
class CurvatureBracket:
    curve: str
    ratio: float
    holk_lower: float
    holk_upper: float
    l_sys: float
    ratio_error: float = 0.0

    def to_json(self) -> dict:
        return asdict(self)


def holk_from_norms(label: str, r2: NormReport, r4: NormReport, l_sys: float) -> CurvatureBracket:
    i2, i4 = r2.integral, r4.integral
    ratio = i4 / i2 ** 2
    err = ratio * math.hypot(r4.integral_error / i4, 2 * r2.integral_error / i2)
    return CurvatureBracket(label, ratio, -2.0 * ratio, -2.0 / 3.0 * ratio, l_sys, err)


def holk_bracket(model: SurfaceModel, label: str, budget: int = 200_000, cfg: AnalysisConfig = AnalysisConfig(),
                 member: MemberResult | None = None) -> CurvatureBracket:
    """Holomorphic sectional curvature bracket along the unit gradient direction."""
    if member is None:
        ev = GradientEvaluator.build(model, label, r_series=cfg.r_series)
        rs = lp_norms(model, ev, (2.0, 4.0), QuadratureConfig(samples=budget, seed=cfg.seed))
        l_sys = systole(model).length if model.closed else model.curve(label).length
        return holk_from_norms(label, rs[2.0], rs[4.0], l_sys)
    return holk_from_norms(label, member.norm(2), member.norm(4), member.systole)


# ------------------------------------------------------- stratum distance


def _min_powerlaw_integral(a1, k1, a2, k2, s):
    """Integral over (0, s] of min(a1 x^k1, a2 x^k2)."""
    def whole(a, k, lo, hi):
        if k <= -1 and lo == 0:
            raise ValueError(f"integrand exponent {k:.3f} is not integrable at 0")
        if abs(k + 1) < 1e-12:
            return a * math.log(hi / lo)
        return a / (k + 1) * (hi ** (k + 1) - lo ** (k + 1))

    cuts = [0.0, s]
    if abs(k1 - k2) > 1e-15:
        log_xc = math.log(a2 / a1) / (k1 - k2)
        if log_xc < math.log(s):
            cuts = [0.0, math.exp(log_xc), s]
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (lo + hi)
        if a1 * mid ** k1 <= a2 * mid ** k2:
            total += whole(a1, k1, lo, hi)
        else:
            total += whole(a2, k2, lo, hi)
    return total


def powerlaw_integral(x: np.ndarray, f: np.ndarray, upto: float,
                      envelope: tuple[float, float] | None = None) -> tuple[float, float]:
    """Integral of the log-log interpolant of f from 0 to `upto`.

    Below x[0] the power law through the two smallest points is used, capped
    by the rigorous bound f <= c x^k when `envelope` = (c, k) is given.
    Returns (integral, exponent used below x[0]).
    """
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    if upto > x[-1] * (1 + 1e-12):
        raise ValueError("upper limit beyond the grid")
    k0 = math.log(f[1] / f[0]) / math.log(x[1] / x[0])
    if k0 <= -1:
        raise ValueError(f"integrand exponent {k0:.3f} is not integrable at 0")

    def seg(xa, fa, k, xb):
        if abs(k + 1) < 1e-12:
            return fa * xa * math.log(xb / xa)
        return fa * xa / (k + 1) * ((xb / xa) ** (k + 1) - 1)

    lo = min(upto, x[0])
    if envelope is None:
        total = f[0] * x[0] / (k0 + 1) * (lo / x[0]) ** (k0 + 1)
    else:
        total = _min_powerlaw_integral(f[0] / x[0] ** k0, k0, envelope[0], envelope[1], lo)
    for i in range(len(x) - 1):
        if upto <= x[i]:
            break
        k = math.log(f[i + 1] / f[i]) / math.log(x[i + 1] / x[i])
        total += seg(x[i], f[i], k, min(upto, x[i + 1]))
    return total, k0


@dataclass
class StrataReport:
    p: float
    q: float
    grid: list
    integrand: list
    integrand_error: list
    distance_upper: list
    fitted_exponent: float
    extension_exponent: float
    expected_exponent: float
    numerator: str
    envelope: tuple | None = None
    denominator: str = "Riera"

    def distance_at(self, l0: float) -> float:
        return powerlaw_integral(np.array(self.grid), np.array(self.integrand), l0, self.envelope)[0]

    def to_json(self) -> dict:
        d = asdict(self)
        for k in ("p", "q"):
            if math.isinf(d[k]):
                d[k] = "inf"
        return d


def stratum_distance_bound(family: FamilySpec, p: float, cfg: AnalysisConfig = AnalysisConfig(),
                           results: list[MemberResult] | None = None) -> StrataReport:
    """Upper bound for the L^p distance to the stratum where the curve is pinched.

    Along the gradient flow of the length, dl/dt = -|grad|_WP^2 / |grad|_{L^p},
    so the distance is at most the integral of |grad|_q / |grad|_WP^2 dl,
    with |grad|_q the upper end of the dual-norm bracket.
    """
    p = float(p)
    if not p > 1:
        raise ValueError("need p > 1")
    q = conjugate_exponent(p)
    results = results if results is not None else evaluate_family(family, cfg)
    grid = [m.curve_length for m in results]
    integrand, errs = [], []
    for m in results:
        wp2 = m.riera.value
        if q == 2.0:
            num, num_err = math.sqrt(wp2), 0.0
        else:
            r = m.norm(q)
            num, num_err = r.value, r.stat_error
        integrand.append(num / wp2)
        errs.append(num_err / wp2)
    x = np.array(grid)
    f = np.array(integrand)
    # the WP norm squared is at least (2/pi) l, so 1/|grad|_WP <= sqrt(pi/2) l^(-1/2)
    envelope = (math.sqrt(math.pi / 2), -0.5) if q == 2.0 else None
    dist = []
    k0 = None
    for l0 in grid:
        v, k0 = powerlaw_integral(x, f, l0, envelope)
        dist.append(v)
    slope = float(np.polyfit(np.log(x), np.log(dist), 1)[0])
    expected = 1.0 if math.isinf(p) else 1 - 1 / p
    numerator = "sqrt(Riera)" if q == 2.0 else f"L^{exponent_label(q)} quadrature"
    return StrataReport(p, q, grid, integrand, errs, dist, slope, float(k0), expected, numerator, envelope)


# ---------------------------------------------------------------- argmax


@dataclass(frozen=True)
class ArgmaxReport:
    curve: str
    distance: float
    envelope_max: float
    point_local: complex
    grid_points: int
    bound: float = SQRT2_LOG

    def to_json(self) -> dict:
        d = asdict(self)
        d["point_local"] = [self.point_local.real, self.point_local.imag]
        return d


def argmax_report(model: SurfaceModel, label: str, grid_budget: int = 20_000,
                  ev: GradientEvaluator | None = None) -> ArgmaxReport:
    ev = ev or GradientEvaluator.build(model, label)

    def fun(t, rho):
        return ev.evaluate_local(fermi_to_z(t, rho))[1]

    m = slab_max(ev, fun, grid_budget)
    d = float(np.min(dist_point_to_lifts(m.point_local, ev.table.lift_a, ev.table.lift_b)))
    return ArgmaxReport(label, d, m.value, m.point_local, m.grid_points)


def argmax_distance_to_curve(model: SurfaceModel, label: str, grid_budget: int = 20_000) -> float:
    """Distance from the maximum of the envelope to the nearest lift of the curve."""
    return argmax_report(model, label, grid_budget).distance


__all__ = [
    "AnalysisConfig",
    "ArgmaxReport",
    "CurvatureBracket",
    "FamilySpec",
    "MemberResult",
    "RatioTable",
    "StrataReport",
    "argmax_distance_to_curve",
    "argmax_report",
    "build_surface",
    "evaluate_family",
    "evaluate_member",
    "gradient_ratio_table",
    "holk_bracket",
    "stratum_distance_bound",
]
