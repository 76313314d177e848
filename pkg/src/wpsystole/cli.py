"""Command-line entry point.

Exit codes: 0 success, 1 a verify check failed, 2 the surface could not be
built, 3 a budget ran out (group ball cap, insufficient table), 4 the L2
quadrature and the Riera value disagree by more than 2%.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

SCHEMA_VERSION = 1
EXIT_OK, EXIT_VERIFY, EXIT_CONSTRUCTION, EXIT_BUDGET, EXIT_RIERA = 0, 1, 2, 3, 4
RIERA_TOL = 0.02


@dataclass(frozen=True)
class RunConfig:
    command: str
    surface: str = "bolza"
    lengths: tuple | None = None
    twists: tuple | None = None
    labels: tuple | None = None
    curve: str = "alpha"
    exponents: tuple = (1.0, 2.0, 4.0, math.inf)
    samples: int = 200_000
    grid: int = 20_000
    ball_radius: float | None = None
    seed: int = 0
    out: str | None = None
    format: str = "json"
    family_grid: str = "0.05:3:8"
    riera_u: float = 1000.0
    domain: str = "collar"
    threads: int | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.samples <= 0 or self.grid <= 0:
            raise ValueError("budgets must be positive")
        if self.ball_radius is not None and self.ball_radius <= 0:
            raise ValueError("ball radius must be positive")
        if self.riera_u <= 1:
            raise ValueError("Riera cutoff must exceed 1")

    def to_json(self) -> dict:
        from .analysis import exponent_label

        d = asdict(self)
        d.pop("threads")
        d.pop("out")
        d["exponents"] = [exponent_label(p) for p in self.exponents]
        return d


# ------------------------------------------------------------------ helpers


def _clean(x):
    """JSON-safe copy: inf/nan as strings, complex as pairs, numpy scalars unwrapped."""
    if isinstance(x, dict):
        return {str(k) if not isinstance(k, float) else _key(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, complex):
        return [_clean(x.real), _clean(x.imag)]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        return _clean(x.item())
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return x


def _key(p: float) -> str:
    from .analysis import exponent_label

    return exponent_label(p)


def _surface(cfg: RunConfig):
    from .surface import build_surface

    return build_surface(cfg.surface, cfg.lengths, cfg.twists, cfg.labels)


def _lengths_for_display(model) -> dict:
    return {c.label: c.length for c in model.named_curves.values()}


def _provenance(cfg: RunConfig, **budgets) -> dict:
    from . import __version__

    return {"tool": "wpsystole", "version": __version__, "schema": SCHEMA_VERSION, "command": cfg.command,
            "seed": cfg.seed, "budgets": {"samples": cfg.samples, "grid": cfg.grid,
                                          "ball_radius": cfg.ball_radius, **budgets},
            "config": cfg.to_json()}


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_csv_cell(v) for v in r])
    return buf.getvalue()


def _csv_cell(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return v


def _flat(d, prefix=""):
    for k, v in d.items():
        if isinstance(v, dict):
            yield from _flat(v, f"{prefix}{k}.")
        else:
            yield f"{prefix}{k}", json.dumps(v) if isinstance(v, list) else v


def _emit(cfg: RunConfig, record: dict, csv_text: str | None = None) -> None:
    record = _clean(record)
    text = json.dumps(record, indent=1, sort_keys=True) + "\n"
    if cfg.format == "csv":
        if csv_text is None:
            csv_text = _rows_csv(["key", "value"], list(_flat(record)))
        shown = csv_text
    else:
        shown = text
    sys.stdout.write(shown)
    if cfg.out:
        d = Path(cfg.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{cfg.command}.json").write_text(text)
        if csv_text is not None:
            (d / f"{cfg.command}.csv").write_text(csv_text)


# ----------------------------------------------------------------- commands


def cmd_systole(cfg: RunConfig) -> int:
    from .surface import collar_bounds, systole

    model = _surface(cfg)
    s = systole(model, cover_radius=cfg.ball_radius)
    collars = {}
    for c in model.named_curves.values():
        rep = collar_bounds(c.length, is_systolic=abs(c.length - s.length) <= 1e-9 * max(1.0, s.length))
        collars[c.label] = asdict(rep)
    record = {
        "provenance": _provenance(cfg),
        "surface": {"kind": model.kind, "genus": model.genus, "curves": _lengths_for_display(model)},
        "systole": s.length,
        "witness": {"entries": list(s.witness.entries()), "trace": s.witness.trace},
        "search": {"radius": s.search_radius, "cover_radius": s.cover_radius, "ball_size": s.ball_size,
                   "rigorous": s.rigorous, "notes": s.notes},
        "collar": {"systolic": asdict(collar_bounds(s.length, True)), "named_curves": collars},
    }
    _emit(cfg, record)
    return EXIT_OK


def _norm_reports(cfg: RunConfig, model, ev):
    from .quadrature import QuadratureConfig, lp_norms, sup_norm
    from .surface import enumerate_ball

    finite = [p for p in cfg.exponents if not math.isinf(p)]
    ball = None
    if cfg.domain == "dirichlet" and model.closed:
        radius = cfg.ball_radius if cfg.ball_radius is not None else 2 * (model.diam_est + 1)
        ball = enumerate_ball(model, radius)
    out = {}
    if finite:
        out.update(lp_norms(model, ev, finite, QuadratureConfig(samples=cfg.samples, seed=cfg.seed), ball=ball,
                            domain=cfg.domain))
    if any(math.isinf(p) for p in cfg.exponents):
        out[math.inf] = sup_norm(model, ball, ev, cfg.grid)
    return out


def cmd_gradnorm(cfg: RunConfig) -> int:
    from .series import GradientEvaluator, double_coset_table, riera

    model = _surface(cfg)
    ev = GradientEvaluator.build(model, cfg.curve)
    reports = _norm_reports(cfg, model, ev)
    record = {"provenance": _provenance(cfg), "surface": model.kind, "curve": cfg.curve,
              "curve_length": model.curve(cfg.curve).length, "evaluator": ev.metadata(),
              "norms": {p: r.to_json() for p, r in reports.items()}}
    status = EXIT_OK
    if 2.0 in reports:
        dt = double_coset_table(model, cfg.curve, cfg.riera_u) if model.closed else None
        rr = riera(model, cfg.curve, dt)
        q = reports[2.0].integral
        rel = abs(q - rr.value) / rr.value
        record["riera_check"] = {"riera": rr.to_json(), "quadrature": q,
                                 "quadrature_error": reports[2.0].integral_error, "relative_difference": rel,
                                 "tolerance": RIERA_TOL, "passed": rel <= RIERA_TOL}
        if rel > RIERA_TOL:
            status = EXIT_RIERA
    rows = [(p, r.value, r.stat_error, r.integral, r.integral_error, r.samples) for p, r in reports.items()]
    _emit(cfg, record, _rows_csv(["p", "value", "stat_error", "integral", "integral_error", "samples"], rows))
    return status


def cmd_riera(cfg: RunConfig) -> int:
    from .series import double_coset_table, riera

    model = _surface(cfg)
    dt = double_coset_table(model, cfg.curve, cfg.riera_u) if model.closed else None
    rr = riera(model, cfg.curve, dt)
    record = {"provenance": _provenance(cfg, riera_u=cfg.riera_u), "surface": model.kind, "curve": cfg.curve,
              "curve_length": model.curve(cfg.curve).length, "riera": rr.to_json(),
              "lower_bound": 2 / math.pi * model.curve(cfg.curve).length}
    _emit(cfg, record)
    return EXIT_OK


def cmd_holk(cfg: RunConfig) -> int:
    from .analysis import AnalysisConfig, holk_bracket

    model = _surface(cfg)
    b = holk_bracket(model, cfg.curve, cfg.samples, AnalysisConfig(samples=cfg.samples, seed=cfg.seed))
    record = {"provenance": _provenance(cfg), "surface": model.kind, "bracket": b.to_json(),
              "ratio_times_sys": b.ratio * b.l_sys}
    _emit(cfg, record)
    return EXIT_OK


def _family(cfg: RunConfig):
    from .analysis import FamilySpec

    kw = {}
    if cfg.lengths:
        if len(cfg.lengths) != 2:
            raise ValueError("strata takes the two fixed family lengths via --lengths")
        kw["fixed"] = tuple(cfg.lengths)
    if cfg.twists:
        kw["twists"] = tuple(cfg.twists)
    return FamilySpec.from_grid(cfg.family_grid, label=cfg.curve, **kw)


def cmd_strata(cfg: RunConfig) -> int:
    from .analysis import AnalysisConfig, evaluate_family, stratum_distance_bound

    family = _family(cfg)
    acfg = AnalysisConfig(samples=cfg.samples, seed=cfg.seed, sup_grid=cfg.grid, riera_u=cfg.riera_u)
    results = evaluate_family(family, acfg)
    reports = {}
    rows = []
    for p in cfg.exponents:
        if p <= 1:
            continue
        rep = stratum_distance_bound(family, p, acfg, results=results)
        reports[p] = rep.to_json()
        rows += [(p, x, f, e, d) for x, f, e, d in zip(rep.grid, rep.integrand, rep.integrand_error,
                                                        rep.distance_upper)]
    record = {"provenance": _provenance(cfg, riera_u=cfg.riera_u), "family": family.to_json(),
              "members": [r.to_json() for r in results], "strata": reports}
    _emit(cfg, record, _rows_csv(["p", "length", "integrand", "integrand_error", "distance_upper"], rows))
    return EXIT_OK


def cmd_argmax(cfg: RunConfig) -> int:
    from .analysis import argmax_report

    model = _surface(cfg)
    r = argmax_report(model, cfg.curve, cfg.grid)
    record = {"provenance": _provenance(cfg), "surface": model.kind, "argmax": r.to_json(),
              "within_bound": r.distance <= r.bound}
    _emit(cfg, record)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    from .acceptance import VerifyConfig, run_all

    vkw = dict(seed=cfg.seed, grid=cfg.grid, family_grid=cfg.family_grid, exponents=tuple(cfg.exponents),
               riera_u=cfg.riera_u)
    if "samples" in cfg.extra:
        s = cfg.extra["samples"]
        # the area tolerance is tied to its own budget, which stays fixed
        vkw.update(oracle_samples=s, family_samples=s)
    vcfg = replace(VerifyConfig(), **vkw)
    checks = run_all(vcfg, progress=lambda line: print(line, file=sys.stderr))
    ok = all(c.passed for c in checks if c.primary)
    record = {"provenance": _provenance(cfg), "verify_config": vcfg.to_json(), "passed": ok,
              "checks": [c.to_json() for c in checks]}
    rows = [(c.id, c.name, c.primary, c.passed) for c in checks]
    _emit(cfg, record, _rows_csv(["id", "name", "primary", "passed"], rows))
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {"systole": cmd_systole, "gradnorm": cmd_gradnorm, "riera": cmd_riera, "holk": cmd_holk,
            "strata": cmd_strata, "argmax": cmd_argmax, "verify": cmd_verify}


# ------------------------------------------------------------------ parsing


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(" ", "").split(",") if x)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wpsystole", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        # defaults are None so that file values can sit between flags and defaults
        sp.add_argument("--surface", help="bolza, fn2, cylinder, or a key = value surface file")
        sp.add_argument("--lengths", type=_floats, help="comma-separated lengths")
        sp.add_argument("--length", type=float, help="cylinder core length")
        sp.add_argument("--twists", type=_floats, help="comma-separated twists (length units)")
        sp.add_argument("--curve")
        sp.add_argument("--p", help="exponents, e.g. 1,2,4,inf")
        sp.add_argument("--samples", type=int)
        sp.add_argument("--grid", type=int)
        sp.add_argument("--ball-radius", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--format", choices=("json", "csv"))
        sp.add_argument("--threads", type=int)
        sp.add_argument("--family-grid", help="lo:hi:n, geometric")
        sp.add_argument("--riera-u", type=float, help="double-coset cutoff on u")
        sp.add_argument("--domain", choices=("collar", "dirichlet"))
    return ap


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    """Flags over surface file over defaults."""
    from .analysis import parse_exponent
    from .surface import parse_surface_spec

    eff: dict = {}
    extra: dict = {}
    surface = ns.surface or "bolza"
    if os.path.isfile(surface):
        spec = parse_surface_spec(Path(surface).read_text())
        surface = spec.pop("kind")
        for k in ("lengths", "twists", "labels"):
            if k in spec:
                eff[k] = tuple(spec.pop(k))
        for k, conv in (("curve", str), ("samples", int), ("grid", int), ("seed", int), ("p", str),
                        ("ball_radius", float), ("family_grid", str), ("riera_u", float)):
            if k in spec:
                eff[k] = conv(spec.pop(k))
    eff["surface"] = surface
    flags = {"lengths": ns.lengths, "twists": ns.twists, "curve": ns.curve, "samples": ns.samples, "grid": ns.grid,
             "ball_radius": ns.ball_radius, "seed": ns.seed, "p": ns.p, "family_grid": ns.family_grid,
             "riera_u": ns.riera_u, "out": ns.out, "format": ns.format, "threads": ns.threads, "domain": ns.domain}
    if ns.length is not None:
        flags["lengths"] = (ns.length,)
    eff.update({k: v for k, v in flags.items() if v is not None})
    if ns.samples is not None or "samples" in eff:
        extra["samples"] = eff["samples"]
    p = eff.pop("p", None)
    if p is not None:
        eff["exponents"] = tuple(parse_exponent(s) for s in p.split(","))
    return RunConfig(command=ns.command, extra=extra, **eff)


def _set_threads(n: int | None) -> None:
    if n is None:
        return
    if n <= 0:
        raise ValueError("threads must be positive")
    # the pool size is fixed when numba starts, so widen it first
    os.environ["NUMBA_NUM_THREADS"] = str(max(n, int(os.environ.get("NUMBA_NUM_THREADS", "0") or 0)))
    import numba

    numba.set_num_threads(n)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        if ns.threads is not None and "numba" not in sys.modules:
            os.environ["NUMBA_NUM_THREADS"] = str(max(ns.threads, 1))
        from .series import NonSimpleCurveSuspected
        from .surface import BudgetExceeded, ConstructionFailure, InsufficientBall

        cfg = resolve_config(ns)
        _set_threads(cfg.threads)
        if cfg.threads is not None:
            print(f"threads: {cfg.threads}", file=sys.stderr)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    try:
        return COMMANDS[cfg.command](cfg)
    except (BudgetExceeded, InsufficientBall) as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConstructionFailure, NonSimpleCurveSuspected, KeyError, ValueError) as exc:
        print(f"construction failure: {exc}", file=sys.stderr)
        return EXIT_CONSTRUCTION


if __name__ == "__main__":
    sys.exit(main())
