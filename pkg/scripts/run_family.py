"""Gradient ratio table and stratum distances along the pinching family."""

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path

from wpsystole.analysis import (
    AnalysisConfig,
    FamilySpec,
    evaluate_family,
    exponent_label,
    gradient_ratio_table,
    parse_exponent,
    stratum_distance_bound,
)


@dataclass(frozen=True)
class Config:
    grid: str = "0.05:3:8"
    exponents: tuple = (1.0, 2.0, 4.0, float("inf"))
    samples: int = 200_000
    sup_grid: int = 20_000
    seed: int = 0
    out: str = "family_out"


def parse(argv=None) -> Config:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", default=Config.grid, help="lo:hi:n, geometric")
    ap.add_argument("--p", default="1,2,4,inf")
    ap.add_argument("--samples", type=int, default=Config.samples)
    ap.add_argument("--sup-grid", type=int, default=Config.sup_grid)
    ap.add_argument("--seed", type=int, default=Config.seed)
    ap.add_argument("--out", default=Config.out)
    a = ap.parse_args(argv)
    return Config(a.grid, tuple(parse_exponent(s) for s in a.p.split(",")), a.samples, a.sup_grid, a.seed, a.out)


def main(argv=None) -> int:
    cfg = parse(argv)
    family = FamilySpec.from_grid(cfg.grid)
    acfg = AnalysisConfig(samples=cfg.samples, seed=cfg.seed, sup_grid=cfg.sup_grid)
    results = evaluate_family(family, acfg)
    table = gradient_ratio_table(family, cfg.exponents, acfg, results=results)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ratios.csv").write_text(table.to_csv())
    for p in cfg.exponents:
        if p <= 1:
            continue
        rep = stratum_distance_bound(family, p, acfg, results=results)
        lines = ["length,integrand,distance_upper"]
        lines += [f"{x!r},{f!r},{d!r}" for x, f, d in zip(rep.grid, rep.integrand, rep.distance_upper)]
        (out / f"strata_p{exponent_label(p)}.csv").write_text("\n".join(lines) + "\n")
        print(f"p={exponent_label(p)}: fitted exponent {rep.fitted_exponent:.4f} (expected {rep.expected_exponent:g})")
    for k, v in sorted(table.bands.items()):
        print(f"band p={k}: max/min {v['max_over_min']:.3f}")
    print(f"wrote {out}/")
    return 0 if table.passes() else 1


if __name__ == "__main__":
    sys.exit(main())
