"""Compare the double-coset series for the squared WP norm with L^2 quadrature."""

import argparse
import math
import sys
from dataclasses import dataclass

from wpsystole.quadrature import QuadratureConfig, lp_norms
from wpsystole.series import GradientEvaluator, double_coset_table, riera
from wpsystole.surface import build_surface


@dataclass(frozen=True)
class Config:
    surface: str = "fn2"
    lengths: tuple = (0.1, 0.3, 1.0, 2.0)
    others: tuple = (2.0, 2.0)
    curve: str = "alpha"
    samples: int = 200_000
    riera_u: float = 1000.0
    seed: int = 0


def parse(argv=None) -> Config:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lengths", default="0.1,0.3,1,2", help="pinched lengths to scan")
    ap.add_argument("--others", default="2,2", help="the two fixed lengths")
    ap.add_argument("--samples", type=int, default=Config.samples)
    ap.add_argument("--riera-u", type=float, default=Config.riera_u)
    ap.add_argument("--seed", type=int, default=Config.seed)
    a = ap.parse_args(argv)
    f = lambda s: tuple(float(x) for x in s.split(","))  # noqa: E731
    return Config(lengths=f(a.lengths), others=f(a.others), samples=a.samples, riera_u=a.riera_u, seed=a.seed)


def main(argv=None) -> int:
    cfg = parse(argv)
    print("length,riera,tail,n_double_cosets,quadrature,quad_error,rel_diff,lower_bound")
    worst = 0.0
    for t in cfg.lengths:
        model = build_surface(cfg.surface, lengths=(t, *cfg.others))
        rr = riera(model, cfg.curve, double_coset_table(model, cfg.curve, cfg.riera_u))
        ev = GradientEvaluator.build(model, cfg.curve)
        q = lp_norms(model, ev, (2.0,), QuadratureConfig(samples=cfg.samples, seed=cfg.seed))[2.0]
        rel = abs(q.integral - rr.value) / rr.value
        worst = max(worst, rel)
        print(f"{t:g},{rr.value:.10g},{rr.tail:.3g},{rr.n_double_cosets},{q.integral:.10g},"
              f"{q.integral_error:.3g},{rel:.3g},{2 / math.pi * t:.10g}")
    print(f"worst relative difference {worst:.3g}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
