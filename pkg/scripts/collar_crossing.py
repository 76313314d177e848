"""Tabulate the general and systolic collar widths and locate where they cross."""

import argparse
import math
import sys
from dataclasses import dataclass

import numpy as np

from wpsystole.surface import collar_bounds, collar_crossing


@dataclass(frozen=True)
class Config:
    lo: float = 0.01
    hi: float = 10.0
    n: int = 25


def parse(argv=None) -> Config:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lo", type=float, default=Config.lo)
    ap.add_argument("--hi", type=float, default=Config.hi)
    ap.add_argument("--n", type=int, default=Config.n)
    a = ap.parse_args(argv)
    return Config(a.lo, a.hi, a.n)


def main(argv=None) -> int:
    cfg = parse(argv)
    print("length,general,systolic,combined")
    for ell in np.geomspace(cfg.lo, cfg.hi, cfg.n):
        r = collar_bounds(float(ell), True)
        print(f"{ell:.6g},{r.width_lower_general:.8f},{r.width_lower_systolic:.8f},{r.combined_bound:.8f}")
    l_star, w = collar_crossing()
    t = math.exp(l_star / 4)
    print(f"crossing at length {l_star:.8f} (t = {t:.6f}), common width {w:.8f} = ln t", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
