"""Twelve-point study: criterion value, both integral forms and the norm estimate.

Prints one row per (kernel, p, q) and the per-(p, q) spread of the
norm/criterion ratio.  Usage: python scripts/equivalence_sweep.py [--grid 200]
"""

import argparse
import time

from kernelbounds.core import ExponentSet, Window, cell_grid
from kernelbounds.criteria import criterion
from kernelbounds.kernels import builtin, lift
from kernelbounds.opnorm import discretize, norm_lower_bound

KERNELS = [lift(builtin("constant")), builtin("log_ratio"),
           builtin("power_diff", alpha=0.5), builtin("power_diff", alpha=1.0)]
EXPONENTS = [(2.0, 4.0 / 3.0), (2.0, 1.5), (3.0, 2.0)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=200)
    ap.add_argument("--variant", default="3.9")
    args = ap.parse_args()
    w = Window(0.0, 1.0)
    grid = cell_grid(1e-6, 1.0, args.grid)
    ratios = {}
    print(f"{'kernel':<16}{'p':>5}{'q':>7}{'max B':>14}{'form gap':>11}{'norm':>12}{'ratio':>9}")
    t0 = time.perf_counter()
    for k in KERNELS:
        label = k.name + (f"({k.params['alpha']:g})" if "alpha" in k.params else "")
        for p, q in EXPONENTS:
            exps = ExponentSet(p, q)
            rep = criterion(args.variant, k, exps, u=w, v=w, window=(0.0, 1.0))
            est = norm_lower_bound(discretize(k, w, w, grid), exps)
            r = est.value / rep.max_value
            ratios.setdefault((p, q), []).append(r)
            print(f"{label:<16}{p:>5.2f}{q:>7.3f}{rep.max_value:>14.9f}"
                  f"{rep.cross_check_delta:>11.1e}{est.value:>12.6f}{r:>9.4f}")
    print(f"\nelapsed {time.perf_counter() - t0:.1f}s")
    for (p, q), rs in ratios.items():
        print(f"(p, q) = ({p:g}, {q:.4g}): ratio spread {max(rs) / min(rs):.3f}")


if __name__ == "__main__":
    main()
