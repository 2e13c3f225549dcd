"""How the discrete norm estimate moves as the grid is refined.

For each kernel the grid doubles from --start points; the table shows the
estimate, its relative change and the ratio to the criterion value.
"""

import argparse

from kernelbounds.core import ExponentSet, Window, cell_grid
from kernelbounds.criteria import criterion
from kernelbounds.kernels import builtin, lift
from kernelbounds.opnorm import discretize, norm_lower_bound


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--start", type=int, default=50)
    ap.add_argument("--levels", type=int, default=5)
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--q", type=float, default=4.0 / 3.0)
    args = ap.parse_args()
    exps = ExponentSet(args.p, args.q)
    w = Window(0.0, 1.0)
    kernels = [lift(builtin("constant")), builtin("log_ratio"),
               builtin("power_diff", alpha=0.5), builtin("power_diff", alpha=1.0)]
    for k in kernels:
        b = criterion("3.9", k, exps, u=w, v=w, window=(0.0, 1.0)).max_value
        print(f"\n{k.name} {k.params or ''}  max B = {b:.9f}")
        prev = None
        n = args.start
        for _ in range(args.levels):
            est = norm_lower_bound(discretize(k, w, w, cell_grid(1e-6, 1.0, n)), exps)
            change = "" if prev is None else f"{(est.value - prev) / prev:+.2e}"
            print(f"  N={n:<6d} norm={est.value:.8f}  change={change:<10} ratio={est.value / b:.4f}")
            prev = est.value
            n *= 2


if __name__ == "__main__":
    main()
