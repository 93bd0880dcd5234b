"""Both Newton update rules on the L-shape from shared random starts.

Positive starts are the default; --start signed draws uniform(-1, 1) fields.
"""
import argparse

from spectral_descent.grid.domain import l_shape
from spectral_descent.grid.flow import FlowConfig
from spectral_descent.grid.newton import compare_grid_rules


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--grid", type=int, default=41)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--gamma", type=float, nargs="+", default=[50.0])
    p.add_argument("--start", choices=["positive", "signed"], default="positive")
    p.add_argument("--inner", choices=["minres", "direct"], default="minres")
    args = p.parse_args()

    domain = l_shape(args.grid)
    for gamma in args.gamma:
        stats = compare_grid_rules(domain, args.trials, FlowConfig(gamma=gamma, inner=args.inner),
                                   start=args.start)
        for rule, s in stats.rules.items():
            print(f"gamma={gamma:g}  {rule:10s}  hits={s.hits:3d}/{s.trials}  mean_lambda={s.mean_lambda:.4f}"
                  f"  failures={s.failures}")


if __name__ == "__main__":
    main()
