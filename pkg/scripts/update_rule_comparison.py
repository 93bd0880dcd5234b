"""Hit counts of the norm-based and Rayleigh-quotient Newton updates on random SPD pairs.

    python3 scripts/update_rule_comparison.py --n 10 --pairs 5 --trials 200
    python3 scripts/update_rule_comparison.py --n 50 --pairs 1 --trials 100
"""
import argparse

from spectral_descent.cli import matrix_problem
from spectral_descent.functional import SolverConfig
from spectral_descent.newton import compare_update_rules


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--pairs", type=int, default=5)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    print("pair  rule        hits  mean_lambda  max_lambda  failures")
    for i in range(args.pairs):
        a, b = matrix_problem(args.seed, i, args.n)
        # same per-pair seed as the CLI so the numbers agree with `compare`
        cfg = SolverConfig(gamma=args.gamma, seed=args.seed * 1000003 + i)
        stats = compare_update_rules(a, b, args.trials, cfg)
        for rule, s in stats.rules.items():
            print(f"{i + 1:4d}  {rule:10s}  {s.hits:4d}  {s.mean_lambda:11.5f}  {s.max_lambda:10.5f}  {s.failures:8d}")


if __name__ == "__main__":
    main()
