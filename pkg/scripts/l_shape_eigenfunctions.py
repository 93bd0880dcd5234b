"""Deflated gradient flow on the L-shaped domain; writes PGM/CSV fields and a table.

    python3 scripts/l_shape_eigenfunctions.py --grid 81 --count 9 --out runs/l_shape
"""
import argparse
import time
from pathlib import Path

from spectral_descent.grid.domain import l_shape
from spectral_descent.grid.export import export_field
from spectral_descent.grid.flow import FlowConfig, solve_eigenfunctions
from spectral_descent.io import write_rows


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--grid", type=int, default=81)
    p.add_argument("--count", type=int, default=9)
    p.add_argument("--gamma", type=float, default=50.0)
    p.add_argument("--out", default="runs/l_shape")
    args = p.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = FlowConfig(gamma=args.gamma)
    t0 = time.perf_counter()
    pairs, traces = solve_eigenfunctions(l_shape(args.grid), args.count, cfg)
    rows = []
    for j, (pair, trace) in enumerate(zip(pairs, traces), 1):
        export_field(pair.field, out / f"u{j:02d}.pgm", "pgm", lam=pair.lam, gamma=cfg.gamma)
        export_field(pair.field, out / f"u{j:02d}.csv", "csv")
        rows.append((j, pair.lam, pair.residual, pair.steps))
        print(f"{j:3d}  lambda={pair.lam:.10f}  steps={pair.steps}")
    write_rows(out / "eigenvalues.csv", ["index", "lambda", "residual", "steps"], rows)
    print(f"{time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
