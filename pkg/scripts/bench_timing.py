"""Per-eigenfunction timing of deflated flow against both Newton updates.

Prints the table and the three shape statistics checked by the test suite.
"""
import argparse

import numpy as np

from spectral_descent.grid.bench import bench_deflated
from spectral_descent.grid.domain import l_shape
from spectral_descent.grid.flow import FlowConfig


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--grid", type=int, default=41)
    p.add_argument("--count", type=int, default=15)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--inner", choices=["minres", "direct"], default="direct")
    p.add_argument("--repeats", type=int, default=3)
    args = p.parse_args()

    rows = bench_deflated(l_shape(args.grid), args.count, args.epsilon, FlowConfig(inner=args.inner),
                          repeats=args.repeats)
    cum = np.cumsum([r.flow_seconds for r in rows])
    print("  k      lambda   flow_cum    newton       rqi")
    for r, c in zip(rows, cum):
        print(f"{r.index:3d}  {r.lam:10.5f}  {c:9.3f}  {r.newton_seconds:8.4f}  {r.rqi_seconds:8.4f}")
    newton = np.array([r.newton_seconds for r in rows])
    rqi = np.array([r.rqi_seconds for r in rows])
    print(f"mean second difference of cumulative flow time: {np.diff(cum, 2).mean():.4f} s")
    print(f"Newton max/min: {newton.max() / newton.min():.2f}")
    print(f"Newton/RQI range: [{(newton / rqi).min():.2f}, {(newton / rqi).max():.2f}]")


if __name__ == "__main__":
    main()
