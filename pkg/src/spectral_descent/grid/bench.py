"""Cost of finishing each eigenfunction from a common warm start.

For pair j the deflated flow is first run to a loose residual ``epsilon``;
from that field the remaining work is timed three ways: the deflated flow to
full tolerance, Newton (norm rule) and Newton with the Rayleigh rule. The
flow result becomes part of the deflation basis for pair j + 1.
"""
import time
from dataclasses import dataclass, replace

import numpy as np

from ..newton import UpdateRule
from ..rng import substream
from .domain import GridDomain
from .flow import FlowConfig, _Projector, _run_flow, make_grid_pair, random_field
from .newton import newton_grid
from .operator import Stencil


@dataclass
class BenchRow:
    index: int
    lam: float
    flow_seconds: float
    newton_seconds: float
    rqi_seconds: float
    newton_lambda: float
    rqi_lambda: float


def _best_of(repeats, fn):
    best = np.inf
    for _ in range(repeats):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return out, best


def bench_deflated(domain: GridDomain, count: int, epsilon: float, cfg: FlowConfig = FlowConfig(),
                   repeats: int = 3):
    """Newton timings are the best of ``repeats`` runs (they last milliseconds);
    the flow is timed once."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if repeats < 1:
        raise ValueError("repeats must be positive")
    stencil = Stencil(domain)
    loose = replace(cfg, tol=epsilon, roundoff_factor=0.0)
    rows, units = [], []
    for j in range(count):
        project = _Projector(domain, units)
        u = project(random_field(domain, substream(cfg.seed, "bench", j, "u0")))
        u0, _, _, trace = _run_flow(stencil, u, loose, project)
        if not trace.converged:
            raise RuntimeError(f"warm start {j + 1} did not reach residual {epsilon}")

        t = time.perf_counter()
        u, _, steps, trace = _run_flow(stencil, u0.copy(), cfg, project)
        flow_s = time.perf_counter() - t
        if not trace.converged:
            raise RuntimeError(f"flow for pair {j + 1} stopped with {trace.terminal_reason}")
        pair = make_grid_pair(domain, u, cfg.gamma, stencil, steps)

        (newton_pair, _), newton_s = _best_of(
            repeats, lambda: newton_grid(domain, u0, cfg, UpdateRule.NORM_BASED))
        (rqi_pair, _), rqi_s = _best_of(
            repeats, lambda: newton_grid(domain, u0, cfg, UpdateRule.RAYLEIGH))

        rows.append(BenchRow(j + 1, pair.lam, flow_s, newton_s, rqi_s,
                             newton_pair.lam, rqi_pair.lam))
        units.append(pair.unit)
    return rows


def cumulative(values):
    return np.cumsum(values)
