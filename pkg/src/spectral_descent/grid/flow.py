"""Discretized gradient flow for Laplacian eigenfunctions on a masked grid.

Each step is explicit Euler on the functional with A = -Laplace_h::

    u <- u - dt (-Laplace_h u + gamma (1 - 1/||u||) u)

followed by Gram-Schmidt against the eigenfunctions already found, so the
j-th run converges to the j-th eigenfunction. Norms are discrete L2 norms.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..gd import ConvergenceError, IterationTrace, _Recorder
from ..rng import substream
from .domain import GridDomain
from .operator import GridField, Stencil, norm

DT_FACTOR = 0.17  # default dt = DT_FACTOR h^2
DT_LIMIT = 0.25  # explicit Euler on the 5-point stencil is unstable above this


@dataclass(frozen=True)
class FlowConfig:
    gamma: float = 50.0
    dt: Optional[float] = None  # None: DT_FACTOR h^2
    tol: float = 1e-13
    max_steps: int = 5_000_000
    seed: int = 0
    trace_stride: int = 1000
    # Stop at max(tol, roundoff_factor eps ||Laplace_h|| ||u||): residuals at
    # the rounding level of the stencil cannot be observed in double precision.
    roundoff_factor: float = 10.0
    newton_max_iter: int = 200
    inner_max_iter: Optional[int] = None  # None: 10 x interior cells
    inner: str = "minres"  # Newton step solver: "minres" or "direct" (sparse LU)

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError("gamma must be non-negative")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.roundoff_factor < 0:
            raise ValueError("roundoff_factor must be non-negative")
        if self.inner not in ("minres", "direct"):
            raise ValueError("inner must be 'minres' or 'direct'")
        if self.tol <= 0 or self.max_steps < 1 or self.trace_stride < 1:
            raise ValueError("tol, max_steps and trace_stride must be positive")

    def step_size(self, h: float) -> float:
        dt = DT_FACTOR * h * h if self.dt is None else self.dt
        if dt > DT_LIMIT * h * h:
            raise ValueError(f"dt={dt:.3e} exceeds the stability limit {DT_LIMIT} h^2")
        return dt

    def stop_tol(self, stencil: Stencil, u_norm: float) -> float:
        floor = self.roundoff_factor * np.finfo(float).eps * stencil.norm_bound() * u_norm
        return max(self.tol, floor)


@dataclass
class GridEigenpair:
    lam: float
    field: GridField  # raw critical point; its norm encodes lam
    residual: float  # ||-Laplace_h u - lam u||
    norm_law_gap: float
    steps: int

    @property
    def unit(self) -> np.ndarray:
        return self.field.values / self.field.norm()


def random_field(domain: GridDomain, rng: np.random.Generator, low: float = -1.0) -> np.ndarray:
    """Uniform(low, 1) on the interior cells, normalized to unit L2 norm."""
    u = np.where(domain.mask, rng.uniform(low, 1.0, domain.shape), 0.0)
    return u / norm(u, domain.h)


class _Projector:
    """Removes components along stored L2-orthonormal fields (flattened)."""

    def __init__(self, domain, units=()):
        self.h2 = domain.h * domain.h
        self.q = np.array([np.ravel(v) for v in units]).reshape(len(units), domain.mask.size)

    def __call__(self, u):
        if len(self.q):
            flat = u.reshape(-1)
            flat -= (self.h2 * (self.q @ flat)) @ self.q
        return u


def flow_step(u: GridField, cfg: FlowConfig, basis=()) -> GridField:
    """One explicit Euler step, then projection against ``basis`` fields."""
    d = u.domain
    stencil = Stencil(d)
    v = u.values
    nu = norm(v, d.h)
    if nu == 0.0:
        raise ValueError("the flow is undefined at u = 0")
    g = stencil(v) + cfg.gamma * (1.0 - 1.0 / nu) * v
    out = v - cfg.step_size(d.h) * g
    out = _Projector(d, [b.values / b.norm() if isinstance(b, GridField) else b for b in basis])(out)
    return GridField(np.where(d.mask, out, 0.0), d)


def _run_flow(stencil, u, cfg, project):
    """Iterate to the stopping residual. Returns (u, residual, steps, trace)."""
    h = stencil.h
    gamma = cfg.gamma
    dt = cfg.step_size(h)
    g = np.zeros_like(u)
    tmp = np.empty_like(u)
    uf, gf = u.reshape(-1), g.reshape(-1)
    rec = _Recorder(cfg.trace_stride)
    reason = "max_iter"
    r = np.inf
    for k in range(cfg.max_steps + 1):
        nu = h * np.sqrt(uf @ uf)
        if not np.isfinite(nu) or nu == 0.0:
            reason = "diverged"
            break
        stencil(u, out=g)
        c = gamma * (1.0 - 1.0 / nu)
        np.multiply(u, c, out=tmp)
        g += tmp
        # deflated runs measure the gradient within the orthogonal complement;
        # the raw residual is limited by the accuracy of earlier pairs
        project(g)
        r = h * np.sqrt(gf @ gf)
        done = r <= cfg.stop_tol(stencil, nu)
        if done or rec.wants(k):
            lap_u = gf @ uf - c * (uf @ uf)  # projection leaves <g, u> unchanged
            rec.add(k, 0.5 * h * h * lap_u + 0.5 * gamma * nu * nu - gamma * nu, r, nu,
                    gamma * (1.0 / nu - 1.0))
        if done:
            reason = "converged"
            break
        if k == cfg.max_steps:
            break
        np.multiply(g, dt, out=tmp)
        u -= tmp
        project(u)
    return u, r, k, rec.finish(reason)


def solve_eigenfunctions(domain: GridDomain, n: int, cfg: FlowConfig = FlowConfig(), u0s=None):
    """The n lowest eigenpairs of -Laplace_h on ``domain`` by deflated flow.

    Returns (pairs, traces). Raises :class:`ConvergenceError` with the pairs
    found so far if a run hits ``max_steps``.
    """
    if n < 1 or n > domain.interior:
        raise ValueError(f"n must lie in [1, {domain.interior}]")
    if cfg.gamma <= 0:
        raise ValueError("gamma must be positive")
    stencil = Stencil(domain)
    pairs, traces, units = [], [], []
    for j in range(n):
        if u0s is not None:
            u = np.where(domain.mask, np.asarray(u0s[j], dtype=float), 0.0)
        else:
            u = random_field(domain, substream(cfg.seed, "flow", j, "u0"))
        project = _Projector(domain, units)
        project(u)
        u, r, steps, trace = _run_flow(stencil, u, cfg, project)
        traces.append(trace)
        if not trace.converged:
            raise ConvergenceError(f"eigenfunction {j + 1} stopped with {trace.terminal_reason}",
                                   pairs, trace)
        pairs.append(make_grid_pair(domain, u, cfg.gamma, stencil, steps))
        units.append(pairs[-1].unit)
    return pairs, traces


def make_grid_pair(domain, u, gamma, stencil=None, steps=0, lam=None) -> GridEigenpair:
    stencil = stencil or Stencil(domain)
    nu = norm(u, domain.h)
    if lam is None:
        lam = gamma * (1.0 / nu - 1.0)
    res = norm(stencil(u) - lam * u, domain.h)
    gap = abs(nu - gamma / (gamma + lam))
    return GridEigenpair(float(lam), GridField(u, domain), res, float(gap), steps)
