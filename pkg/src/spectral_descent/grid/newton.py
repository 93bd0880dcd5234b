"""Matrix-free Newton iteration for grid eigenfunctions.

Each step solves::

    (-Laplace_h - lam_k + (gamma + lam_k) y y') u_{k+1} = gamma y,   y = u_k / ||u_k||

by MINRES; the rank-one term is applied as an operator, never assembled.
"""
import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..gd import _Recorder
from ..newton import ComparisonStats, RuleStats, TrialRecord, UpdateRule, is_hit
from ..rng import substream
from .domain import GridDomain
from .flow import FlowConfig, make_grid_pair, random_field, solve_eigenfunctions
from .krylov import minres
from .operator import Stencil, neg_laplacian_matrix, norm

START_LOW = {"positive": 0.0, "signed": -1.0}


def newton_grid(domain: GridDomain, u0, cfg: FlowConfig = FlowConfig(), rule=UpdateRule.NORM_BASED):
    """Newton from ``u0`` (array or GridField). Returns (GridEigenpair, trace).

    With ``cfg.inner == "minres"`` the inner solves are inexact: the MINRES
    residual is driven below min(0.1, ||grad||) ||grad||, which keeps the
    outer convergence superlinear. With "direct" each step factors
    L - lam by sparse LU and adds the rank-one term by Sherman-Morrison, so
    the cost per step does not depend on where lam sits in the spectrum. The iteration stops when ||-Laplace_h u - lam u|| falls to the
    flow stopping tolerance. ``pair.steps`` counts MINRES iterations
    (one per step for the direct solver).
    """
    rule = UpdateRule(rule)
    stencil = Stencil(domain)
    h = domain.h
    h2 = h * h
    gamma = cfg.gamma
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    u = np.where(domain.mask, np.asarray(getattr(u0, "values", u0), dtype=float), 0.0)
    if not np.any(u):
        raise ValueError("u0 must be nonzero on the domain")
    shape = domain.shape
    max_inner = cfg.inner_max_iter or 10 * domain.interior
    if cfg.inner == "direct":
        lap = neg_laplacian_matrix(domain)
        eye = sp.identity(domain.interior, format="csc")
        inside = domain.mask.ravel()
    rec = _Recorder(1)
    inner_total = 0
    reason = "max_iter"
    lam = np.nan
    for k in range(cfg.newton_max_iter + 1):
        nu = norm(u, h)
        if not np.isfinite(nu) or nu == 0.0:
            reason = "diverged"
            break
        lu = stencil(u)
        if rule == UpdateRule.NORM_BASED:
            lam = gamma * (1.0 / nu - 1.0)
        else:
            lam = h2 * float(lu.ravel() @ u.ravel()) / (nu * nu)
        res = norm(lu - lam * u, h)
        grad = lu + gamma * (1.0 - 1.0 / nu) * u
        gnorm = norm(grad, h)
        rec.add(k, 0.5 * h2 * float(lu.ravel() @ u.ravel()) + 0.5 * gamma * nu * nu - gamma * nu,
                gnorm, nu, lam)
        tol = cfg.stop_tol(stencil, nu)
        if res <= tol:
            reason = "converged"
            break
        if k == cfg.newton_max_iter:
            break
        y = (u / nu).ravel()
        weight = gamma + lam

        def apply(v, lam=lam, y=y, weight=weight):
            out = stencil(v.reshape(shape)).ravel()
            out -= lam * v
            out += (weight * h2 * (y @ v)) * y
            return out

        if cfg.inner == "direct":
            # Sherman-Morrison: x = gamma z / (1 + c y'z) with (L - lam) z = y
            yi = y[inside]
            try:
                z = splu((lap - lam * eye).tocsc()).solve(yi)
            except RuntimeError:  # exactly singular factor
                reason = "singular_system"
                break
            denom = 1.0 + weight * h2 * float(yi @ z)
            if denom == 0.0:
                reason = "singular_system"
                break
            x = np.zeros(y.size)
            x[inside] = (gamma / denom) * z
            its = 1
        else:
            # Euclidean tolerance matching an L2 bound on the Newton residual
            target = max(0.25 * tol, min(0.1, gnorm) * gnorm) / h
            x, _, its = minres(apply, gamma * y, x0=u.ravel(), tol=target, max_iter=max_inner)
        inner_total += its
        if not np.all(np.isfinite(x)):
            reason = "singular_system"
            break
        u = x.reshape(shape)
    if rule == UpdateRule.NORM_BASED or not np.isfinite(lam):
        lam = None
    pair = make_grid_pair(domain, u, gamma, stencil, inner_total, lam=lam)
    return pair, rec.finish(reason)


def compare_grid_rules(domain: GridDomain, trials: int, cfg: FlowConfig = FlowConfig(),
                       lambda_min=None, hit_tol: float = 1e-8,
                       rules=(UpdateRule.NORM_BASED, UpdateRule.RAYLEIGH), start="positive"):
    """Newton from random fields with each update rule; count hits on lambda_1.

    ``start`` picks the cell distribution of the unit-norm starting fields:
    "positive" is uniform(0, 1), "signed" is uniform(-1, 1). Signed starts are
    nearly orthogonal to the (positive) ground state, so from them neither
    rule finds lambda_1 at gamma = 50.

    ``lambda_min`` defaults to the first eigenvalue from the gradient flow. A
    hit is a converged run within ``hit_tol * max(1, lambda_min)`` of it.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if start not in START_LOW:
        raise ValueError(f"start must be one of {sorted(START_LOW)}")
    if lambda_min is None:
        lambda_min = solve_eigenfunctions(domain, 1, cfg)[0][0].lam
    rules = [UpdateRule(r) for r in rules]
    stats = {r.value: RuleStats(r.value) for r in rules}
    records = []
    for t in range(trials):
        u0 = random_field(domain, substream(cfg.seed, "trial", t, "u0"), START_LOW[start])
        for rule in rules:
            pair, trace = newton_grid(domain, u0, cfg, rule)
            s = stats[rule.value]
            s.trials += 1
            ok = trace.terminal_reason == "converged"
            hit = ok and is_hit(pair.lam, lambda_min, hit_tol)
            if ok:
                s.lambdas.append(pair.lam)
                s.hits += hit
            else:
                s.failures += 1
            records.append(TrialRecord(t, rule.value, pair.lam, trace.terminal_reason,
                                       int(trace.k[-1]), hit))
    return ComparisonStats(float(lambda_min), stats, records)
