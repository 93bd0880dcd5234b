"""Newton's method on the eigenvalue functional and one-step estimators.

The Newton step for the functional at x_k is the linear system::

    [(A - lam_k B) + (gamma + lam_k) w w'] x_{k+1} = gamma w,   w = B x_k / ||x_k||_B

with ``lam_k`` supplied by an update rule: the norm law
``gamma (1/||x_k||_B - 1)`` (plain Newton) or the Rayleigh quotient
(a Rayleigh-quotient-iteration flavour).
"""
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .functional import (
    DimensionError,
    SolverConfig,
    as_spd,
    as_symmetric,
    make_pair,
)
from .gd import _Recorder
from .rng import random_unit, substream

DEFAULT_MAX_ITER = 200
PIVOT_TOL = 1e-14


class SingularSystemError(np.linalg.LinAlgError):
    pass


class RankDeficiencyError(np.linalg.LinAlgError):
    pass


class UpdateRule(str, Enum):
    NORM_BASED = "norm_based"
    RAYLEIGH = "rayleigh"


@dataclass
class NewtonStepSystem:
    """The matrix of one Newton step, kept as shift + rank-one pieces."""

    lam: float
    weight: float  # gamma + lam
    direction: np.ndarray  # w = B x_k / ||x_k||_B
    rhs: np.ndarray  # gamma w

    def dense(self, a, bmat=None):
        shifted = a - self.lam * (np.eye(len(a)) if bmat is None else bmat)
        return shifted + self.weight * np.outer(self.direction, self.direction)


def solve_dense(m, rhs):
    """LU solve with partial pivoting; tiny pivots count as singular."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(m, check_finite=False)
    d = np.abs(np.diag(lu))
    if not np.all(np.isfinite(d)) or d.min() <= PIVOT_TOL * d.max():
        raise SingularSystemError(f"pivot ratio {d.min() / max(d.max(), 1e-300):.3e}")
    return lu_solve((lu, piv), rhs, check_finite=False)


def residual_stop(gamma, lambda_k, y_k, x_next, b=None) -> float:
    """|gamma (1 - (1 + lam_k/gamma) y_k' B x_{k+1})| for a B-unit y_k.

    After an exact Newton solve this is the eigen-residual
    ||(A - lam_k B) x_{k+1}|| up to the factor ||B y_k|| (one when B = I).
    """
    by = y_k if b is None else as_spd(b) @ y_k
    return abs(gamma * (1.0 - (1.0 + lambda_k / gamma) * float(by @ x_next)))


def _rule_lambda(rule, gamma, x, ax, bx, nb):
    if rule == UpdateRule.NORM_BASED:
        return gamma * (1.0 / nb - 1.0)
    return float(x @ ax) / (nb * nb)


def newton_solve(a, b, cfg: SolverConfig, x0=None, rule=UpdateRule.NORM_BASED):
    """Newton iteration from x0. Returns (SpectralPair, IterationTrace).

    Stops when the current iterate is already critical for its own lam_k
    (||A x_k - lam_k B x_k|| <= tol_residual) or when the post-solve residual
    estimate :func:`residual_stop` drops below tol_residual. A singular step
    ends the run with ``terminal_reason == "singular_system"``.
    """
    rule = UpdateRule(rule)
    a = as_symmetric(a)
    b = as_spd(b)
    n = a.shape[0]
    if b is not None and b.n != n:
        raise DimensionError("A and B differ in size")
    bmat = None if b is None else b.matrix
    gamma = cfg.gamma
    x = random_unit(substream(cfg.seed, "newton", "x0"), n) if x0 is None else np.array(x0, float)
    if x.shape != (n,) or not np.any(x):
        raise ValueError("x0 must be a nonzero vector of matching length")
    max_iter = cfg.max_iter or DEFAULT_MAX_ITER
    rec = _Recorder(cfg.trace_stride)
    ident = np.eye(n)
    reason = "max_iter"
    for k in range(max_iter + 1):
        ax = a @ x
        bx = x if bmat is None else bmat @ x
        nb = np.sqrt(x @ bx)
        if not np.isfinite(nb) or nb == 0.0:
            reason = "diverged"
            break
        lam = _rule_lambda(rule, gamma, x, ax, bx, nb)
        eig_res = np.linalg.norm(ax - lam * bx)
        c = gamma * (1.0 - 1.0 / nb)
        rec.add(k, 0.5 * (x @ ax) + 0.5 * gamma * nb * nb - gamma * nb,
                np.linalg.norm(ax + c * bx), nb, lam)
        if eig_res <= cfg.tol_residual:
            reason = "converged"
            break
        if k == max_iter:
            break
        w = bx / nb
        m = a - lam * (ident if bmat is None else bmat) + (gamma + lam) * np.outer(w, w)
        try:
            x_next = solve_dense(m, gamma * w)
        except SingularSystemError:
            reason = "singular_system"
            break
        stop = abs(gamma * (1.0 - (1.0 + lam / gamma) * float(w @ x_next)))
        x = x_next
        if stop <= cfg.tol_residual:
            # the next pass records the iterate and confirms the residual
            continue
    return make_pair(a, b, gamma, x, lam=_final_lambda(rule, gamma, a, bmat, x)), rec.finish(reason)


def _final_lambda(rule, gamma, a, bmat, x):
    bx = x if bmat is None else bmat @ x
    nb = np.sqrt(x @ bx)
    return _rule_lambda(rule, gamma, x, a @ x, bx, nb)


def eigvec_from_eigval(a, lambda_tilde: float, gamma: float, seed: int = 0, x0=None):
    """Eigenvector for a known simple eigenvalue in one linear solve.

    Solves (A - lam I + (gamma + lam) x0 x0') x = gamma x0 for a random unit
    x0; the solution is the eigenvector scaled to norm gamma/(gamma + lam).
    """
    a = as_symmetric(a)
    n = a.shape[0]
    if gamma + lambda_tilde <= 0:
        raise ValueError("gamma + lambda must be positive")
    x0 = random_unit(substream(seed, "onestep", "x0"), n) if x0 is None else np.asarray(x0, float)
    m = a - lambda_tilde * np.eye(n) + (gamma + lambda_tilde) * np.outer(x0, x0)
    try:
        x = solve_dense(m, gamma * x0)
    except SingularSystemError:
        raise SingularSystemError(
            "one-step system is singular: the eigenvalue is repeated (use "
            "eigspace_from_eigval) or x0 is orthogonal to its eigenvector") from None
    res = np.linalg.norm(a @ x - lambda_tilde * x)
    if res > 1e-8 * (1.0 + np.linalg.norm(a)):
        raise ValueError(f"{lambda_tilde} does not behave as a simple eigenvalue (residual {res:.2e})")
    return x


def eigspace_from_eigval(a, lambda_tilde: float, m: int, gamma: float, seed: int = 0, x0=None):
    """Basis (columns) of an m-dimensional eigenspace in one block solve."""
    a = as_symmetric(a)
    n = a.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"m must lie in [1, {n}]")
    if x0 is None:
        rng = substream(seed, "onestep", "block")
        x0 = np.column_stack([random_unit(rng, n) for _ in range(m)])
    x0 = np.asarray(x0, float).reshape(n, m)
    mat = a - lambda_tilde * np.eye(n) + (gamma + lambda_tilde) * (x0 @ x0.T)
    try:
        x = solve_dense(mat, gamma * x0)
    except SingularSystemError:
        raise RankDeficiencyError(
            f"block system is singular: multiplicity of {lambda_tilde} is not {m}") from None
    res = np.linalg.norm(a @ x - lambda_tilde * x, axis=0)
    if np.any(res > 1e-8 * (1.0 + np.linalg.norm(a))):
        raise RankDeficiencyError(f"columns are not eigenvectors (max residual {res.max():.2e})")
    sv = np.linalg.svd(x / np.linalg.norm(x, axis=0), compute_uv=False)
    if sv[-1] < 1e-6:
        raise RankDeficiencyError("returned columns are linearly dependent")
    return x


def perturbed_eigvec_error(a, lambda_tilde: float, offsets: Sequence[float], gamma: float,
                           seed: int = 0, x0=None):
    """Errors of the one-step estimate when the eigenvalue is off by delta.

    ``a`` may be any diagonalizable matrix. For each offset delta the system
    is solved at lam + delta; the delta -> 0 limit is estimated by linear
    (Richardson) extrapolation from the two smallest offsets. Returns the list
    of (delta, ||x_delta - x_ref||).
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    offsets = [float(d) for d in offsets]
    if any(d == 0 for d in offsets):
        raise ValueError("offsets must be nonzero")
    if len(set(offsets)) < 2:
        raise ValueError("need at least two distinct offsets")
    x0 = random_unit(substream(seed, "onestep", "x0"), n) if x0 is None else np.asarray(x0, float)
    sols = {}
    for d in offsets:
        lam = lambda_tilde + d
        m = a - lam * np.eye(n) + (gamma + lam) * np.outer(x0, x0)
        sols[d] = solve_dense(m, gamma * x0)
    d1, d2 = sorted(set(offsets), key=abs)[:2]
    ref = (d2 * sols[d1] - d1 * sols[d2]) / (d2 - d1)
    return [(d, float(np.linalg.norm(sols[d] - ref))) for d in offsets]


@dataclass
class RuleStats:
    rule: str
    hits: int = 0
    failures: int = 0
    trials: int = 0
    lambdas: list = field(default_factory=list, repr=False)

    @property
    def max_lambda(self) -> float:
        return max(self.lambdas) if self.lambdas else float("nan")

    @property
    def mean_lambda(self) -> float:
        return float(np.mean(self.lambdas)) if self.lambdas else float("nan")


@dataclass
class TrialRecord:
    trial: int
    rule: str
    lam: float
    terminal_reason: str
    iterations: int
    hit: bool


@dataclass
class ComparisonStats:
    lambda_min: float
    rules: dict  # rule name -> RuleStats
    records: list = field(default_factory=list, repr=False)

    def __getitem__(self, rule):
        return self.rules[UpdateRule(rule).value]


def is_hit(lam, lambda_min, rel_tol=1e-13):
    return abs(lam - lambda_min) < rel_tol * max(1.0, abs(lambda_min))


def _trial(args):
    a, b, cfg, t, rules = args
    x0 = random_unit(substream(cfg.seed, "trial", t, "x0"), a.shape[0])
    out = []
    for rule in rules:
        pair, trace = newton_solve(a, b, cfg, x0=x0, rule=rule)
        out.append((t, rule, pair.lam, trace.terminal_reason, int(trace.k[-1]) if len(trace) else 0))
    return out


def compare_update_rules(a, b, trials: int, cfg: SolverConfig, lambda_min: Optional[float] = None,
                         workers: int = 1, hit_tol: float = 1e-13,
                         rules=(UpdateRule.NORM_BASED, UpdateRule.RAYLEIGH)) -> ComparisonStats:
    """Run both update rules from the same random starts and count hits.

    A hit is a converged run whose eigenvalue is within
    ``hit_tol * max(1, |lambda_min|)`` of ``lambda_min`` (by default taken
    from the reference solver). Trials are independent; with ``workers > 1``
    they run in a process pool and are merged in trial order.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    a = as_symmetric(a)
    bmat = None if b is None else as_spd(b).matrix
    if lambda_min is None:
        from .oracle import generalized_eigh
        lambda_min = float(generalized_eigh(a, bmat)[0][0])
    rules = [UpdateRule(r) for r in rules]
    jobs = [(a, bmat, cfg, t, rules) for t in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_trial, jobs, chunksize=max(1, trials // (4 * workers))))
    else:
        results = [_trial(j) for j in jobs]
    stats = {r.value: RuleStats(r.value) for r in rules}
    records = []
    for out in results:
        for t, rule, lam, reason, its in out:
            s = stats[rule.value]
            s.trials += 1
            hit = reason == "converged" and is_hit(lam, lambda_min, hit_tol)
            if reason == "converged":
                s.lambdas.append(lam)
                s.hits += hit
            else:
                s.failures += 1
            records.append(TrialRecord(t, rule.value, lam, reason, its, hit))
    return ComparisonStats(float(lambda_min), stats, records)
