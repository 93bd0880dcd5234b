"""Gradient descent on the eigenvalue functional.

Four variants share one loop:

* ``gd_standard``     x <- x - alpha grad F            (B = I)
* ``gd_generalized``  x <- x - alpha grad F            (general B)
* ``gd_b_metric``     x <- x - alpha B^-1 grad F       (smallest generalized pair)
* ``gd_deflated``     B-metric descent restricted to the B-orthogonal
                      complement of the pairs already found
"""
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .functional import (
    DimensionError,
    SolverConfig,
    SpectralPair,
    as_spd,
    as_symmetric,
    make_pair,
    stepsize_bound,
)
from .rng import random_unit, substream

DEFAULT_MAX_ITER = 10_000_000
TERMINAL_REASONS = ("converged", "max_iter", "diverged", "singular_system")


class ConvergenceError(RuntimeError):
    """A solver stopped without converging; ``partial`` holds what was found."""

    def __init__(self, message, partial=(), trace=None):
        super().__init__(message)
        self.partial = list(partial)
        self.trace = trace


class _Recorder:
    """Grows five float columns geometrically; cheap enough for 10^7 rows."""

    def __init__(self, stride=1):
        self.stride = stride
        self.rows = 0
        self.data = np.empty((256, 5))

    def wants(self, k):
        return k % self.stride == 0

    def add(self, k, f, grad_norm, norm_b, lam):
        if self.rows == len(self.data):
            self.data = np.concatenate([self.data, np.empty_like(self.data)])
        self.data[self.rows] = (k, f, grad_norm, norm_b, lam)
        self.rows += 1

    def finish(self, reason):
        d = self.data[: self.rows]
        return IterationTrace(d[:, 0].astype(np.int64), d[:, 1].copy(), d[:, 2].copy(),
                              d[:, 3].copy(), d[:, 4].copy(), reason)


@dataclass
class IterationTrace:
    k: np.ndarray
    f: np.ndarray
    grad_norm: np.ndarray
    norm_b: np.ndarray
    lam: np.ndarray
    terminal_reason: str

    def __len__(self):
        return len(self.k)

    @property
    def converged(self) -> bool:
        return self.terminal_reason == "converged"

    def rows(self):
        for i in range(len(self.k)):
            yield int(self.k[i]), float(self.f[i]), float(self.grad_norm[i]), \
                float(self.norm_b[i]), float(self.lam[i])


@dataclass
class DeflationBasis:
    """B-orthonormal columns ``vectors``; ``bvectors`` caches B @ vectors."""

    vectors: np.ndarray
    bvectors: np.ndarray

    @classmethod
    def empty(cls, n):
        return cls(np.zeros((n, 0)), np.zeros((n, 0)))

    def project(self, x):
        """Remove the B-components of x along the basis."""
        if self.vectors.shape[1] == 0:
            return x
        return x - self.vectors @ (self.bvectors.T @ x)

    def constrain(self, g):
        """Drop the components of a gradient along B @ vectors.

        At a constrained critical point this is exactly zero, while the raw
        gradient keeps a roundoff-sized part along earlier pairs' errors.
        """
        if self.vectors.shape[1] == 0:
            return g
        return g - self.bvectors @ (self.vectors.T @ g)

    def extend(self, unit, b=None):
        bu = unit if b is None else b @ unit
        return DeflationBasis(np.column_stack([self.vectors, unit]),
                              np.column_stack([self.bvectors, bu]))


def _resolve_alpha(cfg, bound):
    alpha = cfg.alpha if cfg.alpha is not None else 0.9 * bound
    if alpha >= bound:
        if not cfg.force_alpha:
            raise ValueError(f"alpha={alpha:.6g} is not below the stepsize bound {bound:.6g}")
        warnings.warn(f"alpha={alpha:.6g} exceeds the stepsize bound {bound:.6g}; "
                      "descent is not guaranteed", RuntimeWarning)
    return alpha


def _start(n, x0, seed, name):
    if x0 is None:
        return random_unit(substream(seed, name, "x0"), n)
    x = np.array(x0, dtype=float)
    if x.shape != (n,):
        raise DimensionError(f"x0 must have length {n}")
    if not np.any(x):
        raise ValueError("x0 must be nonzero")
    return x


def _descend(a, b, cfg, alpha, x, precondition=False, basis=None):
    """Shared loop. Returns (x, trace).

    With ``precondition`` the step direction is B^-1 grad F, evaluated through
    the fixed matrix K = B^-1 A so each step costs matrix-vector products only.
    The stopping test always uses the Euclidean gradient norm, restricted to
    the constraint set when a deflation basis is given.
    """
    gamma = cfg.gamma
    max_iter = cfg.max_iter or DEFAULT_MAX_ITER
    bmat = None if b is None else b.matrix
    kmat = b.solve(a) if (precondition and b is not None) else None
    blowup = 10.0 / np.finfo(float).eps
    rec = _Recorder(cfg.trace_stride)
    if basis is not None:
        x = basis.project(x)
    reason = "max_iter"
    for k in range(max_iter + 1):
        ax = a @ x
        if bmat is None:
            bx = x
            nb = np.sqrt(x @ x)
        else:
            bx = bmat @ x
            nb = np.sqrt(x @ bx)
        if not np.isfinite(nb) or nb > blowup:
            reason = "diverged"
            break
        if nb == 0.0:
            reason = "diverged"
            break
        c = gamma * (1.0 - 1.0 / nb)
        g = ax + c * bx
        gc = g if basis is None else basis.constrain(g)
        gn = np.sqrt(gc @ gc)
        if rec.wants(k) or gn <= cfg.tol_grad:
            rec.add(k, 0.5 * (x @ ax) + 0.5 * gamma * nb * nb - gamma * nb, gn, nb,
                    gamma * (1.0 / nb - 1.0))
        if gn <= cfg.tol_grad:
            reason = "converged"
            break
        if k == max_iter:
            break
        if kmat is not None:
            x = x - alpha * (kmat @ x + c * x)
        else:
            x = x - alpha * g
        if basis is not None:
            x = basis.project(x)
    return x, rec.finish(reason)


def gd_standard(a, cfg: SolverConfig, x0=None):
    """Smallest eigenpair of a symmetric matrix by plain gradient descent."""
    a = as_symmetric(a)
    alpha = _resolve_alpha(cfg, stepsize_bound(a, None, cfg.gamma))
    x, trace = _descend(a, None, cfg, alpha, _start(a.shape[0], x0, cfg.seed, "gd"))
    return make_pair(a, None, cfg.gamma, x), trace


def gd_generalized(a, b, cfg: SolverConfig, x0=None):
    """Descent on the generalized functional.

    Converges to some generalized eigenpair; unlike :func:`gd_b_metric` it is
    not guaranteed to be the smallest one.
    """
    a = as_symmetric(a)
    b = as_spd(b)
    _check_sizes(a, b)
    alpha = _resolve_alpha(cfg, stepsize_bound(a, b, cfg.gamma, "euclidean"))
    x, trace = _descend(a, b, cfg, alpha, _start(a.shape[0], x0, cfg.seed, "gd"))
    return make_pair(a, b, cfg.gamma, x), trace


def gd_b_metric(a, b, cfg: SolverConfig, x0=None):
    """Smallest generalized eigenpair by descent in the B-metric."""
    a = as_symmetric(a)
    b = as_spd(b)
    _check_sizes(a, b)
    alpha = _resolve_alpha(cfg, stepsize_bound(a, b, cfg.gamma, "b"))
    x, trace = _descend(a, b, cfg, alpha, _start(a.shape[0], x0, cfg.seed, "gd"),
                        precondition=True)
    return make_pair(a, b, cfg.gamma, x), trace


def gd_deflated(a, b, m: int, cfg: SolverConfig, x0s=None):
    """The m smallest (generalized) eigenpairs, one after another.

    Pair j is found by B-metric descent kept B-orthogonal to pairs 1..j-1.
    Raises :class:`ConvergenceError` carrying the pairs found so far if any
    pair fails to converge.
    """
    a = as_symmetric(a)
    b = as_spd(b)
    _check_sizes(a, b)
    n = a.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"m must lie in [1, {n}]")
    alpha = _resolve_alpha(cfg, stepsize_bound(a, b, cfg.gamma, "b"))
    basis = DeflationBasis.empty(n)
    pairs, traces = [], []
    for j in range(m):
        x0 = None if x0s is None else x0s[j]
        x = _start(n, x0, cfg.seed, f"deflated/{j}")
        x, trace = _descend(a, b, cfg, alpha, x, precondition=True, basis=basis)
        traces.append(trace)
        if not trace.converged:
            raise ConvergenceError(f"pair {j + 1} stopped with {trace.terminal_reason}",
                                   pairs, trace)
        pair = make_pair(a, b, cfg.gamma, x)
        pairs.append(pair)
        basis = basis.extend(pair.unit, b)
    return pairs, traces


def _check_sizes(a, b):
    if b is not None and b.n != a.shape[0]:
        raise DimensionError("A and B differ in size")

