"""Unconstrained functional whose minimizers are scaled lowest eigenvectors.

For a symmetric ``A``, a symmetric positive definite ``B`` (identity when
omitted) and a shift ``gamma``, the functional is::

    F(x) = 1/2 x'Ax + gamma/2 x'Bx - gamma * ||x||_B,    ||x||_B = sqrt(x'Bx)

Its critical points are the generalized eigenvectors ``v`` scaled so that
``||v||_B = gamma / (gamma + lambda)``, and its global minimizers are the ones
belonging to the smallest eigenvalue, provided ``gamma > max(0, -lambda_1)``.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from . import oracle


class DimensionError(ValueError):
    pass


class NotSPDError(ValueError):
    pass


class NondifferentiableError(ValueError):
    """Raised for derivatives requested at the origin."""


SYMMETRY_TOL = 1e-12


def as_symmetric(m, *, tol: Optional[float] = None) -> np.ndarray:
    """Validate a square real matrix and return its symmetric part.

    With ``tol`` set, an asymmetry larger than ``tol * max(1, max|m|)`` is an
    error instead of being silently averaged away.
    """
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimensionError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if tol is not None:
        skew = np.max(np.abs(a - a.T))
        if skew > tol * max(1.0, np.max(np.abs(a))):
            raise ValueError(f"matrix is not symmetric (max asymmetry {skew:.3e})")
    a = 0.5 * (a + a.T)
    a.flags.writeable = False
    return a


class SpdMatrix:
    """Symmetric positive definite matrix with its Cholesky factor.

    The factor is computed once; all B-norms and B-solves go through it.
    """

    def __init__(self, m):
        self.matrix = as_symmetric(m)
        try:
            self.chol = np.linalg.cholesky(self.matrix)
        except np.linalg.LinAlgError:
            raise NotSPDError("matrix is not positive definite (Cholesky failed)") from None
        self.chol.flags.writeable = False

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, x):
        return self.matrix @ x

    def norm(self, x) -> float:
        return float(np.linalg.norm(self.chol.T @ x))

    def solve(self, y):
        return cho_solve((self.chol, True), y)

    def lower_bound(self) -> float:
        """Certified lower bound on the smallest eigenvalue: 1 / ||L^-1||_F^2."""
        linv = solve_triangular(self.chol, np.eye(self.n), lower=True)
        return 1.0 / float(np.sum(linv * linv))


def as_spd(b) -> Optional[SpdMatrix]:
    if b is None or isinstance(b, SpdMatrix):
        return b
    return SpdMatrix(b)


def gershgorin_bounds(a) -> tuple[float, float]:
    """Interval containing every eigenvalue of the symmetric matrix ``a``."""
    a = np.asarray(a, dtype=float)
    d = np.diag(a)
    radius = np.sum(np.abs(a), axis=1) - np.abs(d)
    return float(np.min(d - radius)), float(np.max(d + radius))


@dataclass(frozen=True)
class Functional:
    """The functional for the pair ``(a, b)`` and shift ``gamma``.

    ``gamma`` is checked against a certified lower bound on the smallest
    eigenvalue first; only if that bound is inconclusive is the (exact)
    oracle consulted.
    """

    a: np.ndarray
    b: Optional[SpdMatrix]
    gamma: float

    def __init__(self, a, b=None, gamma: float = 1.0):
        a = as_symmetric(a)
        b = as_spd(b)
        if b is not None and b.n != a.shape[0]:
            raise DimensionError("A and B differ in size")
        gamma = float(gamma)
        if not np.isfinite(gamma) or gamma <= 0:
            raise ValueError("gamma must be a positive finite number")
        if gamma <= -lambda_min_lower_bound(a, b):
            lam1 = oracle.generalized_eigh(a, None if b is None else b.matrix)[0][0]
            if gamma <= -lam1:
                raise ValueError(f"gamma={gamma} does not exceed -lambda_1={-lam1:.6g}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "gamma", gamma)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def apply_b(self, x):
        return x if self.b is None else self.b @ x

    def norm_b(self, x) -> float:
        return float(np.linalg.norm(x)) if self.b is None else self.b.norm(x)


def _check_vector(f: Functional, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (f.n,):
        raise DimensionError(f"expected a vector of length {f.n}, got shape {x.shape}")
    return x


def evaluate(f: Functional, x) -> float:
    x = _check_vector(f, x)
    nb = f.norm_b(x)
    return float(0.5 * (x @ (f.a @ x)) + 0.5 * f.gamma * nb * nb - f.gamma * nb)


def gradient(f: Functional, x) -> np.ndarray:
    """Ax + gamma (1 - 1/||x||_B) Bx; undefined at the origin."""
    x = _check_vector(f, x)
    nb = f.norm_b(x)
    if nb == 0.0:
        raise NondifferentiableError("the functional is not differentiable at x = 0")
    return f.a @ x + f.gamma * (1.0 - 1.0 / nb) * f.apply_b(x)


def hessian(f: Functional, x) -> np.ndarray:
    """A + gamma B - gamma/||x||_B (B - Bx x'B / ||x||_B^2), symmetrized."""
    x = _check_vector(f, x)
    nb = f.norm_b(x)
    if nb == 0.0:
        raise NondifferentiableError("the functional is not differentiable at x = 0")
    bmat = np.eye(f.n) if f.b is None else f.b.matrix
    w = (bmat @ x) / nb
    h = f.a + f.gamma * bmat - (f.gamma / nb) * (bmat - np.outer(w, w))
    return 0.5 * (h + h.T)


def eigenvalue_from_norm(gamma: float, x, b=None) -> float:
    """Invert ||x||_B = gamma / (gamma + lambda) at a critical point."""
    b = as_spd(b)
    nb = float(np.linalg.norm(x)) if b is None else b.norm(x)
    if nb == 0.0:
        raise NondifferentiableError("x = 0 carries no eigenvalue")
    return gamma * (1.0 / nb - 1.0)


def lambda_min_lower_bound(a, b=None) -> float:
    """Certified lower bound on the smallest (generalized) eigenvalue."""
    lo, _ = gershgorin_bounds(a)
    b = as_spd(b)
    if b is None:
        return lo
    if lo >= 0:
        return 0.0
    return lo / b.lower_bound()


def choose_gamma(a, b=None, margin: float = 1.0) -> float:
    """A shift that is certified admissible: max(0, -lower bound) + margin."""
    if margin <= 0:
        raise ValueError("margin must be positive")
    return max(0.0, -lambda_min_lower_bound(as_symmetric(a), b)) + margin


def stepsize_bound(a, b, gamma: float, metric: str = "euclidean") -> float:
    """Largest admissible step for the descent variants.

    ``metric="euclidean"``: 1/(U_A + gamma) without B, 1/((U_A + gamma) U_B^3)
    with B. ``metric="b"`` (descent in the B-metric): 1/(U_A + gamma). Here U_A,
    U_B are Gershgorin upper bounds on the largest eigenvalues.
    """
    _, ua = gershgorin_bounds(a)
    if ua + gamma <= 0:
        raise ValueError("gamma is too small for this matrix")
    b = as_spd(b)
    if b is None or metric == "b":
        return 1.0 / (ua + gamma)
    if metric != "euclidean":
        raise ValueError(f"unknown metric {metric!r}")
    _, ub = gershgorin_bounds(b.matrix)
    return 1.0 / ((ua + gamma) * ub**3)


def choose_stepsize(a, b, gamma: float, safety: float = 0.9, metric: str = "euclidean") -> float:
    if not 0 < safety < 1:
        raise ValueError("safety must lie in (0, 1)")
    return safety * stepsize_bound(a, b, gamma, metric)


@dataclass(frozen=True)
class SolverConfig:
    gamma: float
    alpha: Optional[float] = None  # None: chosen from the stepsize bound
    tol_grad: float = 1e-12
    tol_residual: float = 1e-13
    max_iter: Optional[int] = None  # None: solver default
    seed: int = 0
    force_alpha: bool = False  # accept alpha above the bound (with a warning)
    trace_stride: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError("gamma must be positive")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.tol_grad <= 0 or self.tol_residual <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.trace_stride < 1:
            raise ValueError("trace_stride must be at least 1")


@dataclass
class SpectralPair:
    """An eigenpair as found by a solver.

    ``x`` is the raw critical point (its B-norm encodes ``lam``); ``unit`` is
    its B-normalized direction. ``residual`` is ||Ax - lam Bx|| / (1 + ||A||_F).
    """

    lam: float
    x: np.ndarray
    residual: float
    norm_law_gap: float
    unit: np.ndarray = field(repr=False)


def make_pair(a, b, gamma: float, x, lam: Optional[float] = None) -> SpectralPair:
    """Package ``x`` as a SpectralPair; ``lam`` defaults to the norm law."""
    a = np.asarray(a)
    b = as_spd(b)
    x = np.asarray(x, dtype=float)
    nb = float(np.linalg.norm(x)) if b is None else b.norm(x)
    if lam is None:
        lam = gamma * (1.0 / nb - 1.0)
    bx = x if b is None else b @ x
    res = float(np.linalg.norm(a @ x - lam * bx)) / (1.0 + float(np.linalg.norm(a)))
    gap = abs(nb - gamma / (gamma + lam)) if gamma + lam != 0 else np.inf
    return SpectralPair(float(lam), x, res, float(gap), x / nb)
