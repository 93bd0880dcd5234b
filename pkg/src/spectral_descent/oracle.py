"""Reference eigensolver used to check the descent and Newton solvers.

Everything here is built on a cyclic Jacobi rotation sweep and shares no code
with the solvers: the answers they produce are compared against these.
"""
from dataclasses import dataclass

import numpy as np


class OracleError(RuntimeError):
    pass


@dataclass
class SpectralDecomposition:
    values: np.ndarray  # ascending
    vectors: np.ndarray  # columns, orthonormal (B-orthonormal for pairs)


@dataclass(frozen=True)
class RandomProblemSpec:
    n: int
    seed: int
    eig_range_a: tuple = (-1.0, 1.0)
    eig_range_b: tuple = (1.0, 2.0)
    spd_a: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        lo, hi = self.eig_range_a
        if lo > hi or (self.spd_a and lo <= 0):
            raise ValueError(f"bad eigenvalue range for A: {self.eig_range_a}")
        lo, hi = self.eig_range_b
        if lo > hi or lo <= 0:
            raise ValueError(f"bad eigenvalue range for B: {self.eig_range_b}")


def _symmetric(a, what="matrix"):
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ValueError(f"{what} must be a non-empty square matrix")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(a)))):
        raise ValueError(f"{what} is not symmetric")
    return 0.5 * (a + a.T)


def _off_norm(a):
    return np.linalg.norm(a - np.diag(np.diag(a)))


def jacobi_eigh(a, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm is below
    ``tol * ||a||_F``. Returns ``(values, vectors)`` sorted ascending with a
    stable sort, so equal eigenvalues keep their rotation order.
    """
    a = _symmetric(a)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    for _ in range(max_sweeps):
        if _off_norm(a) <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-150 * abs(diff):
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        if _off_norm(a) > tol * scale:
            raise OracleError(f"Jacobi did not converge in {max_sweeps} sweeps")
    values = np.diag(a).copy()
    order = np.argsort(values, kind="stable")
    return values[order], v[:, order]


def spd_sqrt(b) -> np.ndarray:
    """Principal square root of an SPD matrix."""
    w, q = jacobi_eigh(b)
    if w[0] <= 0:
        raise ValueError("matrix is not positive definite")
    r = (q * np.sqrt(w)) @ q.T
    return 0.5 * (r + r.T)


def _inv_sqrt(b):
    w, q = jacobi_eigh(b)
    if w[0] <= 0:
        raise ValueError("B is not positive definite")
    r = (q / np.sqrt(w)) @ q.T
    return 0.5 * (r + r.T)


def reduce_to_standard(a, b) -> np.ndarray:
    """C = B^-1/2 A B^-1/2, which has the same eigenvalues as the pair."""
    a = _symmetric(a, "A")
    s = _inv_sqrt(_symmetric(b, "B"))
    c = s @ a @ s
    return 0.5 * (c + c.T)


def generalized_eigh(a, b=None):
    """Eigenpairs of A x = lambda B x, vectors B-orthonormal, ascending."""
    if b is None:
        return jacobi_eigh(a)
    a = _symmetric(a, "A")
    s = _inv_sqrt(_symmetric(b, "B"))
    if s.shape != a.shape:
        raise ValueError("A and B differ in size")
    c = s @ a @ s
    w, r = jacobi_eigh(0.5 * (c + c.T))
    return w, s @ r


def decompose(a, b=None) -> SpectralDecomposition:
    return SpectralDecomposition(*generalized_eigh(a, b))


def random_symmetric(n: int, eig_range, rng: np.random.Generator):
    """Q diag(w) Q' with w uniform in ``eig_range`` and Q Haar-distributed."""
    w = np.sort(rng.uniform(eig_range[0], eig_range[1], n))
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))
    m = (q * w) @ q.T
    return 0.5 * (m + m.T), w


def random_spd(spec: RandomProblemSpec) -> np.ndarray:
    """Random symmetric A per ``spec`` (positive definite when ``spd_a``)."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0]))
    return random_symmetric(spec.n, spec.eig_range_a, rng)[0]


def random_pair(spec: RandomProblemSpec):
    """Random (A, B): A as in :func:`random_spd`, B SPD from ``eig_range_b``."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1]))
    return random_spd(spec), random_symmetric(spec.n, spec.eig_range_b, rng)[0]
