"""Five-point negative Laplacian with Dirichlet masking, matrix-free."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .domain import GridDomain


@dataclass(eq=False)
class GridField:
    values: np.ndarray  # (ny, nx), zero outside the mask
    domain: GridDomain

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.domain.shape:
            raise ValueError(f"field shape {v.shape} does not match domain {self.domain.shape}")
        if np.any(v[~self.domain.mask] != 0):
            raise ValueError("field is nonzero outside the domain")
        self.values = v

    @classmethod
    def masked(cls, values, domain):
        return cls(np.where(domain.mask, values, 0.0), domain)

    def norm(self) -> float:
        return norm(self.values, self.domain.h)


def inner(u, v, h) -> float:
    """Discrete L2 inner product h^2 sum(u v)."""
    return float(h * h * (u.ravel() @ v.ravel()))


def norm(u, h) -> float:
    r = u.ravel()
    return float(h * np.sqrt(r @ r))


class Stencil:
    """Applies -Laplace_h to arrays of the domain's shape.

    Neighbours outside the mask read as zero and the result is masked, so
    the operator is symmetric on fields supported in the domain.
    """

    def __init__(self, domain: GridDomain):
        self.domain = domain
        self.h = domain.h
        self.weight = domain.mask[1:-1, 1:-1] / (domain.h * domain.h)

    def __call__(self, u, out=None):
        if out is None:
            out = np.zeros(self.domain.shape)
        c = out[1:-1, 1:-1]
        np.multiply(u[1:-1, 1:-1], 4.0, out=c)
        c -= u[:-2, 1:-1]
        c -= u[2:, 1:-1]
        c -= u[1:-1, :-2]
        c -= u[1:-1, 2:]
        c *= self.weight
        return out

    def norm_bound(self) -> float:
        """Upper bound 8/h^2 on the operator norm."""
        return 8.0 / (self.h * self.h)


def neg_laplacian_matrix(domain: GridDomain):
    """-Laplace_h on the interior cells as a sparse CSC matrix.

    Unknowns are the interior cells in row-major order (``domain.mask.ravel()``).
    """
    index = np.full(domain.shape, -1)
    index[domain.mask] = np.arange(domain.interior)
    rows, cols = [np.arange(domain.interior)], [np.arange(domain.interior)]
    vals = [np.full(domain.interior, 4.0)]
    centre = index[1:-1, 1:-1]
    for nb in (index[:-2, 1:-1], index[2:, 1:-1], index[1:-1, :-2], index[1:-1, 2:]):
        both = (centre >= 0) & (nb >= 0)
        rows.append(centre[both])
        cols.append(nb[both])
        vals.append(np.full(both.sum(), -1.0))
    m = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(domain.interior, domain.interior))
    return (m / (domain.h * domain.h)).tocsc()


def apply_neg_laplacian(u: GridField) -> GridField:
    return GridField(Stencil(u.domain)(u.values), u.domain)


def closed_form_square_eig(n: float, m: float, h: float) -> float:
    """Eigenvalue of the grid mode sin(n pi x) sin(m pi y) of -Laplace_h.

    Exact for a square of side one meshed with spacing h; on the full box
    (-1, 1)^2 the modes are obtained with n, m in {1/2, 1, 3/2, ...}.
    """
    return (2.0 / (h * h)) * (2.0 - np.cos(n * np.pi * h) - np.cos(m * np.pi * h))


def rayleigh_quotient(u, stencil: Stencil) -> float:
    r = u.ravel()
    return float(stencil(u).ravel() @ r) / float(r @ r)
