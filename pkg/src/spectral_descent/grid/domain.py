"""Boolean masks of planar domains on a uniform grid over [-1, 1]^2.

Row ``i`` of a mask is y = -1 + i h, column ``j`` is x = -1 + j h. A cell is
true when its grid point lies strictly inside the domain, so boundary points
(and the outer frame) are Dirichlet zeros.
"""
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_EDGE = 1e-9  # grid points closer than this to an edge count as on it


class MaskFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GridDomain:
    mask: np.ndarray  # (ny, nx) bool
    h: float

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.ndim != 2 or min(m.shape) < 3:
            raise ValueError("mask must be a 2-D array of at least 3x3 cells")
        if m[0].any() or m[-1].any() or m[:, 0].any() or m[:, -1].any():
            raise ValueError("mask must be false on the outer frame")
        if not m.any():
            raise ValueError("mask has no interior cells")
        if not (np.isfinite(self.h) and self.h > 0):
            raise ValueError("h must be positive")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "mask", m)

    @property
    def shape(self):
        return self.mask.shape

    @property
    def nx(self) -> int:
        return self.mask.shape[1]

    @property
    def ny(self) -> int:
        return self.mask.shape[0]

    @property
    def interior(self) -> int:
        return int(self.mask.sum())

    def coordinates(self):
        """(X, Y) arrays of grid-point coordinates."""
        xs = -1.0 + self.h * np.arange(self.nx)
        ys = -1.0 + self.h * np.arange(self.ny)
        return np.meshgrid(xs, ys)

    def __eq__(self, other):
        return (isinstance(other, GridDomain) and self.h == other.h
                and np.array_equal(self.mask, other.mask))


def _frame(n):
    if n < 3:
        raise ValueError("grid needs at least 3 points per side")
    h = 2.0 / (n - 1)
    xs = -1.0 + h * np.arange(n)
    x, y = np.meshgrid(xs, xs)
    inside = (np.abs(x) < 1 - _EDGE) & (np.abs(y) < 1 - _EDGE)
    return x, y, h, inside


def full_square(n: int = 81) -> GridDomain:
    """The whole box (-1, 1)^2."""
    _, _, h, inside = _frame(n)
    return GridDomain(inside, h)


def unit_square(n: int = 81) -> GridDomain:
    """The side-one square (0, 1)^2 in the upper right corner of the box."""
    x, y, h, inside = _frame(n)
    return GridDomain(inside & (x > _EDGE) & (y > _EDGE), h)


def l_shape(n: int = 81) -> GridDomain:
    """(-1, 1)^2 minus the quadrant [0, 1) x (-1, 0]."""
    x, y, h, inside = _frame(n)
    return GridDomain(inside & ~((x > -_EDGE) & (y < _EDGE)), h)


def annulus(n: int = 81, r_in: float = 0.5, r_out: float = 1.0) -> GridDomain:
    if not 0 <= r_in < r_out:
        raise ValueError("need 0 <= r_in < r_out")
    x, y, h, inside = _frame(n)
    r = np.hypot(x, y)
    return GridDomain(inside & (r > r_in + _EDGE) & (r < r_out - _EDGE), h)


BUILTIN = {"l-shape": l_shape, "square": unit_square, "full-square": full_square}


def from_name(name: str, n: int = 81) -> GridDomain:
    """Domain from a CLI-style name: l-shape, square, full-square,
    annulus:r_in:r_out or file:path."""
    if name in BUILTIN:
        return BUILTIN[name](n)
    if name.startswith("annulus:"):
        parts = name.split(":")
        if len(parts) != 3:
            raise ValueError("annulus domain is annulus:r_in:r_out")
        return annulus(n, float(parts[1]), float(parts[2]))
    if name.startswith("file:"):
        return load_mask(name[5:])
    raise ValueError(f"unknown domain {name!r}")


def save_mask(domain: GridDomain, path) -> None:
    """ASCII mask: 'nx ny h' then ny lines of nx characters 0/1."""
    lines = [f"{domain.nx} {domain.ny} {domain.h!r}"]
    lines += ["".join("1" if v else "0" for v in row) for row in domain.mask]
    Path(path).write_text("\n".join(lines) + "\n")


def load_mask(path) -> GridDomain:
    """Read an ASCII mask (see :func:`save_mask`) or a CSV of 0/1 values.

    A CSV carries no spacing, so h = 2 / (nx - 1) is assumed.
    """
    path = Path(path)
    text = path.read_text()
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MaskFormatError(f"{path}: empty mask file")
    if "," in lines[0]:
        rows = []
        for num, ln in enumerate(lines, 1):
            try:
                rows.append([int(v) for v in ln.split(",")])
            except ValueError:
                raise MaskFormatError(f"{path}:{num}: expected comma-separated 0/1 values") from None
        if len({len(r) for r in rows}) != 1:
            raise MaskFormatError(f"{path}: rows have different lengths")
        mask = np.array(rows)
        if not np.isin(mask, (0, 1)).all():
            raise MaskFormatError(f"{path}: mask values must be 0 or 1")
        return GridDomain(mask.astype(bool), 2.0 / (mask.shape[1] - 1))
    head = lines[0].split()
    try:
        nx, ny, h = int(head[0]), int(head[1]), float(head[2])
    except (ValueError, IndexError):
        raise MaskFormatError(f"{path}:1: header must be 'nx ny h'") from None
    body = lines[1:]
    if len(body) != ny:
        raise MaskFormatError(f"{path}: expected {ny} mask rows, found {len(body)}")
    for num, ln in enumerate(body, 2):
        if len(ln) != nx or set(ln) - {"0", "1"}:
            raise MaskFormatError(f"{path}:{num}: expected {nx} characters of 0/1")
    mask = np.array([[c == "1" for c in ln] for ln in body])
    try:
        return GridDomain(mask, h)
    except ValueError as e:
        raise MaskFormatError(f"{path}: {e}") from None
