"""Field export: CSV of grid values or binary 8-bit PGM images."""
from pathlib import Path

import numpy as np

from .operator import GridField


def to_gray(field: GridField) -> np.ndarray:
    """Affine map of interior values onto 0..255; masked cells are 0.

    A constant field maps to 255 everywhere inside the domain.
    """
    mask = field.domain.mask
    inside = field.values[mask]
    lo, hi = inside.min(), inside.max()
    img = np.zeros(field.values.shape, dtype=np.uint8)
    if hi == lo:
        img[mask] = 255
    else:
        img[mask] = np.rint(255.0 * (inside - lo) / (hi - lo)).astype(np.uint8)
    return img


def write_pgm(field: GridField, path, lam=None, gamma=None) -> None:
    img = to_gray(field)
    notes = []
    if lam is not None:
        notes.append(f"lambda={float(lam)!r}")
    if gamma is not None:
        notes.append(f"gamma={float(gamma)!r}")
    header = "P5\n" + "".join(f"# {n}\n" for n in notes)
    header += f"{img.shape[1]} {img.shape[0]}\n255\n"
    Path(path).write_bytes(header.encode("ascii") + img.tobytes())


def read_pgm(path):
    """Returns (image, comments) for a binary PGM written by :func:`write_pgm`."""
    data = Path(path).read_bytes()
    tokens, comments, pos = [], [], 0
    while len(tokens) < 4:
        end = data.index(b"\n", pos)
        line = data[pos:end].decode("ascii")
        pos = end + 1
        if line.startswith("#"):
            comments.append(line[1:].strip())
        else:
            tokens += line.split()
    if tokens[0] != "P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h = int(tokens[1]), int(tokens[2])
    img = np.frombuffer(data[pos:pos + w * h], dtype=np.uint8).reshape(h, w)
    return img, comments


def write_csv(field: GridField, path) -> None:
    """Rows of the value grid, shortest round-trip float formatting."""
    lines = (",".join(repr(float(v)) for v in row) for row in field.values)
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> np.ndarray:
    rows = [ln.split(",") for ln in Path(path).read_text().splitlines() if ln]
    return np.array([[float(v) for v in r] for r in rows])


def export_field(field: GridField, path, fmt: str = "pgm", lam=None, gamma=None) -> None:
    if fmt == "pgm":
        write_pgm(field, path, lam, gamma)
    elif fmt == "csv":
        write_csv(field, path)
    else:
        raise ValueError(f"unknown format {fmt!r}")
