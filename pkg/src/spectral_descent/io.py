"""CSV readers/writers and the run manifest."""
import csv
import hashlib
import io
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .functional import SYMMETRY_TOL, as_symmetric


class MatrixFileError(ValueError):
    pass


def fmt(v) -> str:
    """Shortest round-trip text for a number."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def load_matrix_csv(path, symmetric=True) -> np.ndarray:
    """Read a dense matrix; malformed rows are reported by line number.

    With ``symmetric`` the matrix must be square and symmetric up to a relative
    1e-12; smaller asymmetry is averaged away.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise MatrixFileError(f"{path}: {e.strerror or e}") from None
    rows = []
    for num, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError:
            raise MatrixFileError(f"{path}:{num}: not a row of numbers: {line.strip()[:60]!r}") from None
        if len(rows[-1]) != len(rows[0]):
            raise MatrixFileError(f"{path}:{num}: expected {len(rows[0])} values, found {len(rows[-1])}")
    if not rows:
        raise MatrixFileError(f"{path}: no data")
    m = np.array(rows)
    if not np.all(np.isfinite(m)):
        raise MatrixFileError(f"{path}: non-finite entries")
    if not symmetric:
        return m
    if m.shape[0] != m.shape[1]:
        raise MatrixFileError(f"{path}: matrix is {m.shape[0]}x{m.shape[1]}, not square")
    try:
        return np.array(as_symmetric(m, tol=SYMMETRY_TOL))
    except ValueError as e:
        raise MatrixFileError(f"{path}: {e}") from None


def write_matrix_csv(m, path) -> None:
    write_rows(path, None, np.atleast_2d(m).tolist())


def write_rows(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def read_rows(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    """Sidecar describing how an output directory was produced.

    Wall-clock timings live only here, so every other output file is a
    deterministic function of the inputs and the seed.
    """

    command: list
    config: dict
    seed: int
    inputs: dict = field(default_factory=dict)  # path -> sha256
    phases: dict = field(default_factory=dict)  # name -> seconds
    status: str = "complete"
    version: str = __version__

    def write(self, directory) -> Path:
        lines = [
            f"version={self.version}",
            f"python={platform.python_version()}",
            f"numpy={np.__version__}",
            f"command={' '.join(self.command)}",
            f"seed={self.seed}",
            f"status={self.status}",
        ]
        lines += [f"config.{k}={fmt(v)}" for k, v in sorted(self.config.items())]
        lines += [f"input.{k}={v}" for k, v in sorted(self.inputs.items())]
        lines += [f"time.{k}={v:.6f}" for k, v in self.phases.items()]
        path = Path(directory) / "manifest.txt"
        path.write_text("\n".join(lines) + "\n")
        return path


def read_manifest(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        k, _, v = line.partition("=")
        out[k] = v
    return out


def argv_string():
    return [Path(sys.argv[0]).name] + sys.argv[1:]
