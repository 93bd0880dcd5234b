"""Named, reproducible random sub-streams.

Every random draw in the package goes through :func:`substream`, so a run is
fully determined by one integer seed plus the name of the draw, e.g.
``substream(seed, "trial", 17, "x0")``. Changing the order in which trials are
executed (or running them in parallel) does not change any draw.
"""
import hashlib

import numpy as np


def _name_key(names):
    text = "/".join(str(n) for n in names)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def substream(seed: int, *names) -> np.random.Generator:
    """Return a generator for the sub-stream ``seed/names...``."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return np.random.default_rng(np.random.SeedSequence([int(seed), _name_key(names)]))


def random_unit(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniformly distributed point on the Euclidean unit sphere in R^n."""
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)
