import os

import numpy as np
import pytest

from spectral_descent.oracle import RandomProblemSpec, random_pair, random_spd, random_symmetric

FULL = os.environ.get("SPECTRAL_DESCENT_FULL") == "1"


def pytest_collection_modifyitems(config, items):
    if FULL:
        return
    skip = pytest.mark.skip(reason="long run; set SPECTRAL_DESCENT_FULL=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def sym(n, seed, lo=-1.0, hi=1.0):
    return random_symmetric(n, (lo, hi), np.random.default_rng(seed))[0]


def spd_pair(n, seed, a_range=(0.1, 10.0), b_range=(1.0, 2.0)):
    return random_pair(RandomProblemSpec(n, seed, eig_range_a=a_range, eig_range_b=b_range, spd_a=True))


def spd(n, seed, lo=1.0, hi=2.0):
    return random_spd(RandomProblemSpec(n, seed, eig_range_a=(lo, hi), spd_a=True))


def principal_angle(u, v):
    """Largest principal angle between the column spans of u and v."""
    qu, _ = np.linalg.qr(u.reshape(len(u), -1))
    qv, _ = np.linalg.qr(v.reshape(len(v), -1))
    # sine form: accurate for tiny angles, unlike arccos of the cosines
    s = np.linalg.norm(qu - qv @ (qv.T @ qu), 2)
    return float(np.arcsin(min(s, 1.0)))
