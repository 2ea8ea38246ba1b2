import itertools

import numpy as np
import pytest


def simplex_oracle(v):
    """Exact projection by enumerating supports: minimum-distance feasible candidate."""
    v = np.asarray(v, dtype=float)
    n = v.size
    best, best_d = None, np.inf
    for size in range(1, n + 1):
        for S in itertools.combinations(range(n), size):
            S = list(S)
            theta = (v[S].sum() - 1.0) / size
            x = np.zeros(n)
            x[S] = v[S] - theta
            if np.all(x >= -1e-15):
                d = np.sum((x - v) ** 2)
                if d < best_d:
                    best, best_d = np.maximum(x, 0.0), d
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def bilinear(z):
    return np.array([z[1], -z[0]])
