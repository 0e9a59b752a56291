import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def brute_grid(coeffs, m):
    """Oracle: sum the cosine expansion term by term on the midpoint grid."""
    n = coeffs.shape[0]
    x = (np.arange(m) + 0.5) / m
    out = np.zeros((m, m))
    for k1 in range(n):
        f1 = np.ones(m) if k1 == 0 else np.sqrt(2) * np.cos(np.pi * k1 * x)
        for k2 in range(n):
            if coeffs[k1, k2] == 0:
                continue
            f2 = np.ones(m) if k2 == 0 else np.sqrt(2) * np.cos(np.pi * k2 * x)
            out += coeffs[k1, k2] * np.outer(f1, f2)
    return out
