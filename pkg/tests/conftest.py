import numpy as np
import pytest


def random_diagonalizable(rng, n, rho, cond_max=10.0):
    """``M D M^-1`` with real/complex-pair spectrum of radius ``rho`` and modest ``cond(M)``.

    Built from first principles (block diagonal ``D``, ``M`` from QR factors)
    so tests do not depend on the package's own generator.
    """
    D = np.zeros((n, n))
    i = 0
    while i < n:
        mag = rho if i == 0 else rng.uniform(0.1 * rho, rho)
        if i + 1 < n and rng.random() < 0.5:
            th = rng.uniform(0.1, np.pi - 0.1)
            D[i:i + 2, i:i + 2] = mag * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
            i += 2
        else:
            D[i, i] = mag * rng.choice([-1.0, 1.0])
            i += 1
    q1, _ = np.linalg.qr(rng.standard_normal((n, n)))
    q2, _ = np.linalg.qr(rng.standard_normal((n, n)))
    M = q1 @ np.diag(np.geomspace(1.0, cond_max, n)) @ q2
    return M @ D @ np.linalg.inv(M)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
