from __future__ import annotations

import math

import numpy as np
import pytest


def cayley_menger_volume(pts: np.ndarray) -> float:
    """Simplex volume from pairwise distances only."""
    pts = np.asarray(pts, dtype=float)
    k = pts.shape[0] - 1
    D = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    B = np.ones((k + 2, k + 2))
    B[0, 0] = 0.0
    B[1:, 1:] = D
    coef = (-1) ** (k + 1) / (2 ** k * math.factorial(k) ** 2)
    return math.sqrt(max(coef * np.linalg.det(B), 0.0))


def random_rotation(rng: np.random.Generator, n: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
