from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist


def rbf_kernel(a, b, gamma: float) -> float:
    """exp(-gamma * ||a - b||^2)"""
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.exp(-gamma * np.dot(diff, diff)))


def rbf_matrix(left: np.ndarray, right: np.ndarray, gamma: float) -> np.ndarray:
    """Kernel values between every row of ``left`` and every row of ``right``."""
    dist2 = cdist(np.atleast_2d(left), np.atleast_2d(right), "sqeuclidean")
    return np.exp(-gamma * dist2)
