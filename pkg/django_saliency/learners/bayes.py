"""
Naive Bayes with class-conditional attribute densities smoothed by
local linear regression (tricube weights) over histogram counts.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import ClassVar

import numpy as np
from scipy.integrate import trapezoid

from .base import TrainedModel, check_training_data, chunked

logger = logging.getLogger(__name__)

DENSITY_FLOOR = 1e-9


@dataclass(frozen=True)
class NbParams:
    loess_window: float = 0.5
    loess_points: int = 100

    def __post_init__(self):
        if not 0.0 < self.loess_window <= 1.0:
            raise ValueError("loess_window must lie in (0, 1].")
        if self.loess_points < 2:
            raise ValueError("loess_points must be >= 2.")


@lru_cache(maxsize=8)
def loess_matrix(points: int, window: float) -> np.ndarray:
    """
    Linear smoother L with ``smoothed = L @ y`` for values on an evenly
    spaced grid: each output is the intercept of a tricube-weighted line fit
    over the ``ceil(window * points)`` nearest grid points.
    """
    neighbours = min(points, max(2, int(np.ceil(window * points))))
    index = np.arange(points, dtype=np.float64)
    smoother = np.zeros((points, points))
    for i in range(points):
        u = index - i
        dist = np.abs(u)
        reach = np.sort(dist)[neighbours - 1] + 1.0
        w = np.clip(1.0 - (dist / reach) ** 3, 0.0, None) ** 3
        s0, s1, s2 = w.sum(), (w * u).sum(), (w * u * u).sum()
        smoother[i] = w * (s2 - s1 * u) / (s0 * s2 - s1 * s1)
    smoother.flags.writeable = False
    return smoother


def class_density(values: np.ndarray, lo: float, hi: float, params: NbParams) -> np.ndarray:
    points = params.loess_points
    grid = np.linspace(lo, hi, points)
    step = (hi - lo) / (points - 1)
    bins = np.clip(np.rint((values - lo) / step).astype(np.int64), 0, points - 1)
    counts = np.bincount(bins, minlength=points).astype(np.float64)

    raw = counts / (len(values) * step)
    smoothed = np.maximum(loess_matrix(points, params.loess_window) @ raw, DENSITY_FLOOR)
    return smoothed / trapezoid(smoothed, grid)


@dataclass(frozen=True, eq=False)
class NbModel(TrainedModel):
    """``priors`` and ``densities`` are indexed 0 for the negative class, 1 for the positive."""

    kind: ClassVar[str] = "nb"
    threshold: ClassVar[float] = 0.5

    priors: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    densities: np.ndarray

    def log_joint(self, matrix: np.ndarray) -> np.ndarray:
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        out = np.tile(np.log(self.priors), (len(matrix), 1))
        points = self.densities.shape[2]
        for j in range(matrix.shape[1]):
            if self.hi[j] <= self.lo[j]:
                continue
            grid = np.linspace(self.lo[j], self.hi[j], points)
            for c in (0, 1):
                out[:, c] += np.log(np.interp(matrix[:, j], grid, self.densities[c, j]))
        return out

    def posterior(self, matrix: np.ndarray) -> np.ndarray:
        """Rows of (P(-1 | x), P(+1 | x))."""
        joint = self.log_joint(matrix)
        return np.exp(joint - np.logaddexp(joint[:, :1], joint[:, 1:]))

    def score_many(self, matrix: np.ndarray) -> np.ndarray:
        return chunked(matrix, lambda block: self.posterior(block)[:, 1])


def nb_train(matrix, labels, params: NbParams | None = None) -> NbModel:
    params = params or NbParams()
    matrix, labels = check_training_data(matrix, labels)
    n, d = matrix.shape

    lo = matrix.min(axis=0)
    hi = matrix.max(axis=0)
    densities = np.ones((2, d, params.loess_points))
    priors = np.array([(labels == -1).mean(), (labels == 1).mean()])

    for j in range(d):
        if hi[j] <= lo[j]:
            logger.debug("Attribute %d is constant; it does not enter the posterior", j)
            continue
        for c, label in enumerate((-1, 1)):
            densities[c, j] = class_density(matrix[labels == label, j], lo[j], hi[j], params)

    logger.info("Naive Bayes trained on %d rows, priors %.3f / %.3f", n, priors[0], priors[1])
    return NbModel(priors=priors, lo=lo, hi=hi, densities=densities)


def nb_score(model: NbModel, x) -> float:
    return model.score(x)
