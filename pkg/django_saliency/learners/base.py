from __future__ import annotations

from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from ..core import DimensionMismatch, SaliencyError, SingleClassInput
from ..sampling import NormalizationStats, apply_normalizer

# Rows scored per batch when scoring large matrices.
SCORE_CHUNK = 4096


class LearnerError(SaliencyError):
    pass


def check_training_data(matrix, labels, both_classes: bool = True) -> tuple[np.ndarray, np.ndarray]:
    matrix = np.asarray(matrix, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if matrix.ndim != 2 or len(matrix) != len(labels):
        raise DimensionMismatch(
            f"Training matrix {matrix.shape} does not match {len(labels)} labels."
        )
    if not np.all(np.isfinite(matrix)):
        raise LearnerError("Training matrix contains NaN or infinite values.")
    if not np.all((labels == 1) | (labels == -1)):
        raise LearnerError("Labels must be +1 or -1.")
    if both_classes and (not np.any(labels == 1) or not np.any(labels == -1)):
        raise SingleClassInput("Training data must contain both classes.")
    return matrix, labels


@dataclass(frozen=True, eq=False)
class TrainedModel:
    """
    Base of the five trained classifiers. ``score_many`` works on rows that
    are already normalized; ``score_raw`` applies the stored normalizer first.
    A score at or above ``threshold`` predicts the positive class.
    """

    kind: ClassVar[str] = ""
    threshold: ClassVar[float] = 0.0

    normalizer: NormalizationStats | None = field(default=None, kw_only=True)

    def score_many(self, matrix: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def score(self, x) -> float:
        return float(self.score_many(np.atleast_2d(np.asarray(x, dtype=np.float64)))[0])

    def predict(self, matrix: np.ndarray) -> np.ndarray:
        return np.where(self.score_many(matrix) >= self.threshold, 1, -1)

    def normalize(self, matrix: np.ndarray) -> np.ndarray:
        if self.normalizer is None:
            return np.asarray(matrix, dtype=np.float64)
        return apply_normalizer(self.normalizer, matrix)

    def score_raw(self, matrix: np.ndarray) -> np.ndarray:
        return self.score_many(self.normalize(matrix))


def chunked(matrix: np.ndarray, func, chunk: int = SCORE_CHUNK) -> np.ndarray:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if matrix.shape[1] == 0:
        raise DimensionMismatch("Cannot score rows with no features.")
    if len(matrix) <= chunk:
        return func(matrix)
    return np.concatenate([func(matrix[i : i + chunk]) for i in range(0, len(matrix), chunk)])
