from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy.spatial.distance import cdist

from .base import LearnerError, TrainedModel, check_training_data, chunked

logger = logging.getLogger(__name__)

# Queries per distance block; keeps the block near a few tens of MB.
DISTANCE_BLOCK_CELLS = 4_000_000


class KExceedsN(LearnerError):
    pass


@dataclass(frozen=True)
class KnnParams:
    k: int = 9

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1.")


@dataclass(frozen=True, eq=False)
class KnnModel(TrainedModel):
    """Stores the training rows; the score is the positive fraction among the k nearest."""

    kind: ClassVar[str] = "knn"
    threshold: ClassVar[float] = 0.5

    matrix: np.ndarray
    labels: np.ndarray
    k: int

    def _block(self, queries: np.ndarray) -> np.ndarray:
        dist = cdist(queries, self.matrix, "sqeuclidean")
        k = self.k
        kth = np.partition(dist, k - 1, axis=1)[:, k - 1 : k]
        closer = dist < kth
        # Distance ties at the k-th place go to the lowest row indices.
        tied = dist == kth
        room = k - closer.sum(axis=1, keepdims=True)
        chosen = closer | (tied & (np.cumsum(tied, axis=1) <= room))
        return (chosen & (self.labels == 1)).sum(axis=1) / k

    def score_many(self, matrix: np.ndarray) -> np.ndarray:
        rows = max(1, DISTANCE_BLOCK_CELLS // max(len(self.matrix), 1))
        return chunked(matrix, self._block, chunk=rows)


def knn_train(matrix, labels, params: KnnParams | None = None) -> KnnModel:
    params = params or KnnParams()
    matrix, labels = check_training_data(matrix, labels, both_classes=False)
    if params.k > len(labels):
        raise KExceedsN(f"k = {params.k} exceeds the {len(labels)} training rows.")
    if params.k % 2 == 0:
        logger.warning("kNN with even k = %d can tie at a score of 0.5", params.k)
    return KnnModel(matrix=matrix.copy(), labels=labels.copy(), k=params.k)


def knn_score(train_matrix, train_labels, x, params: KnnParams | None = None) -> float:
    return knn_train(train_matrix, train_labels, params).score(x)
