"""
AdaBoost.M1 over RBF SVMs. Each round trains the base SVM on a weighted
resample of the training rows drawn with a seeded generator.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from ..conf import get_setting
from ..core import SingleClassInput
from .base import LearnerError, TrainedModel, check_training_data
from .svm import SvmModel, SvmParams, svm_train

logger = logging.getLogger(__name__)


class NoUsefulWeakLearner(LearnerError):
    pass


@dataclass(frozen=True)
class BoostParams:
    rounds: int = 10
    base: SvmParams = field(default_factory=SvmParams)
    rng_seed: int = 0

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1.")


@dataclass(frozen=True, eq=False)
class BoostModel(TrainedModel):
    """``errors`` holds the weighted training error each kept round was weighted by."""

    kind: ClassVar[str] = "adaboost"
    threshold: ClassVar[float] = 0.0

    members: tuple[SvmModel, ...]
    alphas: tuple[float, ...]
    errors: tuple[float, ...]

    def score_many(self, matrix: np.ndarray) -> np.ndarray:
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        total = np.zeros(len(matrix))
        for member, alpha in zip(self.members, self.alphas):
            total += alpha * member.predict(matrix)
        return total


def _alpha(error: float) -> float:
    return 0.5 * math.log((1.0 - error) / error)


def reweight(weights: np.ndarray, alpha: float, labels: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """w <- w * exp(-alpha * y * h(x)), renormalized to sum to 1."""
    weights = weights * np.exp(-alpha * labels * predicted)
    return weights / weights.sum()


def adaboost_train(matrix, labels, params: BoostParams | None = None) -> BoostModel:
    params = params or BoostParams()
    matrix, labels = check_training_data(matrix, labels)
    n = len(labels)
    rng = np.random.default_rng(params.rng_seed)
    weights = np.full(n, 1.0 / n)
    min_error = 1.0 / (2.0 * n)
    debug = get_setting("DEBUG_MODE")

    members: list[SvmModel] = []
    alphas: list[float] = []
    errors: list[float] = []
    for round_no in range(1, params.rounds + 1):
        drawn = rng.choice(n, size=n, replace=True, p=weights)
        try:
            weak = svm_train(matrix[drawn], labels[drawn], params.base)
        except SingleClassInput:
            logger.warning("Boosting round %d drew a single-class resample; stopping", round_no)
            if not members:
                raise NoUsefulWeakLearner(
                    f"Boosting round {round_no} drew a single-class resample; no weak learner was trained."
                )
            break

        predicted = weak.predict(matrix)
        error = float(weights[predicted != labels].sum())
        if debug:
            logger.debug("Boosting round %d: weighted error %.6f", round_no, error)

        if error >= 0.5:
            logger.info("Boosting round %d discarded with weighted error %.4f", round_no, error)
            break
        if error == 0.0:
            members.append(weak)
            alphas.append(_alpha(min_error))
            errors.append(min_error)
            break

        alpha = _alpha(error)
        members.append(weak)
        alphas.append(alpha)
        errors.append(error)
        weights = reweight(weights, alpha, labels, predicted)

    if not members:
        raise NoUsefulWeakLearner("No boosting round beat a weighted error of 0.5.")
    logger.info("AdaBoost kept %d of %d rounds", len(members), params.rounds)
    return BoostModel(members=tuple(members), alphas=tuple(alphas), errors=tuple(errors))


def adaboost_score(model: BoostModel, x) -> float:
    return model.score(x)
