from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from ..sampling import apply_normalizer, fit_normalizer
from .base import LearnerError, TrainedModel
from .bayes import NbModel, NbParams, nb_train
from .boost import BoostModel, BoostParams, NoUsefulWeakLearner, adaboost_train
from .kernels import rbf_kernel
from .knn import KExceedsN, KnnModel, KnnParams, knn_train
from .storage import CorruptFile, ModelFileError, VersionMismatch, load_model, save_model
from .svm import SvmModel, SvmParams, svm_train
from .tree import TooFewSamples, TreeModel, TreeParams, c45_train

METHODS = ("svm", "c45", "knn", "nb", "adaboost")

_TRAINERS = {
    "svm": (svm_train, SvmParams),
    "c45": (c45_train, TreeParams),
    "knn": (knn_train, KnnParams),
    "nb": (nb_train, NbParams),
    "adaboost": (adaboost_train, BoostParams),
}


@dataclass(frozen=True)
class LearnerSpec:
    method: str
    params: Any = None

    def __post_init__(self):
        if self.method not in _TRAINERS:
            raise LearnerError(
                f"Unknown method {self.method!r}; choose one of {', '.join(METHODS)}."
            )
        if self.params is None:
            object.__setattr__(self, "params", _TRAINERS[self.method][1]())

    def train(self, matrix, labels) -> TrainedModel:
        trainer, _params_type = _TRAINERS[self.method]
        return trainer(matrix, labels, self.params)


def fit_model(spec: LearnerSpec, matrix, labels) -> TrainedModel:
    """Fit the normalizer on ``matrix``, train on the normalized rows and keep the normalizer on the model."""
    matrix = np.asarray(matrix, dtype=np.float64)
    stats = fit_normalizer(matrix)
    model = spec.train(apply_normalizer(stats, matrix), labels)
    return replace(model, normalizer=stats)


__all__ = [
    "METHODS",
    "BoostModel",
    "BoostParams",
    "CorruptFile",
    "KExceedsN",
    "KnnModel",
    "KnnParams",
    "LearnerError",
    "LearnerSpec",
    "ModelFileError",
    "NbModel",
    "NbParams",
    "NoUsefulWeakLearner",
    "SvmModel",
    "SvmParams",
    "TooFewSamples",
    "TrainedModel",
    "TreeModel",
    "TreeParams",
    "VersionMismatch",
    "fit_model",
    "load_model",
    "rbf_kernel",
    "save_model",
]
