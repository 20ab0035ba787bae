"""
Soft-margin RBF support vector machine trained by sequential minimal
optimization with maximal-violating-pair working set selection.
"""
from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from ..conf import get_setting
from .base import TrainedModel, check_training_data, chunked
from .kernels import rbf_matrix

logger = logging.getLogger(__name__)

TAU = 1e-12
KERNEL_CACHE_BYTES = 256 * 1024 * 1024


@dataclass(frozen=True)
class SvmParams:
    gamma: float = 0.8
    cost: float = 8.0
    smo_tolerance: float = 1e-3
    max_passes: int = 200

    def __post_init__(self):
        if self.gamma <= 0 or self.cost <= 0:
            raise ValueError("gamma and cost must be positive.")
        if self.smo_tolerance <= 0 or self.max_passes < 1:
            raise ValueError("smo_tolerance must be positive and max_passes >= 1.")


@dataclass(frozen=True, eq=False)
class SvmModel(TrainedModel):
    kind: ClassVar[str] = "svm"
    threshold: ClassVar[float] = 0.0

    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    params: SvmParams

    @property
    def gamma(self) -> float:
        return self.params.gamma

    def decision(self, matrix: np.ndarray) -> np.ndarray:
        return rbf_matrix(matrix, self.support_vectors, self.gamma) @ self.dual_coef + self.bias

    def score_many(self, matrix: np.ndarray) -> np.ndarray:
        return chunked(matrix, self.decision)


@dataclass(frozen=True, eq=False)
class DualSolution:
    alpha: np.ndarray
    rho: float
    gap: float
    iterations: int
    converged: bool


class _KernelRows:
    """Least-recently-used cache of kernel matrix rows."""

    def __init__(self, matrix: np.ndarray, gamma: float):
        self.matrix = matrix
        self.gamma = gamma
        self.capacity = max(2, KERNEL_CACHE_BYTES // (8 * max(len(matrix), 1)))
        self.rows: OrderedDict[int, np.ndarray] = OrderedDict()

    def __getitem__(self, i: int) -> np.ndarray:
        row = self.rows.get(i)
        if row is not None:
            self.rows.move_to_end(i)
            return row
        row = rbf_matrix(self.matrix[i : i + 1], self.matrix, self.gamma)[0]
        self.rows[i] = row
        if len(self.rows) > self.capacity:
            self.rows.popitem(last=False)
        return row


def _rho(alpha, y, grad, cost) -> float:
    yg = y * grad
    upper = alpha >= cost
    lower = alpha <= 0
    free = ~(upper | lower)
    if np.any(free):
        return float(yg[free].mean())

    ub_mask = (upper & (y == -1)) | (lower & (y == 1))
    lb_mask = (upper & (y == 1)) | (lower & (y == -1))
    ub = float(yg[ub_mask].min()) if np.any(ub_mask) else np.inf
    lb = float(yg[lb_mask].max()) if np.any(lb_mask) else -np.inf
    return (ub + lb) / 2.0


def _violating_pair(alpha, y, grad, cost):
    minus_yg = -y * grad
    up = ((y == 1) & (alpha < cost)) | ((y == -1) & (alpha > 0))
    low = ((y == 1) & (alpha > 0)) | ((y == -1) & (alpha < cost))
    if not np.any(up) or not np.any(low):
        return -1, -1, 0.0
    i = int(np.argmax(np.where(up, minus_yg, -np.inf)))
    j = int(np.argmin(np.where(low, minus_yg, np.inf)))
    return i, j, float(minus_yg[i] - minus_yg[j])


def solve_dual(matrix: np.ndarray, y: np.ndarray, params: SvmParams) -> DualSolution:
    n = len(y)
    y = y.astype(np.float64)
    cost = params.cost
    kernel = _KernelRows(matrix, params.gamma)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    debug = get_setting("DEBUG_MODE")

    limit = params.max_passes * max(n, 1)
    iterations = 0
    gap = 0.0
    converged = False
    while iterations < limit:
        i, j, gap = _violating_pair(alpha, y, grad, cost)
        if i < 0 or gap < params.smo_tolerance:
            converged = True
            break
        iterations += 1

        k_i = kernel[i]
        k_j = kernel[j]
        q_i = y[i] * y * k_i
        q_j = y[j] * y * k_j
        old_i, old_j = alpha[i], alpha[j]

        if y[i] != y[j]:
            quad = max(k_i[i] + k_j[j] + 2.0 * q_i[j], TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > cost:
                    alpha[i] = cost
                    alpha[j] = cost - diff
            elif alpha[j] > cost:
                alpha[j] = cost
                alpha[i] = cost + diff
        else:
            quad = max(k_i[i] + k_j[j] - 2.0 * q_i[j], TAU)
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > cost:
                if alpha[i] > cost:
                    alpha[i] = cost
                    alpha[j] = total - cost
            elif alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
            if total > cost:
                if alpha[j] > cost:
                    alpha[j] = cost
                    alpha[i] = total - cost
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total

        grad += q_i * (alpha[i] - old_i) + q_j * (alpha[j] - old_j)

        if debug and iterations % 1000 == 0:
            logger.debug("SMO iteration %d, violation gap %.6g", iterations, gap)

    if not converged:
        logger.warning(
            "SMO stopped after %d iterations with violation gap %.6g (tolerance %g)",
            iterations,
            gap,
            params.smo_tolerance,
        )
    return DualSolution(
        alpha=alpha,
        rho=_rho(alpha, y, grad, cost),
        gap=gap,
        iterations=iterations,
        converged=converged,
    )


def svm_train(matrix, labels, params: SvmParams | None = None) -> SvmModel:
    params = params or SvmParams()
    matrix, labels = check_training_data(matrix, labels)
    solution = solve_dual(matrix, labels, params)

    support = solution.alpha > 0
    logger.info(
        "SVM trained on %d rows: %d support vectors after %d SMO iterations",
        len(labels),
        int(support.sum()),
        solution.iterations,
    )
    return SvmModel(
        support_vectors=matrix[support].copy(),
        dual_coef=(solution.alpha * labels)[support],
        bias=-solution.rho,
        params=params,
    )


def svm_score(model: SvmModel, x) -> float:
    return model.score(x)
