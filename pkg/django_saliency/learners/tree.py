"""
C4.5-style decision tree over continuous attributes: binary midpoint
splits picked by gain ratio, then pessimistic error pruning.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy import special
from scipy.stats import beta

from .base import LearnerError, TrainedModel, check_training_data

logger = logging.getLogger(__name__)

# Slack when comparing a candidate's gain against the average gain.
GAIN_EPSILON = 1e-9


class TooFewSamples(LearnerError):
    pass


@dataclass(frozen=True)
class TreeParams:
    min_leaf: int = 2
    confidence: float = 0.25

    def __post_init__(self):
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1.")
        if not 0.0 < self.confidence < 0.5:
            raise ValueError("confidence must lie strictly between 0 and 0.5.")


@dataclass(frozen=True)
class TreeNode:
    positives: int
    total: int
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def errors(self) -> int:
        return min(self.positives, self.total - self.positives)

    def as_leaf(self) -> "TreeNode":
        return TreeNode(positives=self.positives, total=self.total)

    def leaves(self):
        if self.is_leaf:
            yield self
        else:
            yield from self.left.leaves()
            yield from self.right.leaves()

    def preorder(self):
        yield self
        if not self.is_leaf:
            yield from self.left.preorder()
            yield from self.right.preorder()


@dataclass(frozen=True)
class SplitChoice:
    feature: int
    threshold: float
    gain: float
    gain_ratio: float


@dataclass(frozen=True, eq=False)
class TreeModel(TrainedModel):
    kind: ClassVar[str] = "c45"
    threshold: ClassVar[float] = 0.5

    root: TreeNode

    def _route(self, node: TreeNode, matrix: np.ndarray, rows: np.ndarray, out: np.ndarray) -> None:
        if node.is_leaf:
            out[rows] = node.positives / node.total
            return
        goes_left = matrix[rows, node.feature] <= node.threshold
        self._route(node.left, matrix, rows[goes_left], out)
        self._route(node.right, matrix, rows[~goes_left], out)

    def score_many(self, matrix: np.ndarray) -> np.ndarray:
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        out = np.empty(len(matrix))
        self._route(self.root, matrix, np.arange(len(matrix)), out)
        return out

    def pessimistic_errors(self, confidence: float) -> float:
        return sum(estimated_errors(leaf.errors, leaf.total, confidence) for leaf in self.root.leaves())


def entropy(positives, total):
    """Binary entropy in bits of a node with ``positives`` out of ``total``; 0 log 0 = 0."""
    positives = np.asarray(positives, dtype=np.float64)
    total = np.asarray(total, dtype=np.float64)
    shape = np.broadcast(positives, total).shape
    p = np.divide(positives, total, out=np.zeros(shape), where=total > 0)
    h = (special.entr(p) + special.entr(1.0 - p)) / np.log(2.0)
    return h if h.ndim else float(h)


def evaluate_threshold(values, labels, threshold: float) -> tuple[float, float]:
    """Information gain and gain ratio of splitting ``values <= threshold``."""
    values = np.asarray(values, dtype=np.float64)
    is_pos = np.asarray(labels) == 1
    left = values <= threshold
    n = len(values)
    n_left = int(left.sum())
    n_right = n - n_left
    parent = entropy(is_pos.sum(), n)
    children = (
        n_left * entropy(is_pos[left].sum(), n_left)
        + n_right * entropy(is_pos[~left].sum(), n_right)
    ) / n
    gain = parent - children
    split_info = entropy(n_left, n)
    return gain, (gain / split_info if split_info > 0 else 0.0)


def _attribute_split(values: np.ndarray, is_pos: np.ndarray, min_leaf: int):
    n = len(values)
    order = np.argsort(values, kind="stable")
    v = values[order]
    cum_pos = np.cumsum(is_pos[order])
    total_pos = cum_pos[-1]

    n_left = np.arange(1, n)
    n_right = n - n_left
    valid = (v[:-1] < v[1:]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not np.any(valid):
        return None

    pos_left = cum_pos[:-1]
    parent = entropy(total_pos, n)
    children = (n_left * entropy(pos_left, n_left) + n_right * entropy(total_pos - pos_left, n_right)) / n
    gain = np.where(valid, parent - children, -np.inf)
    i = int(np.argmax(gain))

    threshold = (v[i] + v[i + 1]) / 2.0
    if not v[i] <= threshold < v[i + 1]:
        threshold = v[i]
    split_info = entropy(n_left[i], n)
    best_gain = float(gain[i])
    return threshold, best_gain, (best_gain / split_info if split_info > 0 else 0.0)


def best_split(matrix: np.ndarray, labels: np.ndarray, min_leaf: int) -> SplitChoice | None:
    """
    Per attribute the threshold with the highest gain; across attributes the
    highest gain ratio among those whose gain reaches the average gain.
    """
    is_pos = labels == 1
    candidates = []
    for feature in range(matrix.shape[1]):
        found = _attribute_split(matrix[:, feature], is_pos, min_leaf)
        if found is not None and found[1] > 0:
            candidates.append(SplitChoice(feature, float(found[0]), found[1], found[2]))
    if not candidates:
        return None

    average = sum(c.gain for c in candidates) / len(candidates) - GAIN_EPSILON
    best = None
    for choice in candidates:
        if choice.gain >= average and (best is None or choice.gain_ratio > best.gain_ratio):
            best = choice
    return best


def estimated_errors(errors: int, total: int, confidence: float) -> float:
    """Upper confidence bound on a leaf's error count (exact binomial)."""
    if total == 0:
        return 0.0
    if errors >= total:
        return float(total)
    return total * float(beta.ppf(1.0 - confidence, errors + 1, total - errors))


def _grow(matrix: np.ndarray, labels: np.ndarray, params: TreeParams) -> TreeNode:
    positives = int((labels == 1).sum())
    total = len(labels)
    if positives in (0, total) or total < 2 * params.min_leaf:
        return TreeNode(positives=positives, total=total)

    choice = best_split(matrix, labels, params.min_leaf)
    if choice is None:
        return TreeNode(positives=positives, total=total)

    left = matrix[:, choice.feature] <= choice.threshold
    return TreeNode(
        positives=positives,
        total=total,
        feature=choice.feature,
        threshold=choice.threshold,
        left=_grow(matrix[left], labels[left], params),
        right=_grow(matrix[~left], labels[~left], params),
    )


def prune(node: TreeNode, confidence: float) -> tuple[TreeNode, float]:
    """Collapse every subtree whose leaf estimate is no worse than its own."""
    as_leaf = estimated_errors(node.errors, node.total, confidence)
    if node.is_leaf:
        return node, as_leaf

    left, left_est = prune(node.left, confidence)
    right, right_est = prune(node.right, confidence)
    subtree = left_est + right_est
    if as_leaf <= subtree:
        return node.as_leaf(), as_leaf
    return TreeNode(node.positives, node.total, node.feature, node.threshold, left, right), subtree


def c45_train(matrix, labels, params: TreeParams | None = None) -> TreeModel:
    params = params or TreeParams()
    matrix, labels = check_training_data(matrix, labels, both_classes=False)
    if len(labels) < 2 * params.min_leaf:
        raise TooFewSamples(
            f"{len(labels)} rows cannot fill two leaves of at least {params.min_leaf}."
        )

    grown = _grow(matrix, labels, params)
    root, estimate = prune(grown, params.confidence)
    logger.info(
        "Tree grown with %d leaves, %d after pruning (estimated errors %.2f)",
        sum(1 for _ in grown.leaves()),
        sum(1 for _ in root.leaves()),
        estimate,
    )
    return TreeModel(root=root)


def c45_score(model: TreeModel, x) -> float:
    return model.score(x)
