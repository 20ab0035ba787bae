from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import matplotlib
import numpy as np
from matplotlib.figure import Figure
from scipy.interpolate import RegularGridInterpolator

from .conf import get_setting
from .core import FeatureStack, SaliencyError, SaliencyMap, SingleClassInput, minmax_normalize
from .learners import LearnerSpec, TrainedModel, fit_model
from .sampling import NormalizationStats, ablate_groups, apply_normalizer
from .workers import parallel_map

logger = logging.getLogger(__name__)

METRICS_HEADER = ["method", "ca", "sens", "spec", "auc", "prec", "recall"]
CURVE_HEADER = ["method", "fpr", "tpr"]


class EvaluationError(SaliencyError):
    pass


class EmptyEvaluation(EvaluationError):
    pass


class FoldTooSmall(EvaluationError):
    pass


class ReportWriteError(EvaluationError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_predictions(cls, predicted, labels) -> "ConfusionCounts":
        predicted = np.asarray(predicted)
        labels = np.asarray(labels)
        return cls(
            tp=int(np.sum((predicted == 1) & (labels == 1))),
            fp=int(np.sum((predicted == 1) & (labels == -1))),
            tn=int(np.sum((predicted == -1) & (labels == -1))),
            fn=int(np.sum((predicted == -1) & (labels == 1))),
        )


@dataclass(frozen=True)
class Metrics:
    ca: float
    sensitivity: float
    specificity: float
    precision: float
    recall: float
    degenerate: tuple[str, ...] = ()


@dataclass(frozen=True)
class EvalReport:
    ca: float
    sensitivity: float
    specificity: float
    auc: float
    precision: float
    recall: float
    roc: tuple[tuple[float, float], ...]
    counts: ConfusionCounts
    degenerate: tuple[str, ...] = ()

    def row(self) -> list[float]:
        return [self.ca, self.sensitivity, self.specificity, self.auc, self.precision, self.recall]


@dataclass(frozen=True)
class CvSpec:
    folds: int = 5
    rng_seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("folds must be >= 2.")


@dataclass(frozen=True, eq=False)
class FoldFit:
    fold: int
    train_index: np.ndarray
    test_index: np.ndarray
    model: TrainedModel


# Metrics


def _ratio(num: int, den: int, name: str, degenerate: list[str]) -> float:
    if den == 0:
        degenerate.append(name)
        return 0.0
    return num / den


def confusion_metrics(counts: ConfusionCounts) -> Metrics:
    if counts.total == 0:
        raise EmptyEvaluation("No samples were evaluated.")
    degenerate: list[str] = []
    sensitivity = _ratio(counts.tp, counts.tp + counts.fn, "sensitivity", degenerate)
    specificity = _ratio(counts.tn, counts.tn + counts.fp, "specificity", degenerate)
    precision = _ratio(counts.tp, counts.tp + counts.fp, "precision", degenerate)
    if degenerate:
        logger.warning("Zero denominator for %s; reported as 0", ", ".join(degenerate))
    return Metrics(
        ca=(counts.tp + counts.tn) / counts.total,
        sensitivity=sensitivity,
        specificity=specificity,
        precision=precision,
        recall=sensitivity,
        degenerate=tuple(degenerate),
    )


def roc_curve(scores, labels) -> list[tuple[float, float]]:
    """
    (fpr, tpr) points from (0, 0) to (1, 1), one per distinct score. Equal
    scores move together as one block.
    """
    scores = np.asarray(scores, dtype=np.float64)
    is_pos = np.asarray(labels) == 1
    n_pos = int(is_pos.sum())
    n_neg = len(is_pos) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassInput("ROC analysis needs both classes.")

    order = np.argsort(-scores, kind="stable")
    ordered = scores[order]
    tp = np.cumsum(is_pos[order])
    fp = np.cumsum(~is_pos[order])
    block_ends = np.flatnonzero(np.append(ordered[1:] != ordered[:-1], True))

    points = [(0.0, 0.0)]
    points.extend((fp[e] / n_neg, tp[e] / n_pos) for e in block_ends)
    return points


def auc(roc: Sequence[tuple[float, float]]) -> float:
    fpr = np.array([p[0] for p in roc])
    tpr = np.array([p[1] for p in roc])
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def evaluate_scores(scores, labels, threshold: float = 0.0) -> EvalReport:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if len(scores) == 0:
        raise EmptyEvaluation("No samples were evaluated.")
    counts = ConfusionCounts.from_predictions(np.where(scores >= threshold, 1, -1), labels)
    metrics = confusion_metrics(counts)
    roc = roc_curve(scores, labels)
    return EvalReport(
        ca=metrics.ca,
        sensitivity=metrics.sensitivity,
        specificity=metrics.specificity,
        auc=auc(roc),
        precision=metrics.precision,
        recall=metrics.recall,
        roc=tuple(roc),
        counts=counts,
        degenerate=metrics.degenerate,
    )


def evaluate_model(model: TrainedModel, matrix, labels) -> EvalReport:
    return evaluate_scores(model.score_raw(matrix), labels, model.threshold)


# Cross-validation


def stratified_folds(labels, cv: CvSpec) -> np.ndarray:
    """Fold number per row; each class is shuffled with the seeded generator and dealt round-robin."""
    labels = np.asarray(labels)
    if len(labels) < cv.folds:
        raise FoldTooSmall(f"{len(labels)} samples cannot fill {cv.folds} folds.")
    rng = np.random.default_rng(cv.rng_seed)
    folds = np.empty(len(labels), dtype=np.int64)
    for label in (1, -1):
        members = np.flatnonzero(labels == label)
        if len(members) < cv.folds:
            raise FoldTooSmall(
                f"Class {label:+d} has {len(members)} samples, fewer than {cv.folds} folds."
            )
        shuffled = members[rng.permutation(len(members))]
        folds[shuffled] = np.arange(len(shuffled)) % cv.folds
    return folds


def _fit_fold(task) -> TrainedModel:
    spec, matrix, labels = task
    return fit_model(spec, matrix, labels)


def kfold_fits(matrix, labels, spec: LearnerSpec, cv: CvSpec, jobs: int = 1) -> Iterator[FoldFit]:
    """Train one model per fold on the other folds; the normalizer is fitted inside each training part."""
    matrix = np.asarray(matrix, dtype=np.float64)
    labels = np.asarray(labels)
    folds = stratified_folds(labels, cv)

    splits = [(np.flatnonzero(folds != k), np.flatnonzero(folds == k)) for k in range(cv.folds)]
    tasks = [(spec, matrix[train], labels[train]) for train, _test in splits]
    models = parallel_map(_fit_fold, tasks, jobs)
    for k, ((train, test), model) in enumerate(zip(splits, models)):
        if get_setting("DEBUG_MODE"):
            logger.debug("Fold %d: %d training rows, %d held out", k, len(train), len(test))
        yield FoldFit(fold=k, train_index=train, test_index=test, model=model)


def kfold_cv(matrix, labels, spec: LearnerSpec, cv: CvSpec | None = None, jobs: int = 1) -> EvalReport:
    """Pooled held-out scores of stratified k-fold cross-validation."""
    cv = cv or CvSpec()
    matrix = np.asarray(matrix, dtype=np.float64)
    labels = np.asarray(labels)
    scores = np.empty(len(labels))
    threshold = 0.0
    for fit in kfold_fits(matrix, labels, spec, cv, jobs=jobs):
        scores[fit.test_index] = fit.model.score_raw(matrix[fit.test_index])
        threshold = fit.model.threshold
    report = evaluate_scores(scores, labels, threshold)
    logger.info("%d-fold CV for %s: CA %.4f, AUC %.4f", cv.folds, spec.method, report.ca, report.auc)
    return report


# Whole-image prediction


def _grid(size: int, stride: int) -> np.ndarray:
    points = np.arange(0, size, stride)
    if points[-1] != size - 1:
        points = np.append(points, size - 1)
    return points


def predict_map(
    model: TrainedModel,
    stack: FeatureStack,
    stats: NormalizationStats | None = None,
    stride: int = 1,
    exclude_groups: Iterable[str] = (),
) -> SaliencyMap:
    """
    Score every ``stride``-th pixel (the last row and column included),
    bilinearly upsample to full size and min-max normalize.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    height, width = stack.height, stack.width
    ys = _grid(height, stride)
    xs = _grid(width, stride)

    block = stack.channels[:, ys][:, :, xs]
    rows = block.reshape(block.shape[0], -1).T
    exclude_groups = tuple(exclude_groups)
    if exclude_groups:
        rows = ablate_groups(rows, exclude_groups)
    if stats is not None:
        rows = apply_normalizer(stats, rows)
    coarse = model.score_many(rows).reshape(len(ys), len(xs))

    if stride == 1:
        full = coarse
    else:
        interpolate = RegularGridInterpolator((ys, xs), coarse, method="linear")
        yy, xx = np.mgrid[0:height, 0:width]
        full = interpolate(np.column_stack([yy.ravel(), xx.ravel()])).reshape(height, width)
    return SaliencyMap(minmax_normalize(full))


# Reports


def compare_report(
    reports: Sequence[tuple[str, EvalReport]],
    table_path: Path | str,
    plot_path: Path | str,
) -> None:
    """
    Write the metrics table, an SVG of all ROC curves with the chance
    diagonal, and the curve points as CSV next to the SVG.
    """
    if not reports:
        raise EvaluationError("Nothing to report.")
    plot_path = Path(plot_path)
    curve_path = plot_path.with_suffix(".csv")

    try:
        with open(table_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(METRICS_HEADER)
            for name, report in reports:
                writer.writerow([name] + [f"{v:.6f}" for v in report.row()])

        with open(curve_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CURVE_HEADER)
            for name, report in reports:
                for fpr, tpr in report.roc:
                    writer.writerow([name, repr(float(fpr)), repr(float(tpr))])

        with matplotlib.rc_context({"svg.hashsalt": "django-saliency", "svg.fonttype": "none"}):
            fig = Figure(figsize=(5.5, 5.5))
            ax = fig.add_subplot()
            ax.plot([0, 1], [0, 1], linestyle="--", color="0.6", label="chance", gid="chance")
            for name, report in reports:
                fpr, tpr = zip(*report.roc)
                ax.plot(fpr, tpr, label=f"{name} (AUC {report.auc:.3f})", gid=f"roc-{name}")
            ax.set_xlim(0, 1)
            ax.set_ylim(0, 1)
            ax.set_xlabel("False positive rate")
            ax.set_ylabel("True positive rate")
            ax.legend(loc="lower right")
            fig.savefig(plot_path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise ReportWriteError(f"Cannot write report: {exc}") from exc

    logger.info("Wrote %d-method comparison to %s and %s", len(reports), table_path, plot_path)
