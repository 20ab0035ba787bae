import csv
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import ClassVar

import numpy as np
from django.test import SimpleTestCase

from django_saliency.core import CHANNEL_COUNT, FeatureStack, SingleClassInput, minmax_normalize
from django_saliency.evaluation import (
    ConfusionCounts,
    CvSpec,
    EmptyEvaluation,
    EvaluationError,
    FoldTooSmall,
    auc,
    compare_report,
    confusion_metrics,
    evaluate_scores,
    kfold_cv,
    kfold_fits,
    predict_map,
    roc_curve,
    stratified_folds,
)
from django_saliency.learners import LearnerSpec, TrainedModel, fit_model
from django_saliency.workers import parallel_map

from . import factories


@dataclass(frozen=True, eq=False)
class ChannelSumModel(TrainedModel):
    kind: ClassVar[str] = "sum"

    def score_many(self, matrix):
        return np.atleast_2d(matrix).sum(axis=1)


@dataclass(frozen=True, eq=False)
class ConstantModel(TrainedModel):
    kind: ClassVar[str] = "constant"

    def score_many(self, matrix):
        return np.full(len(np.atleast_2d(matrix)), 0.7)


def mann_whitney_auc(scores, labels):
    pos = scores[labels == 1][:, None]
    neg = scores[labels == -1][None, :]
    return float(np.mean((pos > neg) + 0.5 * (pos == neg)))


class ConfusionMetricTests(SimpleTestCase):
    def test_balanced_counts(self):
        metrics = confusion_metrics(ConfusionCounts(tp=5, fp=5, tn=5, fn=5))
        self.assertEqual(
            (metrics.ca, metrics.sensitivity, metrics.specificity, metrics.precision), (0.5, 0.5, 0.5, 0.5)
        )
        self.assertEqual(metrics.recall, metrics.sensitivity)

    def test_perfect_predictions(self):
        labels = np.array([1, 1, -1, -1, -1])
        report = evaluate_scores(np.array([0.9, 0.8, 0.1, 0.2, 0.3]), labels, threshold=0.5)
        self.assertEqual((report.ca, report.auc, report.precision), (1.0, 1.0, 1.0))
        self.assertEqual(report.counts, ConfusionCounts(tp=2, fp=0, tn=3, fn=0))

    def test_no_positive_predictions(self):
        with self.assertLogs("django_saliency.evaluation", level="WARNING"):
            metrics = confusion_metrics(ConfusionCounts(tp=0, fp=0, tn=5, fn=5))
        self.assertEqual(metrics.precision, 0.0)
        self.assertEqual(metrics.degenerate, ("precision",))
        self.assertEqual(metrics.ca, 0.5)

    def test_empty(self):
        with self.assertRaises(EmptyEvaluation):
            confusion_metrics(ConfusionCounts(0, 0, 0, 0))
        with self.assertRaises(EmptyEvaluation):
            evaluate_scores([], [])


class RocTests(SimpleTestCase):
    def test_matches_pairwise_count(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(4, 60))
            scores = rng.integers(0, 10, n).astype(float)
            labels = np.where(rng.random(n) < 0.5, 1, -1)
            labels[0], labels[1] = 1, -1
            self.assertAlmostEqual(auc(roc_curve(scores, labels)), mann_whitney_auc(scores, labels))

    def test_monotone_transform_keeps_auc(self):
        rng = np.random.default_rng(1)
        scores = rng.integers(-20, 20, 80).astype(float)
        labels = np.where(rng.random(80) < 0.4, 1, -1)
        self.assertEqual(auc(roc_curve(scores, labels)), auc(roc_curve(scores**3 + 5, labels)))

    def test_identical_scores(self):
        roc = roc_curve(np.full(6, 0.3), np.array([1, -1, 1, -1, -1, 1]))
        self.assertEqual(roc, [(0.0, 0.0), (1.0, 1.0)])
        self.assertEqual(auc(roc), 0.5)

    def test_curve_is_monotone(self):
        rng = np.random.default_rng(2)
        labels = np.where(rng.random(100) < 0.5, 1, -1)
        roc = roc_curve(rng.random(100), labels)
        self.assertEqual(roc[0], (0.0, 0.0))
        self.assertEqual(roc[-1], (1.0, 1.0))
        for (f0, t0), (f1, t1) in zip(roc, roc[1:]):
            self.assertTrue(f1 >= f0 and t1 >= t0)

    def test_single_class(self):
        with self.assertRaises(SingleClassInput):
            roc_curve([0.1, 0.2], [1, 1])


class CrossValidationTests(SimpleTestCase):
    def test_stratified_folds(self):
        labels = np.array([1] * 50 + [-1] * 50)
        folds = stratified_folds(labels, CvSpec(folds=5, rng_seed=3))
        for k in range(5):
            self.assertEqual(np.sum((folds == k) & (labels == 1)), 10)
            self.assertEqual(np.sum((folds == k) & (labels == -1)), 10)
        np.testing.assert_array_equal(folds, stratified_folds(labels, CvSpec(folds=5, rng_seed=3)))

    def test_fold_too_small(self):
        with self.assertRaises(FoldTooSmall):
            stratified_folds(np.array([1, 1, 1, -1, -1, -1]), CvSpec(folds=5))
        with self.assertRaises(ValueError):
            CvSpec(folds=1)

    def test_held_out_rows_do_not_reach_training(self):
        matrix, labels = factories.noisy_blobs(np.random.default_rng(4), 100)
        spec = LearnerSpec("knn")
        cv = CvSpec(folds=5, rng_seed=9)
        original = list(kfold_fits(matrix, labels, spec, cv))

        poisoned = matrix.copy()
        held_out = original[0].test_index
        poisoned[held_out] = 1e6
        refit = list(kfold_fits(poisoned, labels, spec, cv))

        inputs = np.random.default_rng(5).normal(size=(30, 2))
        np.testing.assert_array_equal(original[0].model.score_raw(inputs), refit[0].model.score_raw(inputs))
        np.testing.assert_array_equal(
            original[0].model.normalizer.maxs, refit[0].model.normalizer.maxs
        )
        self.assertFalse(np.array_equal(original[1].model.normalizer.maxs, refit[1].model.normalizer.maxs))

    def test_every_row_is_held_out_once(self):
        labels = np.array([1] * 12 + [-1] * 13)
        matrix = np.random.default_rng(6).random((25, 3))
        held = np.concatenate(
            [fit.test_index for fit in kfold_fits(matrix, labels, LearnerSpec("knn"), CvSpec())]
        )
        self.assertEqual(sorted(held.tolist()), list(range(25)))

    def test_separable_data(self):
        matrix, labels = factories.separable_blobs(np.random.default_rng(7), 30)
        report = kfold_cv(matrix, labels, LearnerSpec("knn"))
        self.assertEqual((report.ca, report.auc), (1.0, 1.0))

    def test_worker_pool_keeps_order(self):
        self.assertEqual(parallel_map(abs, [-1, 2, -3, 4], jobs=2), [1, 2, 3, 4])


class PredictMapTests(SimpleTestCase):
    def test_stride_one_scores_every_pixel(self):
        rng = np.random.default_rng(8)
        matrix, labels = factories.random_features(rng, 60)
        model = fit_model(LearnerSpec("knn"), matrix, labels)
        stack = FeatureStack(rng.random((CHANNEL_COUNT, 12, 9)))
        rows = stack.channels.reshape(CHANNEL_COUNT, -1).T
        expected = minmax_normalize(model.score_raw(rows).reshape(12, 9))
        result = predict_map(model, stack, model.normalizer)
        np.testing.assert_array_equal(result.values, expected)

    def test_constant_model_gives_zeros(self):
        stack = FeatureStack(np.random.default_rng(9).random((CHANNEL_COUNT, 10, 10)))
        self.assertFalse(predict_map(ConstantModel(), stack).values.any())

    def test_coarse_stride_stays_close(self):
        rng = np.random.default_rng(10)
        planes = np.stack([factories.smooth_texture(rng, 64, sigma=6.0) for _ in range(CHANNEL_COUNT)])
        stack = FeatureStack(planes)
        fine = predict_map(ChannelSumModel(), stack, stride=1).values
        coarse = predict_map(ChannelSumModel(), stack, stride=4).values
        self.assertLessEqual(np.abs(fine - coarse).mean(), 0.05)
        self.assertEqual(coarse.shape, (64, 64))

    def test_excluded_groups_are_zeroed(self):
        planes = np.zeros((CHANNEL_COUNT, 8, 8))
        planes[33, 2, 3] = 1.0
        stack = FeatureStack(planes)
        self.assertEqual(predict_map(ChannelSumModel(), stack).values[2, 3], 1.0)
        self.assertFalse(predict_map(ChannelSumModel(), stack, exclude_groups=["sift"]).values.any())

    def test_bad_stride(self):
        with self.assertRaises(ValueError):
            predict_map(ConstantModel(), FeatureStack(np.zeros((CHANNEL_COUNT, 4, 4))), stride=0)


class CompareReportTests(SimpleTestCase):
    def test_table_and_plot(self):
        rng = np.random.default_rng(11)
        labels = np.where(rng.random(50) < 0.5, 1, -1)
        names = ["svm", "c45", "knn", "nb", "adaboost"]
        reports = [(name, evaluate_scores(rng.random(50), labels, 0.5)) for name in names]
        with tempfile.TemporaryDirectory() as tmp:
            table = Path(tmp) / "metrics.csv"
            plot = Path(tmp) / "roc.svg"
            compare_report(reports, table, plot)
            with open(table, newline="") as fh:
                rows = list(csv.reader(fh))
            svg = plot.read_text()
            curves = (Path(tmp) / "roc.csv").read_text().splitlines()

        self.assertEqual(rows[0], ["method", "ca", "sens", "spec", "auc", "prec", "recall"])
        self.assertEqual([r[0] for r in rows[1:]], names)
        self.assertAlmostEqual(float(rows[1][4]), reports[0][1].auc, places=6)
        self.assertIn('id="chance"', svg)
        for name in names:
            self.assertIn(f'id="roc-{name}"', svg)
        self.assertEqual(curves[0], "method,fpr,tpr")

    def test_nothing_to_report(self):
        with tempfile.TemporaryDirectory() as tmp, self.assertRaises(EvaluationError):
            compare_report([], Path(tmp) / "m.csv", Path(tmp) / "r.svg")
