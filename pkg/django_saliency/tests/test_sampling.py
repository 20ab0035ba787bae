import csv
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from scipy import ndimage

from django_saliency.core import CHANNEL_COUNT, DimensionMismatch, FeatureStack, LabeledSample, SaliencyMap
from django_saliency.sampling import (
    EmptyInput,
    SampleFileError,
    SamplingSpec,
    ablate_groups,
    apply_normalizer,
    assemble_matrix,
    draw_samples,
    fit_normalizer,
    percentile_regions,
    read_samples,
    sample_image,
    write_samples,
    write_samples_csv,
)

from . import factories


def position_stack(height, width):
    """Channel 0 holds x, channel 1 holds y, the rest a ramp."""
    channels = np.zeros((CHANNEL_COUNT, height, width))
    ys, xs = np.mgrid[0:height, 0:width]
    channels[0] = xs
    channels[1] = ys
    channels[2:] = (xs + ys)[None] / (height + width)
    return FeatureStack(channels)


class PercentileRegionTests(SimpleTestCase):
    def test_ramp_cutoffs(self):
        gt = SaliencyMap(np.arange(100, dtype=float).reshape(10, 10))
        pos, neg = percentile_regions(gt, SamplingSpec())
        values = gt.values
        self.assertEqual(sorted(values[pos].tolist()), [95, 96, 97, 98, 99])
        self.assertEqual(sorted(values[neg].tolist()), list(range(30)))

    def test_constant_map_tie_break(self):
        pos, neg = percentile_regions(SaliencyMap(np.zeros((10, 10))), SamplingSpec())
        self.assertEqual(np.flatnonzero(pos.ravel()).tolist(), [0, 1, 2, 3, 4])
        self.assertEqual(np.flatnonzero(neg.ravel()).tolist(), list(range(5, 35)))
        self.assertFalse((pos & neg).any())


class DrawSampleTests(SimpleTestCase):
    def setUp(self):
        self.gt = np.zeros((160, 200))
        self.gt[60:100, 80:120] = 1.0
        self.stack = position_stack(160, 200)
        self.spec = SamplingSpec(rng_seed=11)

    def test_positives_inside_block_negatives_away(self):
        samples = sample_image(self.stack, SaliencyMap(self.gt), self.spec, "block")
        positives = [s for s in samples if s.label == 1]
        negatives = [s for s in samples if s.label == -1]
        self.assertEqual((len(positives), len(negatives)), (10, 10))
        for s in positives:
            self.assertTrue(80 <= s.x < 120 and 60 <= s.y < 100)
        for s in negatives:
            self.assertEqual(self.gt[s.y, s.x], 0.0)
            self.assertTrue(10 <= s.x < 190 and 10 <= s.y < 150)
            self.assertFalse(70 <= s.x < 130 and 50 <= s.y < 110)

    def test_features_come_from_the_pixel(self):
        for s in sample_image(self.stack, SaliencyMap(self.gt), self.spec, "block"):
            self.assertEqual((s.features[0], s.features[1]), (s.x, s.y))

    def test_same_seed_same_samples(self):
        first = sample_image(self.stack, SaliencyMap(self.gt), self.spec, "block")
        second = sample_image(self.stack, SaliencyMap(self.gt), self.spec, "block")
        self.assertEqual([(s.x, s.y) for s in first], [(s.x, s.y) for s in second])

    def test_image_id_changes_the_draw(self):
        first = sample_image(self.stack, SaliencyMap(self.gt), self.spec, "a")
        second = sample_image(self.stack, SaliencyMap(self.gt), self.spec, "b")
        self.assertNotEqual([(s.x, s.y) for s in first], [(s.x, s.y) for s in second])

    def random_maps(self):
        rng = np.random.default_rng(21)
        for _ in range(12):
            height, width = rng.integers(40, 90, size=2)
            cx, cy = rng.uniform(20, width - 20), rng.uniform(20, height - 20)
            gt = factories.blob((height, width), (cx, cy), rng.uniform(5.0, 8.0))
            gt += 0.05 * ndimage.gaussian_filter(rng.random((height, width)), 2.0)
            margin = int(rng.integers(0, 9))
            spec = SamplingSpec(
                pos_per_image=15, neg_per_image=15, border_margin=margin, rng_seed=int(rng.integers(2**32))
            )
            yield SaliencyMap(gt), spec

    def test_positives_outrank_negatives(self):
        compared = 0
        for gt, spec in self.random_maps():
            samples = sample_image(position_stack(gt.height, gt.width), gt, spec, "fuzz")
            positives = [gt.values[s.y, s.x] for s in samples if s.label == 1]
            negatives = [gt.values[s.y, s.x] for s in samples if s.label == -1]
            if positives and negatives:
                compared += 1
                with self.subTest(shape=gt.values.shape, margin=spec.border_margin):
                    self.assertGreaterEqual(min(positives), max(negatives))
        self.assertEqual(compared, 12)

    def test_no_sample_inside_the_border(self):
        for gt, spec in self.random_maps():
            m = spec.border_margin
            for s in sample_image(position_stack(gt.height, gt.width), gt, spec, "fuzz"):
                with self.subTest(shape=gt.values.shape, margin=m, x=s.x, y=s.y):
                    self.assertTrue(m <= s.x < gt.width - m and m <= s.y < gt.height - m)

    def test_tiny_image_yields_nothing(self):
        gt = SaliencyMap(np.arange(225, dtype=float).reshape(15, 15))
        with self.assertLogs("django_saliency.sampling", level="WARNING"):
            samples = sample_image(position_stack(15, 15), gt, SamplingSpec(), "tiny")
        self.assertEqual(samples, [])

    def test_mask_shape_checked(self):
        with self.assertRaises(DimensionMismatch):
            draw_samples(self.stack, np.zeros((10, 10), bool), np.zeros((10, 10), bool), self.spec)

    def test_spec_validation(self):
        with self.assertRaises(ValueError):
            SamplingSpec(pos_percentile=0.8, neg_percentile=0.3)
        with self.assertRaises(ValueError):
            SamplingSpec(border_margin=-1)


class MatrixTests(SimpleTestCase):
    def sample(self, value, label):
        return LabeledSample(np.full(CHANNEL_COUNT, value), label, "a", 1, 2)

    def test_assemble(self):
        matrix, labels = assemble_matrix([self.sample(0.5, 1)])
        self.assertEqual(matrix.shape, (1, CHANNEL_COUNT))
        self.assertEqual(labels.tolist(), [1])
        with self.assertRaises(EmptyInput):
            assemble_matrix([])

    def test_normalizer(self):
        train = np.zeros((2, CHANNEL_COUNT))
        train[:, 0] = (2.0, 4.0)
        stats = fit_normalizer(train)
        held_out = np.zeros((2, CHANNEL_COUNT))
        held_out[:, 0] = (3.0, 5.0)
        held_out[:, 1] = 9.0
        out = apply_normalizer(stats, held_out)
        self.assertEqual(out[0, 0], 0.5)
        self.assertEqual(out[1, 0], 1.0)
        self.assertFalse(out[:, 1:].any())

    def test_normalizer_keeps_training_in_unit_range(self):
        train = np.random.default_rng(2).normal(size=(50, CHANNEL_COUNT))
        out = apply_normalizer(fit_normalizer(train), train)
        np.testing.assert_array_equal(out.min(axis=0), 0.0)
        np.testing.assert_array_equal(out.max(axis=0), 1.0)

    def test_ablation(self):
        matrix = np.ones((3, CHANNEL_COUNT))
        out = ablate_groups(matrix, ["sift", "center"])
        self.assertFalse(out[:, 32:].any())
        self.assertTrue(out[:, :32].all())
        self.assertTrue(matrix.all())


class SampleFileTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)

    def test_binary_file(self):
        matrix = np.random.default_rng(0).random((7, CHANNEL_COUNT))
        labels = np.array([1, -1, 1, 1, -1, -1, 1])
        write_samples(matrix, labels, self.dir / "s.smpl")
        read_matrix, read_labels = read_samples(self.dir / "s.smpl")
        np.testing.assert_array_equal(read_matrix, matrix.astype(np.float32))
        np.testing.assert_array_equal(read_labels, labels)

    def test_empty_binary_file(self):
        write_samples(np.empty((0, CHANNEL_COUNT)), np.empty(0), self.dir / "s.smpl")
        matrix, labels = read_samples(self.dir / "s.smpl")
        self.assertEqual(matrix.shape, (0, CHANNEL_COUNT))

    def test_corrupt_binary_file(self):
        write_samples(np.zeros((2, CHANNEL_COUNT)), np.array([1, -1]), self.dir / "s.smpl")
        data = (self.dir / "s.smpl").read_bytes()
        (self.dir / "s.smpl").write_bytes(data[:-3])
        with self.assertRaises(SampleFileError):
            read_samples(self.dir / "s.smpl")
        (self.dir / "s.smpl").write_bytes(b"SMPX" + data[4:])
        with self.assertRaises(SampleFileError):
            read_samples(self.dir / "s.smpl")

    def test_csv_layout(self):
        samples = [LabeledSample(np.linspace(0, 1, CHANNEL_COUNT), -1, "img7", 12, 30)]
        write_samples_csv(samples, self.dir / "s.csv")
        with open(self.dir / "s.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        self.assertEqual(rows[0][:5], ["image_id", "x", "y", "label", "f00"])
        self.assertEqual(rows[0][-1], "f33")
        self.assertEqual(rows[1][:4], ["img7", "12", "30", "-1"])
        self.assertEqual(float(rows[1][-1]), 1.0)
