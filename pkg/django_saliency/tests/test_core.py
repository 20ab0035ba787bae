import numpy as np
from django.test import SimpleTestCase

from django_saliency.core import (
    CHANNEL_COUNT,
    ChannelGroup,
    DimensionMismatch,
    FeatureStack,
    ImageTooSmall,
    LabeledSample,
    RgbImage,
    SaliencyError,
    accumulate_gaussians,
    channel_registry,
    group_indices,
    minmax_normalize,
)


class ChannelRegistryTests(SimpleTestCase):
    def test_registry_has_34_channels_in_order(self):
        registry = channel_registry()
        self.assertEqual(len(registry), CHANNEL_COUNT)
        self.assertEqual([c.index for c, _ in registry], list(range(CHANNEL_COUNT)))

    def test_last_channels_are_center_and_sift(self):
        registry = channel_registry()
        self.assertIs(registry[32][0].group, ChannelGroup.CENTER)
        self.assertIs(registry[33][0].group, ChannelGroup.SIFT)
        self.assertEqual(registry[33][1], "sift_density")

    def test_group_sizes(self):
        sizes = {group: len(group_indices(group)) for group in ChannelGroup}
        self.assertEqual(sizes[ChannelGroup.PYRAMID], 13)
        self.assertEqual(sizes[ChannelGroup.ITTI], 3)
        self.assertEqual(sizes[ChannelGroup.COLOR], 6)
        self.assertEqual(sizes[ChannelGroup.COLORHIST], 6)
        self.assertEqual(sizes[ChannelGroup.DETECTOR], 3)
        self.assertEqual(group_indices("sift"), [33])

    def test_unknown_group(self):
        with self.assertRaises(ValueError):
            group_indices("gist")


class NormalizeTests(SimpleTestCase):
    def test_range_is_unit(self):
        plane = minmax_normalize(np.array([[2.0, 3.0], [4.0, 6.0]]))
        self.assertEqual(plane.min(), 0.0)
        self.assertEqual(plane.max(), 1.0)
        self.assertAlmostEqual(plane[0, 1], 0.25)

    def test_constant_plane_is_zero(self):
        plane = minmax_normalize(np.full((5, 5), 7.5))
        self.assertFalse(plane.any())


class GaussianAccumulationTests(SimpleTestCase):
    def test_peak_at_point(self):
        plane = accumulate_gaussians([(30.0, 40.0)], 64, 64, 3.0)
        self.assertEqual(np.unravel_index(np.argmax(plane), plane.shape), (40, 30))
        self.assertEqual(plane[40, 30], 1.0)

    def test_truncation_at_three_sigma(self):
        plane = accumulate_gaussians([(32.0, 32.0)], 64, 64, 2.0)
        self.assertEqual(plane[32, 32 + 7], 0.0)
        self.assertGreater(plane[32, 32 + 6], 0.0)

    def test_untruncated_mass(self):
        sigma = 5.0
        plane = accumulate_gaussians([(50.0, 50.0)], 101, 101, sigma, truncate=None)
        self.assertAlmostEqual(plane.sum() / (2 * np.pi * sigma * sigma), 1.0, delta=0.01)

    def test_matches_direct_sum(self):
        points = [(10.0, 12.5), (20.25, 8.0)]
        plane = accumulate_gaussians(points, 32, 24, 4.0, truncate=None)
        ys, xs = np.mgrid[0:24, 0:32]
        expected = sum(np.exp(-((xs - x) ** 2 + (ys - y) ** 2) / 32.0) for x, y in points)
        np.testing.assert_allclose(plane, expected, atol=1e-12)

    def test_sigma_must_be_positive(self):
        with self.assertRaises(ValueError):
            accumulate_gaussians([(1, 1)], 8, 8, 0.0)


class ValueTypeTests(SimpleTestCase):
    def test_image_too_small(self):
        with self.assertRaises(ImageTooSmall) as ctx:
            RgbImage(np.zeros((31, 40, 3)))
        self.assertEqual(ctx.exception.minimum, 32)

    def test_image_values_out_of_range(self):
        with self.assertRaises(SaliencyError):
            RgbImage(np.full((32, 32, 3), 1.5))

    def test_image_is_read_only(self):
        img = RgbImage(np.zeros((32, 32, 3)))
        with self.assertRaises(ValueError):
            img.pixels[0, 0, 0] = 1.0

    def test_luma_weights(self):
        pixels = np.zeros((32, 32, 3))
        pixels[..., 1] = 1.0
        self.assertAlmostEqual(RgbImage(pixels).luma()[0, 0], 0.587)

    def test_stack_shape_checked(self):
        with self.assertRaises(DimensionMismatch):
            FeatureStack(np.zeros((33, 8, 8)))
        with self.assertRaises(SaliencyError):
            FeatureStack(np.full((CHANNEL_COUNT, 8, 8), np.nan))

    def test_stack_vector(self):
        channels = np.arange(CHANNEL_COUNT * 4 * 5, dtype=float).reshape(CHANNEL_COUNT, 4, 5)
        stack = FeatureStack(channels)
        np.testing.assert_array_equal(stack.vector(3, 2), channels[:, 2, 3])

    def test_sample_label(self):
        with self.assertRaises(SaliencyError):
            LabeledSample(np.zeros(CHANNEL_COUNT), 0, "a", 0, 0)
