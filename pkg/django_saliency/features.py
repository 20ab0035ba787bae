from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import (
    CHANNEL_COUNT,
    FeatureStack,
    RgbImage,
    SaliencyError,
    minmax_normalize,
)
from .semantic import center_channel, detector_channels, horizon_channel
from .sift import SiftParams, sift_channel

logger = logging.getLogger(__name__)

STACK_MAGIC = b"FSTK"
STACK_VERSION = 1
_STACK_HEADER = struct.Struct("<4sHIIH")

ITTI_MIN_SIDE = 64
FULL_STACK_MIN_SIDE = 64

# (cos, sin) of 0, 45, 90 and 135 degrees, exact so that kernels transpose cleanly.
_HALF_SQRT2 = np.sqrt(0.5)
ORIENTATIONS = (
    (1.0, 0.0),
    (_HALF_SQRT2, _HALF_SQRT2),
    (0.0, 1.0),
    (-_HALF_SQRT2, _HALF_SQRT2),
)

STEERABLE_SIGMA = 1.2
PYRAMID_BLUR = 1.0


class StackFileError(SaliencyError):
    pass


@dataclass(frozen=True)
class PyramidSpec:
    orientations: int = 4
    scales: int = 3
    include_lowpass: bool = True

    def __post_init__(self):
        if (self.orientations, self.scales, self.include_lowpass) != (4, 3, True):
            raise ValueError("The channel registry requires 4 orientations, 3 scales and a low-pass plane.")


@dataclass(frozen=True)
class HistogramSpec:
    bins_per_axis: int = 8
    median_radii: tuple[int, ...] = (1, 2, 4, 8, 16, 32)

    def __post_init__(self):
        radii = tuple(self.median_radii)
        if len(radii) != 6 or any(b <= a for a, b in zip(radii, radii[1:])) or radii[0] < 0:
            raise ValueError("median_radii must be 6 strictly increasing non-negative integers.")
        if self.bins_per_axis < 1:
            raise ValueError("bins_per_axis must be positive.")
        object.__setattr__(self, "median_radii", radii)


# Pyramid helpers


def downsample(plane: np.ndarray) -> np.ndarray:
    """Blur and keep every other row and column (ceil sizing)."""
    blurred = ndimage.gaussian_filter(plane, PYRAMID_BLUR, mode="reflect")
    return blurred[::2, ::2]


def gaussian_pyramid(plane: np.ndarray, levels: int) -> list[np.ndarray]:
    pyramid = [np.asarray(plane, dtype=np.float64)]
    for _ in range(1, levels):
        pyramid.append(downsample(pyramid[-1]))
    return pyramid


def resize_bilinear(plane: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Bilinear resampling with corner pixels aligned."""
    height, width = shape
    src_h, src_w = plane.shape
    if (src_h, src_w) == (height, width):
        return np.array(plane, dtype=np.float64)
    rows = np.linspace(0.0, src_h - 1, height)
    cols = np.linspace(0.0, src_w - 1, width)
    grid_r, grid_c = np.meshgrid(rows, cols, indexing="ij")
    return ndimage.map_coordinates(
        np.asarray(plane, dtype=np.float64), [grid_r, grid_c], order=1, mode="nearest"
    )


# Steerable pyramid energy


def oriented_kernel(orientation: int, sigma: float = STEERABLE_SIGMA) -> np.ndarray:
    """Zero-mean second derivative of a Gaussian along one of the four directions."""
    cos_t, sin_t = ORIENTATIONS[orientation]
    radius = int(np.ceil(3 * sigma))
    axis = np.arange(-radius, radius + 1, dtype=np.float64)
    y, x = np.meshgrid(axis, axis, indexing="ij")
    u = x * cos_t + y * sin_t
    kernel = (u * u / sigma**4 - 1.0 / sigma**2) * np.exp(-(x * x + y * y) / (2 * sigma * sigma))
    return kernel - kernel.mean()


def band_energies(luma: np.ndarray, spec: PyramidSpec | None = None) -> tuple[list[list[np.ndarray]], np.ndarray]:
    """
    Raw squared band-pass responses at pyramid resolution, indexed
    [scale][orientation], plus the squared low-pass residual.
    """
    spec = spec or PyramidSpec()
    pyramid = gaussian_pyramid(luma, spec.scales + 1)
    kernels = [oriented_kernel(o) for o in range(spec.orientations)]

    bands: list[list[np.ndarray]] = []
    for level in pyramid[: spec.scales]:
        bands.append([ndimage.convolve(level, k, mode="reflect") ** 2 for k in kernels])
    lowpass = pyramid[spec.scales] ** 2
    return bands, lowpass


def steerable_energy(img: RgbImage, spec: PyramidSpec | None = None) -> np.ndarray:
    """13 planes: 4 orientations x 3 scales of local energy, then the low-pass residual."""
    spec = spec or PyramidSpec()
    shape = (img.height, img.width)
    bands, lowpass = band_energies(img.luma(), spec)

    planes = [
        minmax_normalize(resize_bilinear(energy, shape))
        for scale in bands
        for energy in scale
    ]
    planes.append(minmax_normalize(resize_bilinear(lowpass, shape)))
    return np.stack(planes)


# Itti-Koch conspicuity


def itti_normalize(plane: np.ndarray) -> np.ndarray:
    """N(.): scale to [0, 1] and weight by (1 - mean of the other local maxima)^2."""
    plane = minmax_normalize(plane)
    if not plane.any():
        return plane
    peaks = (plane == ndimage.maximum_filter(plane, size=3, mode="constant")) & (plane > 0)
    values = np.sort(plane[peaks])[:-1]
    mean = float(values.mean()) if values.size else 0.0
    return plane * (1.0 - mean) ** 2


def _gabor_kernel(orientation: int, sigma: float = 1.5, wavelength: float = 4.0) -> np.ndarray:
    cos_t, sin_t = ORIENTATIONS[orientation]
    radius = int(np.ceil(2 * sigma))
    axis = np.arange(-radius, radius + 1, dtype=np.float64)
    y, x = np.meshgrid(axis, axis, indexing="ij")
    u = x * cos_t + y * sin_t
    kernel = np.exp(-(x * x + y * y) / (2 * sigma * sigma)) * np.cos(2 * np.pi * u / wavelength)
    return kernel - kernel.mean()


_CENTERS = (2, 3, 4)
_DELTAS = (3, 4)


def _center_surround(pyramid: list[np.ndarray]) -> list[np.ndarray]:
    maps = []
    for c in _CENTERS:
        for delta in _DELTAS:
            surround = resize_bilinear(pyramid[c + delta], pyramid[c].shape)
            maps.append(np.abs(pyramid[c] - surround))
    return maps


def _across_scale(maps: list[np.ndarray], shape: tuple[int, int]) -> np.ndarray:
    total = np.zeros(shape, dtype=np.float64)
    for m in maps:
        total += itti_normalize(resize_bilinear(m, shape))
    return total


def itti_channels(img: RgbImage) -> np.ndarray:
    """Intensity, color and orientation conspicuity planes."""
    img.require(ITTI_MIN_SIDE)
    levels = _CENTERS[-1] + _DELTAS[-1] + 1
    shape = (img.height, img.width)

    r, g, b = (img.pixels[..., i] for i in range(3))
    intensity = gaussian_pyramid(img.luma(), levels)
    red_green = gaussian_pyramid(r - g, levels)
    blue_yellow = gaussian_pyramid(b - 0.5 * (r + g), levels)

    work_shape = intensity[_CENTERS[0]].shape

    intensity_consp = _across_scale(_center_surround(intensity), work_shape)
    color_consp = _across_scale(
        _center_surround(red_green) + _center_surround(blue_yellow), work_shape
    )

    orientation_consp = np.zeros(work_shape, dtype=np.float64)
    for orientation in range(len(ORIENTATIONS)):
        kernel = _gabor_kernel(orientation)
        oriented = [
            np.abs(ndimage.convolve(level, kernel, mode="reflect")) for level in intensity
        ]
        orientation_consp += itti_normalize(
            _across_scale(_center_surround(oriented), work_shape)
        )

    return np.stack(
        [
            minmax_normalize(resize_bilinear(itti_normalize(consp), shape))
            for consp in (intensity_consp, color_consp, orientation_consp)
        ]
    )


# Color channels


def color_value_channels(img: RgbImage) -> np.ndarray:
    """R, G, B values followed by each pixel's probability under its channel's 256-bin histogram."""
    planes = [np.array(img.pixels[..., c]) for c in range(3)]
    total = img.width * img.height
    for c in range(3):
        bins = np.clip(np.rint(img.pixels[..., c] * 255.0), 0, 255).astype(np.intp)
        counts = np.bincount(bins.ravel(), minlength=256)
        planes.append(counts[bins] / total)
    return np.stack(planes)


def quantize(values: np.ndarray, bins: int) -> np.ndarray:
    return np.minimum((np.asarray(values) * bins).astype(np.intp), bins - 1)


def median_filtered(img: RgbImage, radius: int) -> np.ndarray:
    size = 2 * radius + 1
    return np.stack(
        [
            ndimage.median_filter(img.pixels[..., c], size=size, mode="nearest")
            for c in range(3)
        ],
        axis=-1,
    )


def joint_color_probability(rgb: np.ndarray, bins: int) -> np.ndarray:
    """Each pixel's probability under the joint 3-D color histogram of the image."""
    q = quantize(rgb, bins)
    index = (q[..., 0] * bins + q[..., 1]) * bins + q[..., 2]
    counts = np.bincount(index.ravel(), minlength=bins**3)
    return counts[index] / index.size


def colorhist3d_probability(img: RgbImage, spec: HistogramSpec | None = None) -> np.ndarray:
    spec = spec or HistogramSpec()
    return np.stack(
        [
            minmax_normalize(joint_color_probability(median_filtered(img, r), spec.bins_per_axis))
            for r in spec.median_radii
        ]
    )


# Full stack


def build_feature_stack(
    img: RgbImage,
    detector_maps: dict[str, np.ndarray | None] | None = None,
    horizon_row: float | None = None,
    sift_params=None,
    pyramid: PyramidSpec | None = None,
    histogram: HistogramSpec | None = None,
):
    """
    Compute all 34 channels of one image in registry order.

    Returns the FeatureStack and the SIFT keypoints found on the way.
    """
    img.require(FULL_STACK_MIN_SIDE)
    detector_maps = detector_maps or {}
    sift_params = sift_params or SiftParams()

    density, keypoints = sift_channel(img.luma(), sift_params)
    planes = np.concatenate(
        [
            steerable_energy(img, pyramid),
            itti_channels(img),
            color_value_channels(img),
            colorhist3d_probability(img, histogram),
            horizon_channel(img, override_row=horizon_row)[None],
            detector_channels(
                img.width,
                img.height,
                face=detector_maps.get("face"),
                person=detector_maps.get("person"),
                car=detector_maps.get("car"),
            ),
            center_channel(img.width, img.height)[None],
            density[None],
        ]
    )
    return FeatureStack(planes), keypoints


def save_stack(stack: FeatureStack, path: Path | str) -> None:
    header = _STACK_HEADER.pack(
        STACK_MAGIC, STACK_VERSION, stack.width, stack.height, CHANNEL_COUNT
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(stack.channels, dtype="<f4").tobytes())


def load_stack(path: Path | str) -> FeatureStack:
    with open(path, "rb") as fh:
        data = fh.read()

    if len(data) < _STACK_HEADER.size:
        raise StackFileError(f"{path} is truncated.")
    magic, version, width, height, channels = _STACK_HEADER.unpack_from(data)
    if magic != STACK_MAGIC:
        raise StackFileError(f"{path} is not a feature stack file.")
    if version != STACK_VERSION:
        raise StackFileError(f"{path} has unsupported stack version {version}.")
    if channels != CHANNEL_COUNT:
        raise StackFileError(f"{path} holds {channels} channels, expected {CHANNEL_COUNT}.")

    expected = channels * width * height * 4
    payload = data[_STACK_HEADER.size :]
    if len(payload) != expected:
        raise StackFileError(f"{path} payload is {len(payload)} bytes, expected {expected}.")
    planes = np.frombuffer(payload, dtype="<f4").reshape(channels, height, width)
    return FeatureStack(planes.astype(np.float64))
