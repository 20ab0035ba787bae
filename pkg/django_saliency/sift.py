"""
Keypoint localization on a difference-of-Gaussians scale space, turned into
a per-pixel interest density. Orientation assignment and descriptors are
not computed.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy import ndimage

from .core import ImageTooSmall, MIN_IMAGE_SIDE, accumulate_gaussians, default_sigma, minmax_normalize

logger = logging.getLogger(__name__)

MIN_OCTAVE_SIDE = 8
KEYPOINT_HEADER = ("image_id", "x", "y", "scale", "contrast")


@dataclass(frozen=True)
class SiftParams:
    octaves: int = 4
    scales_per_octave: int = 3
    base_sigma: float = 1.6
    contrast_threshold: float = 0.03
    edge_ratio: float = 10.0
    density_sigma: float | None = None

    def __post_init__(self):
        if self.octaves < 1 or self.scales_per_octave < 2:
            raise ValueError("octaves must be >= 1 and scales_per_octave >= 2.")
        if min(self.base_sigma, self.contrast_threshold, self.edge_ratio) <= 0:
            raise ValueError("SIFT parameters must be positive.")
        if self.density_sigma is not None and self.density_sigma <= 0:
            raise ValueError("density_sigma must be positive.")


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    scale: float
    contrast: float


@dataclass(frozen=True, eq=False)
class DogPyramid:
    """Per octave, an array of shape (scales_per_octave + 1, h, w) of DoG planes."""

    octaves: tuple[np.ndarray, ...]
    sigmas: tuple[float, ...]
    params: SiftParams


def dog_pyramid(luma: np.ndarray, params: SiftParams | None = None) -> DogPyramid:
    params = params or SiftParams()
    luma = np.asarray(luma, dtype=np.float64)
    height, width = luma.shape
    if width < MIN_IMAGE_SIDE or height < MIN_IMAGE_SIDE:
        raise ImageTooSmall(width, height, MIN_IMAGE_SIDE)

    s = params.scales_per_octave
    k = 2.0 ** (1.0 / s)
    sigmas = tuple(params.base_sigma * k**i for i in range(s + 2))

    octaves = []
    base = luma
    for octave in range(params.octaves):
        if octave == 0:
            gaussians = [ndimage.gaussian_filter(base, sigma, mode="nearest") for sigma in sigmas]
        else:
            # The base already carries sigmas[0] of blur in this octave's frame.
            gaussians = [base] + [
                ndimage.gaussian_filter(base, np.sqrt(sigma**2 - sigmas[0] ** 2), mode="nearest")
                for sigma in sigmas[1:]
            ]
        stack = np.stack(gaussians)
        octaves.append(stack[1:] - stack[:-1])

        base = gaussians[s][::2, ::2]
        if min(base.shape) < MIN_OCTAVE_SIDE:
            break

    logger.debug("DoG pyramid with %d octaves for a %dx%d image", len(octaves), width, height)
    return DogPyramid(octaves=tuple(octaves), sigmas=sigmas, params=params)


def _refine(dog: np.ndarray, layer: int, y: int, x: int):
    d = dog
    v = d[layer, y, x]
    dx = (d[layer, y, x + 1] - d[layer, y, x - 1]) / 2.0
    dy = (d[layer, y + 1, x] - d[layer, y - 1, x]) / 2.0
    ds = (d[layer + 1, y, x] - d[layer - 1, y, x]) / 2.0
    dxx = d[layer, y, x + 1] + d[layer, y, x - 1] - 2.0 * v
    dyy = d[layer, y + 1, x] + d[layer, y - 1, x] - 2.0 * v
    dss = d[layer + 1, y, x] + d[layer - 1, y, x] - 2.0 * v
    dxy = (d[layer, y + 1, x + 1] - d[layer, y + 1, x - 1] - d[layer, y - 1, x + 1] + d[layer, y - 1, x - 1]) / 4.0
    dxs = (d[layer + 1, y, x + 1] - d[layer + 1, y, x - 1] - d[layer - 1, y, x + 1] + d[layer - 1, y, x - 1]) / 4.0
    dys = (d[layer + 1, y + 1, x] - d[layer + 1, y - 1, x] - d[layer - 1, y + 1, x] + d[layer - 1, y - 1, x]) / 4.0

    gradient = np.array([dx, dy, ds])
    hessian = np.array([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])
    try:
        offset = -np.linalg.solve(hessian, gradient)
    except np.linalg.LinAlgError:
        offset = np.zeros(3)
    offset = np.clip(offset, -0.5, 0.5)
    contrast = float(v + 0.5 * gradient.dot(offset))
    return offset, contrast, (dxx, dyy, dxy)


def passes_edge_test(dxx: float, dyy: float, dxy: float, edge_ratio: float) -> bool:
    trace = dxx + dyy
    det = dxx * dyy - dxy * dxy
    if det <= 0:
        return False
    return trace * trace * edge_ratio < (edge_ratio + 1.0) ** 2 * det


def detect_keypoints(dog: DogPyramid, params: SiftParams | None = None) -> list[Keypoint]:
    """
    3x3x3 scale-space extrema, refined by one quadratic step, with
    low-contrast and edge-like responses discarded.
    """
    params = params or dog.params
    s = params.scales_per_octave
    threshold = params.contrast_threshold
    keypoints: list[Keypoint] = []

    full_h, full_w = dog.octaves[0].shape[1:]
    for octave, planes in enumerate(dog.octaves):
        layers, height, width = planes.shape
        if height < 3 or width < 3:
            continue
        is_max = planes == ndimage.maximum_filter(planes, size=3, mode="nearest")
        is_min = planes == ndimage.minimum_filter(planes, size=3, mode="nearest")
        candidates = (is_max | is_min) & (np.abs(planes) > 0.5 * threshold)
        candidates[0] = candidates[-1] = False
        candidates[:, 0, :] = candidates[:, -1, :] = False
        candidates[:, :, 0] = candidates[:, :, -1] = False

        factor = 2.0**octave
        for layer, y, x in zip(*np.nonzero(candidates)):
            offset, contrast, (dxx, dyy, dxy) = _refine(planes, layer, y, x)
            if abs(contrast) < threshold:
                continue
            if not passes_edge_test(dxx, dyy, dxy, params.edge_ratio):
                continue
            kx = min(max((x + offset[0]) * factor, 0.0), full_w - 1.0)
            ky = min(max((y + offset[1]) * factor, 0.0), full_h - 1.0)
            scale = params.base_sigma * 2.0 ** (octave + (layer + offset[2] + 0.5) / s)
            keypoints.append(Keypoint(x=float(kx), y=float(ky), scale=float(scale), contrast=contrast))

    logger.debug("Detected %d keypoints", len(keypoints))
    return keypoints


def sift_density_channel(
    keypoints: Iterable[Keypoint],
    width: int,
    height: int,
    density_sigma: float | None = None,
) -> np.ndarray:
    if density_sigma is None:
        density_sigma = default_sigma(width, height)
    if density_sigma <= 0:
        raise ValueError("density_sigma must be positive")
    points = [(kp.x, kp.y) for kp in keypoints]
    if not points:
        return np.zeros((height, width), dtype=np.float64)
    return minmax_normalize(accumulate_gaussians(points, width, height, density_sigma))


def sift_channel(luma: np.ndarray, params: SiftParams | None = None) -> tuple[np.ndarray, list[Keypoint]]:
    params = params or SiftParams()
    height, width = luma.shape
    keypoints = detect_keypoints(dog_pyramid(luma, params), params)
    density = sift_density_channel(keypoints, width, height, params.density_sigma)
    return density, keypoints


def write_keypoints(rows: Iterable[tuple[str, Keypoint]], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(KEYPOINT_HEADER)
        for image_id, kp in rows:
            writer.writerow([image_id, repr(kp.x), repr(kp.y), repr(kp.scale), repr(kp.contrast)])
