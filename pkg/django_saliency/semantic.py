from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .core import DimensionMismatch, RgbImage

logger = logging.getLogger(__name__)

HORIZON_MIN_SIDE = 64
HORIZON_BAND = 0.05
HORIZON_SEARCH = 0.6


@dataclass(frozen=True)
class HorizonEstimate:
    row: float
    confidence: float


def estimate_horizon(img: RgbImage) -> HorizonEstimate:
    """
    Row with the largest mean horizontal-edge energy inside the middle 60%
    of the image height. Confidence is how far that row stands above the
    band average, 0 when the band carries no edges.
    """
    img.require(HORIZON_MIN_SIDE)
    height = img.height
    edges = ndimage.sobel(img.luma(), axis=0, mode="nearest")
    row_energy = (edges**2).mean(axis=1)

    margin = (1.0 - HORIZON_SEARCH) / 2.0
    first = int(np.floor(margin * height))
    last = int(np.ceil((1.0 - margin) * height))
    band = row_energy[first:last]

    peak = float(band.max())
    if peak <= 0.0:
        return HorizonEstimate(row=(height - 1) / 2.0, confidence=0.0)
    row = first + int(np.argmax(band))
    confidence = (peak - float(band.mean())) / peak
    return HorizonEstimate(row=float(row), confidence=min(max(confidence, 0.0), 1.0))


def horizon_band(row: float, width: int, height: int) -> np.ndarray:
    sigma = HORIZON_BAND * height
    ys = np.arange(height, dtype=np.float64)
    column = np.exp(-((ys - row) ** 2) / (2.0 * sigma * sigma))
    return np.repeat(column[:, None], width, axis=1)


def horizon_channel(img: RgbImage, override_row: float | None = None) -> np.ndarray:
    """Soft band around the horizon row; an externally supplied row wins over the estimate."""
    img.require(HORIZON_MIN_SIDE)
    if override_row is None:
        row = estimate_horizon(img).row
    else:
        if not 0 <= override_row < img.height:
            raise DimensionMismatch(
                f"Horizon row {override_row} is outside an image of height {img.height}."
            )
        row = float(override_row)
    return horizon_band(row, img.width, img.height)


def detector_channels(
    width: int,
    height: int,
    face: np.ndarray | None = None,
    person: np.ndarray | None = None,
    car: np.ndarray | None = None,
) -> np.ndarray:
    """Face, person and car planes; a missing map becomes a zero plane."""
    planes = []
    for name, plane in (("face", face), ("person", person), ("car", car)):
        if plane is None:
            planes.append(np.zeros((height, width), dtype=np.float64))
            continue
        plane = np.asarray(plane, dtype=np.float64)
        if plane.shape != (height, width):
            raise DimensionMismatch(
                f"{name} map is {plane.shape[1]}x{plane.shape[0]}, expected {width}x{height}."
            )
        if plane.min() < 0.0 or plane.max() > 1.0:
            logger.warning("Clamping %s detector map into [0, 1]", name)
            plane = np.clip(plane, 0.0, 1.0)
        planes.append(plane)
    return np.stack(planes)


def center_channel(width: int, height: int) -> np.ndarray:
    """1 at the image centre falling linearly to 0 at the farthest corner."""
    if width < 1 or height < 1:
        raise DimensionMismatch("Image dimensions must be positive.")
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0
    d_max = np.hypot(cy, cx)
    if d_max == 0:
        return np.ones((height, width), dtype=np.float64)
    # |x - cx| keeps the plane exactly mirror-symmetric.
    dx = np.abs(np.arange(width, dtype=np.float64) - cx)
    dy = np.abs(np.arange(height, dtype=np.float64) - cy)
    dist = np.hypot(dy[:, None], dx[None, :])
    return np.clip(1.0 - dist / d_max, 0.0, 1.0)
