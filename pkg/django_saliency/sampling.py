"""
Per-image selection of strongly salient and strongly non-salient pixels,
and the sample matrices built from them.
"""
from __future__ import annotations

import csv
import logging
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .core import (
    CHANNEL_COUNT,
    ChannelGroup,
    DimensionMismatch,
    FeatureStack,
    LabeledSample,
    SaliencyError,
    SaliencyMap,
    group_indices,
)

logger = logging.getLogger(__name__)

SAMPLE_MAGIC = b"SMPL"
SAMPLE_VERSION = 1
_SAMPLE_HEADER = struct.Struct("<4sHIH")
_SAMPLE_ROW = np.dtype([("features", "<f4", (CHANNEL_COUNT,)), ("label", "i1")])

SAMPLE_CSV_HEADER = ["image_id", "x", "y", "label"] + [f"f{i:02d}" for i in range(CHANNEL_COUNT)]


class EmptyInput(SaliencyError):
    pass


class SampleFileError(SaliencyError):
    pass


@dataclass(frozen=True)
class SamplingSpec:
    pos_per_image: int = 10
    neg_per_image: int = 10
    pos_percentile: float = 0.05
    neg_percentile: float = 0.30
    border_margin: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if self.pos_per_image < 0 or self.neg_per_image < 0:
            raise ValueError("Per-image sample counts must be >= 0.")
        if self.pos_percentile < 0 or self.neg_percentile < 0:
            raise ValueError("Percentiles must be >= 0.")
        if self.pos_percentile + self.neg_percentile > 1.0:
            raise ValueError("pos_percentile + neg_percentile must not exceed 1.")
        if self.border_margin < 0:
            raise ValueError("border_margin must be >= 0.")


@dataclass(frozen=True, eq=False)
class NormalizationStats:
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        mins = np.array(self.mins, dtype=np.float64)
        maxs = np.array(self.maxs, dtype=np.float64)
        if mins.shape != maxs.shape or mins.ndim != 1:
            raise DimensionMismatch("Normalizer bounds must be two vectors of equal length.")
        if np.any(mins > maxs):
            raise SaliencyError("Normalizer minimum exceeds maximum.")
        mins.flags.writeable = False
        maxs.flags.writeable = False
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)

    def __len__(self) -> int:
        return len(self.mins)


# Regions and draws


def percentile_regions(gt: SaliencyMap, spec: SamplingSpec) -> tuple[np.ndarray, np.ndarray]:
    """
    Boolean masks for the top ``pos_percentile`` and the bottom
    ``neg_percentile`` of pixels by ground-truth value. Ties go to the
    earlier pixel in row-major order; the two masks never overlap.
    """
    values = gt.values.ravel()
    total = values.size
    n_pos = int(np.floor(spec.pos_percentile * total))
    n_neg = int(np.floor(spec.neg_percentile * total))

    descending = np.argsort(-values, kind="stable")
    pos = np.zeros(total, dtype=bool)
    pos[descending[:n_pos]] = True

    ascending = np.argsort(values, kind="stable")
    ascending = ascending[~pos[ascending]]
    neg = np.zeros(total, dtype=bool)
    neg[ascending[:n_neg]] = True

    return pos.reshape(gt.values.shape), neg.reshape(gt.values.shape)


def _near(mask: np.ndarray, margin: int) -> np.ndarray:
    """Pixels within Chebyshev distance ``margin`` of any pixel of ``mask``."""
    if margin == 0:
        return mask.copy()
    grown = ndimage.maximum_filter(mask.astype(np.uint8), size=2 * margin + 1, mode="constant", cval=0)
    return grown > 0


def eligible_pixels(own: np.ndarray, opposite: np.ndarray, margin: int) -> np.ndarray:
    height, width = own.shape
    inside = np.zeros_like(own, dtype=bool)
    if width > 2 * margin and height > 2 * margin:
        inside[margin : height - margin, margin : width - margin] = True
    return own & inside & ~_near(opposite, margin)


def image_rng(spec: SamplingSpec, image_id: str) -> np.random.Generator:
    return np.random.default_rng([spec.rng_seed, zlib.crc32(image_id.encode("utf-8"))])


def draw_samples(
    stack: FeatureStack,
    pos_mask: np.ndarray,
    neg_mask: np.ndarray,
    spec: SamplingSpec,
    image_id: str = "",
) -> list[LabeledSample]:
    shape = (stack.height, stack.width)
    if pos_mask.shape != shape or neg_mask.shape != shape:
        raise DimensionMismatch(
            f"Masks of shape {pos_mask.shape} do not match a {stack.width}x{stack.height} stack."
        )

    rng = image_rng(spec, image_id)
    samples: list[LabeledSample] = []
    for label, own, opposite, wanted in (
        (1, pos_mask, neg_mask, spec.pos_per_image),
        (-1, neg_mask, pos_mask, spec.neg_per_image),
    ):
        candidates = np.flatnonzero(eligible_pixels(own, opposite, spec.border_margin))
        if len(candidates) < wanted:
            logger.warning(
                "Image '%s' has %d eligible %s pixels, %d requested",
                image_id,
                len(candidates),
                "positive" if label == 1 else "negative",
                wanted,
            )
        take = min(wanted, len(candidates))
        chosen = np.sort(rng.choice(candidates, size=take, replace=False)) if take else candidates[:0]
        for flat in chosen:
            y, x = divmod(int(flat), stack.width)
            samples.append(
                LabeledSample(features=stack.vector(x, y), label=label, image_id=image_id, x=x, y=y)
            )
    return samples


def sample_image(
    stack: FeatureStack,
    gt: SaliencyMap,
    spec: SamplingSpec,
    image_id: str = "",
) -> list[LabeledSample]:
    if (gt.height, gt.width) != (stack.height, stack.width):
        raise DimensionMismatch(
            f"Ground truth for '{image_id}' is {gt.width}x{gt.height}, "
            f"stack is {stack.width}x{stack.height}."
        )
    pos, neg = percentile_regions(gt, spec)
    return draw_samples(stack, pos, neg, spec, image_id=image_id)


# Matrices


def assemble_matrix(samples: Sequence[LabeledSample]) -> tuple[np.ndarray, np.ndarray]:
    if not samples:
        raise EmptyInput("No samples to assemble.")
    matrix = np.vstack([s.features for s in samples]).astype(np.float64)
    labels = np.array([s.label for s in samples], dtype=np.int64)
    return matrix, labels


def fit_normalizer(matrix: np.ndarray) -> NormalizationStats:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or len(matrix) == 0:
        raise EmptyInput("Cannot fit a normalizer on an empty matrix.")
    return NormalizationStats(mins=matrix.min(axis=0), maxs=matrix.max(axis=0))


def apply_normalizer(stats: NormalizationStats, matrix: np.ndarray) -> np.ndarray:
    """Map each column so training min -> 0 and max -> 1, clamped; constant columns become 0."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape[-1] != len(stats):
        raise DimensionMismatch(
            f"Matrix has {matrix.shape[-1]} columns, normalizer expects {len(stats)}."
        )
    span = stats.maxs - stats.mins
    flat = span <= 0
    safe = np.where(flat, 1.0, span)
    out = np.clip((matrix - stats.mins) / safe, 0.0, 1.0)
    out[..., flat] = 0.0
    return out


def ablate_groups(matrix: np.ndarray, groups: Iterable[ChannelGroup | str]) -> np.ndarray:
    """Copy of ``matrix`` with every column of the named channel groups zeroed."""
    out = np.array(matrix, dtype=np.float64, copy=True)
    for group in groups:
        out[..., group_indices(group)] = 0.0
    return out


# Files


def write_samples(matrix: np.ndarray, labels: np.ndarray, path: Path | str) -> None:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[1] != CHANNEL_COUNT:
        raise DimensionMismatch(f"Sample matrix must be n x {CHANNEL_COUNT}.")
    rows = np.zeros(len(matrix), dtype=_SAMPLE_ROW)
    rows["features"] = matrix
    rows["label"] = labels
    with open(path, "wb") as fh:
        fh.write(_SAMPLE_HEADER.pack(SAMPLE_MAGIC, SAMPLE_VERSION, len(matrix), CHANNEL_COUNT))
        fh.write(rows.tobytes())


def read_samples(path: Path | str) -> tuple[np.ndarray, np.ndarray]:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _SAMPLE_HEADER.size:
        raise SampleFileError(f"{path} is truncated.")
    magic, version, count, channels = _SAMPLE_HEADER.unpack_from(data)
    if magic != SAMPLE_MAGIC:
        raise SampleFileError(f"{path} is not a sample file.")
    if version != SAMPLE_VERSION:
        raise SampleFileError(f"{path} has unsupported sample version {version}.")
    if channels != CHANNEL_COUNT:
        raise SampleFileError(f"{path} holds {channels} channels, expected {CHANNEL_COUNT}.")
    payload = data[_SAMPLE_HEADER.size :]
    if len(payload) != count * _SAMPLE_ROW.itemsize:
        raise SampleFileError(f"{path} payload does not match its row count {count}.")
    rows = np.frombuffer(payload, dtype=_SAMPLE_ROW)
    return rows["features"].astype(np.float64), rows["label"].astype(np.int64)


def write_samples_csv(samples: Iterable[LabeledSample], path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SAMPLE_CSV_HEADER)
        for s in samples:
            writer.writerow(
                [s.image_id, s.x, s.y, f"{s.label:+d}"] + [repr(float(v)) for v in s.features]
            )
