from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

CHANNEL_COUNT = 34
MIN_IMAGE_SIDE = 32

# Ranges narrower than this are treated as constant maps.
FLAT_TOLERANCE = 1e-10


class SaliencyError(Exception):
    pass


class ImageTooSmall(SaliencyError):
    def __init__(self, width: int, height: int, minimum: int):
        self.width = width
        self.height = height
        self.minimum = minimum
        super().__init__(
            f"Image is {width}x{height}; at least {minimum}x{minimum} is required."
        )


class DimensionMismatch(SaliencyError):
    pass


class SingleClassInput(SaliencyError):
    pass


class ChannelGroup(str, enum.Enum):
    PYRAMID = "pyramid"
    ITTI = "itti"
    COLOR = "color"
    COLORHIST = "colorhist"
    HORIZON = "horizon"
    DETECTOR = "detector"
    CENTER = "center"
    SIFT = "sift"


@dataclass(frozen=True)
class ChannelId:
    index: int
    group: ChannelGroup


def _build_registry() -> tuple[tuple[ChannelId, str], ...]:
    names: list[tuple[ChannelGroup, str]] = []
    for scale in range(3):
        for degrees in (0, 45, 90, 135):
            names.append((ChannelGroup.PYRAMID, f"pyramid_s{scale}_o{degrees}"))
    names.append((ChannelGroup.PYRAMID, "pyramid_lowpass"))
    for name in ("intensity", "color", "orientation"):
        names.append((ChannelGroup.ITTI, f"itti_{name}"))
    for name in ("red", "green", "blue"):
        names.append((ChannelGroup.COLOR, name))
    for name in ("red", "green", "blue"):
        names.append((ChannelGroup.COLOR, f"p_{name}"))
    for radius in (1, 2, 4, 8, 16, 32):
        names.append((ChannelGroup.COLORHIST, f"colorhist_m{radius}"))
    names.append((ChannelGroup.HORIZON, "horizon"))
    for name in ("face", "person", "car"):
        names.append((ChannelGroup.DETECTOR, name))
    names.append((ChannelGroup.CENTER, "center"))
    names.append((ChannelGroup.SIFT, "sift_density"))

    assert len(names) == CHANNEL_COUNT
    return tuple(
        (ChannelId(index, group), name) for index, (group, name) in enumerate(names)
    )


_REGISTRY = _build_registry()


def channel_registry() -> list[tuple[ChannelId, str]]:
    """Return the 34 feature channels in their fixed storage order."""
    return list(_REGISTRY)


def group_indices(group: ChannelGroup | str) -> list[int]:
    group = ChannelGroup(group)
    return [channel.index for channel, _name in _REGISTRY if channel.group is group]


def minmax_normalize(plane: np.ndarray) -> np.ndarray:
    """Scale a plane to [0, 1]; constant planes map to all zeros."""
    plane = np.asarray(plane, dtype=np.float64)
    lo = float(plane.min())
    hi = float(plane.max())
    if hi - lo <= FLAT_TOLERANCE:
        return np.zeros_like(plane)
    return (plane - lo) / (hi - lo)


def accumulate_gaussians(
    points,
    width: int,
    height: int,
    sigma: float,
    truncate: float | None = 3.0,
) -> np.ndarray:
    """
    Sum of unnormalized isotropic Gaussians exp(-d^2 / 2 sigma^2) centred at
    each (x, y) point. With ``truncate`` set, each kernel is cut to zero
    beyond ``truncate * sigma``; ``None`` evaluates the full plane.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")

    out = np.zeros((height, width), dtype=np.float64)
    two_var = 2.0 * sigma * sigma
    for x, y in points:
        if truncate is None:
            x0, x1, y0, y1 = 0, width - 1, 0, height - 1
        else:
            reach = truncate * sigma
            x0 = max(int(np.ceil(x - reach)), 0)
            x1 = min(int(np.floor(x + reach)), width - 1)
            y0 = max(int(np.ceil(y - reach)), 0)
            y1 = min(int(np.floor(y + reach)), height - 1)
            if x0 > x1 or y0 > y1:
                continue

        dx = np.arange(x0, x1 + 1, dtype=np.float64) - x
        dy = np.arange(y0, y1 + 1, dtype=np.float64) - y
        dist2 = dy[:, None] ** 2 + dx[None, :] ** 2
        window = np.exp(-dist2 / two_var)
        if truncate is not None:
            window[dist2 > (truncate * sigma) ** 2] = 0.0
        out[y0 : y1 + 1, x0 : x1 + 1] += window
    return out


def default_sigma(width: int, height: int) -> float:
    return 0.02 * max(width, height)


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class RgbImage:
    """An RGB image with float channels in [0, 1], stored as (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise DimensionMismatch(
                f"RGB pixels must have shape (height, width, 3), got {pixels.shape}."
            )
        height, width = pixels.shape[:2]
        if width < MIN_IMAGE_SIDE or height < MIN_IMAGE_SIDE:
            raise ImageTooSmall(width, height, MIN_IMAGE_SIDE)
        if not np.all(np.isfinite(pixels)) or pixels.min() < 0.0 or pixels.max() > 1.0:
            raise SaliencyError("RGB channel values must lie in [0, 1].")
        object.__setattr__(self, "pixels", _frozen(pixels))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def luma(self) -> np.ndarray:
        r, g, b = self.pixels[..., 0], self.pixels[..., 1], self.pixels[..., 2]
        return 0.299 * r + 0.587 * g + 0.114 * b

    def require(self, minimum: int) -> None:
        if self.width < minimum or self.height < minimum:
            raise ImageTooSmall(self.width, self.height, minimum)


@dataclass(frozen=True)
class FixationRecord:
    observer_id: int
    x: float
    y: float
    # Row text as read from disk; written back unchanged.
    source: str | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class FixationSet:
    image_id: str
    records: tuple[FixationRecord, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.records)

    def points(self) -> list[tuple[float, float]]:
        return [(r.x, r.y) for r in self.records]


@dataclass(frozen=True, eq=False)
class SaliencyMap:
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise DimensionMismatch("Saliency map values must be a 2-D plane.")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def normalized(self) -> "SaliencyMap":
        return SaliencyMap(minmax_normalize(self.values))


@dataclass(frozen=True, eq=False)
class FeatureStack:
    """Per-pixel feature planes of one image, shape (34, height, width)."""

    channels: np.ndarray

    def __post_init__(self):
        channels = np.asarray(self.channels)
        if channels.ndim != 3 or channels.shape[0] != CHANNEL_COUNT:
            raise DimensionMismatch(
                f"Feature stack must hold {CHANNEL_COUNT} planes, got shape {channels.shape}."
            )
        if not np.all(np.isfinite(channels)):
            raise SaliencyError("Feature stack contains NaN or infinite values.")
        object.__setattr__(self, "channels", _frozen(channels))

    @property
    def width(self) -> int:
        return self.channels.shape[2]

    @property
    def height(self) -> int:
        return self.channels.shape[1]

    def vector(self, x: int, y: int) -> np.ndarray:
        return np.array(self.channels[:, y, x])


@dataclass(frozen=True, eq=False)
class LabeledSample:
    features: np.ndarray
    label: int
    image_id: str
    x: int
    y: int

    def __post_init__(self):
        if self.label not in (1, -1):
            raise SaliencyError(f"Sample label must be +1 or -1, got {self.label!r}.")
        features = np.asarray(self.features, dtype=np.float64)
        if not np.all(np.isfinite(features)):
            raise SaliencyError("Sample features must be finite.")
        object.__setattr__(self, "features", _frozen(features))
