from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .core import (
    DimensionMismatch,
    FixationRecord,
    FixationSet,
    RgbImage,
    SaliencyError,
    SaliencyMap,
    accumulate_gaussians,
    default_sigma,
    minmax_normalize,
)

logger = logging.getLogger(__name__)

FIXATION_HEADER = "observer_id,x,y"
CHANNEL_MAGIC = "CHAN"
DETECTOR_CHANNELS = ("face", "person", "car")


class FixationFormatError(SaliencyError):
    pass


class MalformedLine(FixationFormatError):
    def __init__(self, line_number: int, text: str):
        self.line_number = line_number
        super().__init__(f"Malformed fixation line {line_number}: {text!r}")


class FixationOutOfBounds(FixationFormatError):
    def __init__(self, record: FixationRecord, width: int, height: int):
        self.record = record
        super().__init__(
            f"Fixation ({record.x}, {record.y}) of observer {record.observer_id} "
            f"lies outside the {width}x{height} image."
        )


class EmptyFixationFile(FixationFormatError):
    pass


class EmptyFixations(SaliencyError):
    pass


class ChannelMapError(SaliencyError):
    pass


class MalformedHeader(ChannelMapError):
    pass


class MissingChannel(ChannelMapError):
    def __init__(self, channel: str, path: Path | str):
        self.channel = channel
        self.path = path
        super().__init__(f"Channel '{channel}' is declared but {path} does not exist.")


class CorpusError(SaliencyError):
    pass


class ImageReadError(SaliencyError):
    pass


@dataclass(frozen=True)
class CorpusEntry:
    image_id: str
    image_path: Path
    fixation_path: Path
    face_path: Path | None = None
    person_path: Path | None = None
    car_path: Path | None = None

    def detector_paths(self) -> dict[str, Path | None]:
        return {
            "face": self.face_path,
            "person": self.person_path,
            "car": self.car_path,
        }


@dataclass(frozen=True)
class Corpus:
    entries: tuple[CorpusEntry, ...]

    def __post_init__(self):
        ids = [entry.image_id for entry in self.entries]
        if len(ids) != len(set(ids)):
            raise CorpusError("Image ids in a corpus must be unique.")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def ids(self) -> list[str]:
        return [entry.image_id for entry in self.entries]


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1.")


# Fixations


def parse_fixations(
    text: str,
    image_id: str = "",
    width: int | None = None,
    height: int | None = None,
) -> FixationSet:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].strip() != FIXATION_HEADER:
        if not lines or not "".join(lines).strip():
            raise EmptyFixationFile(f"Fixation file for '{image_id}' is empty.")
        raise MalformedLine(1, lines[0])

    records: list[FixationRecord] = []
    for number, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise MalformedLine(number, line)
        try:
            record = FixationRecord(int(parts[0]), float(parts[1]), float(parts[2]), source=line)
        except ValueError:
            raise MalformedLine(number, line)
        if not (math.isfinite(record.x) and math.isfinite(record.y)):
            raise MalformedLine(number, line)
        if width is not None and height is not None:
            if not (0 <= record.x < width and 0 <= record.y < height):
                raise FixationOutOfBounds(record, width, height)
        records.append(record)

    if not records:
        raise EmptyFixationFile(f"Fixation file for '{image_id}' holds no records.")
    return FixationSet(image_id=image_id, records=tuple(records))


def load_fixations(
    path: Path | str,
    width: int | None = None,
    height: int | None = None,
    image_id: str | None = None,
) -> FixationSet:
    """
    Read a fixation CSV (``observer_id,x,y``). When the image size is given,
    records outside the image are rejected with FixationOutOfBounds.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        text = fh.read()
    return parse_fixations(text, image_id or path.stem, width, height)


def serialize_fixations(fixations: FixationSet) -> str:
    lines = [FIXATION_HEADER]
    for record in fixations.records:
        if record.source is not None:
            lines.append(record.source)
        else:
            lines.append(f"{record.observer_id},{record.x!r},{record.y!r}")
    return "\n".join(lines) + "\n"


def write_fixations(fixations: FixationSet, path: Path | str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(serialize_fixations(fixations))


def ground_truth_map(
    fixations: FixationSet,
    width: int,
    height: int,
    sigma: float | None = None,
) -> SaliencyMap:
    """
    Continuous saliency map: one isotropic Gaussian per fixation (cut at 3 sigma),
    summed over all observers and min-max normalized.
    """
    if not fixations.records:
        raise EmptyFixations(f"No fixations for image '{fixations.image_id}'.")
    if sigma is None:
        sigma = default_sigma(width, height)
    if sigma <= 0:
        raise ValueError("sigma must be positive")

    raw = accumulate_gaussians(fixations.points(), width, height, sigma)
    return SaliencyMap(minmax_normalize(raw))


# Corpus


def _resolve(base: Path, value: str) -> Path | None:
    value = (value or "").strip()
    if not value:
        return None
    path = Path(value)
    if not path.is_absolute():
        path = base / path
    return path


def load_manifest(path: Path | str) -> Corpus:
    """Read ``image_id,image_path,fixation_path[,face_path,person_path,car_path]``."""
    path = Path(path)
    base = path.parent
    entries: list[CorpusEntry] = []

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or [h.strip() for h in header[:3]] != [
            "image_id",
            "image_path",
            "fixation_path",
        ]:
            raise CorpusError(f"{path} is missing the manifest header.")

        for number, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) < 3:
                raise CorpusError(f"{path}:{number}: expected at least 3 columns.")
            row = row + [""] * (6 - len(row))
            entry = CorpusEntry(
                image_id=row[0].strip(),
                image_path=_resolve(base, row[1]),
                fixation_path=_resolve(base, row[2]),
                face_path=_resolve(base, row[3]),
                person_path=_resolve(base, row[4]),
                car_path=_resolve(base, row[5]),
            )
            if not entry.fixation_path or not entry.fixation_path.exists():
                raise CorpusError(
                    f"Fixation file for '{entry.image_id}' not found: {entry.fixation_path}"
                )
            entries.append(entry)

    if not entries:
        raise CorpusError(f"{path} lists no images.")
    return Corpus(tuple(entries))


def split_corpus(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus]:
    """Shuffle image ids with a seeded PRNG and take the first round(N * f) for training."""
    n = len(corpus)
    if n == 0:
        raise CorpusError("Cannot split an empty corpus.")

    n_train = int(math.floor(n * spec.train_fraction + 0.5))
    order = np.random.default_rng(spec.rng_seed).permutation(n)
    train_idx = set(int(i) for i in order[:n_train])

    train = tuple(e for i, e in enumerate(corpus.entries) if i in train_idx)
    test = tuple(e for i, e in enumerate(corpus.entries) if i not in train_idx)
    return Corpus(train), Corpus(test)


# Images and channel maps


def load_image(path: Path | str) -> RgbImage:
    try:
        with Image.open(path) as img:
            rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
    except (OSError, UnidentifiedImageError) as exc:
        raise ImageReadError(f"Cannot decode image {path}: {exc}") from exc
    return RgbImage(rgb / 255.0)


def image_size(path: Path | str) -> tuple[int, int]:
    """(width, height) from the image header, without decoding pixels."""
    try:
        with Image.open(path) as img:
            return img.size
    except (OSError, UnidentifiedImageError) as exc:
        raise ImageReadError(f"Cannot decode image {path}: {exc}") from exc


def write_map_png(values: np.ndarray, path: Path | str) -> None:
    """Write a [0, 1] map as 8-bit grayscale, value = round(255 * v)."""
    scaled = np.rint(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(scaled).save(path, format="PNG")


def parse_channel_map(text: str, width: int, height: int, source: str = "") -> np.ndarray:
    header, _, body = text.partition("\n")
    parts = header.split()
    if len(parts) != 3 or parts[0] != CHANNEL_MAGIC:
        raise MalformedHeader(f"{source or 'channel map'}: bad header {header!r}")
    try:
        file_width, file_height = int(parts[1]), int(parts[2])
    except ValueError:
        raise MalformedHeader(f"{source or 'channel map'}: bad header {header!r}")
    if (file_width, file_height) != (width, height):
        raise DimensionMismatch(
            f"{source or 'channel map'} is {file_width}x{file_height}, "
            f"expected {width}x{height}."
        )

    tokens = body.split()
    if len(tokens) != width * height:
        raise DimensionMismatch(
            f"{source or 'channel map'} holds {len(tokens)} values, "
            f"expected {width * height}."
        )
    try:
        plane = np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError as exc:
        raise ChannelMapError(f"{source or 'channel map'}: {exc}") from exc
    if not np.all(np.isfinite(plane)):
        raise ChannelMapError(f"{source or 'channel map'} contains non-finite values.")
    return plane.reshape(height, width)


def clamp_unit(plane: np.ndarray, name: str = "channel") -> np.ndarray:
    if plane.size and (plane.min() < 0.0 or plane.max() > 1.0):
        logger.warning(
            "Clamping %s values outside [0, 1] (min %.4g, max %.4g)",
            name,
            plane.min(),
            plane.max(),
        )
        plane = np.clip(plane, 0.0, 1.0)
    return plane


def load_channel_map(
    path: Path | str,
    width: int,
    height: int,
    channel: str = "channel",
) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise MissingChannel(channel, path)
    with open(path, "r", encoding="ascii") as fh:
        text = fh.read()
    plane = parse_channel_map(text, width, height, source=str(path))
    return clamp_unit(plane, channel)


def serialize_channel_map(plane: np.ndarray) -> str:
    height, width = plane.shape
    out = io.StringIO()
    out.write(f"{CHANNEL_MAGIC} {width} {height}\n")
    for row in plane:
        out.write(" ".join(repr(float(v)) for v in row))
        out.write("\n")
    return out.getvalue()


def write_channel_map(plane: np.ndarray, path: Path | str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(serialize_channel_map(np.asarray(plane, dtype=np.float64)))


def load_detector_maps(entry: CorpusEntry, width: int, height: int) -> dict[str, np.ndarray | None]:
    """
    Load the face/person/car maps declared for an entry. Undeclared channels
    come back as None; a declared channel whose file is missing raises
    MissingChannel.
    """
    maps: dict[str, np.ndarray | None] = {}
    for name, path in entry.detector_paths().items():
        if path is None:
            logger.warning(
                "No %s channel for image '%s'; using an all-zero plane",
                name,
                entry.image_id,
            )
            maps[name] = None
            continue
        maps[name] = load_channel_map(path, width, height, channel=name)
    return maps


def load_horizon_overrides(path: Path | str) -> dict[str, float]:
    """Read ``image_id,horizon_row`` into a dict."""
    overrides: dict[str, float] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"image_id", "horizon_row"} <= set(reader.fieldnames):
            raise CorpusError(f"{path} must have the header image_id,horizon_row.")
        for row in reader:
            try:
                overrides[row["image_id"].strip()] = float(row["horizon_row"])
            except (TypeError, ValueError):
                raise CorpusError(f"{path}: bad horizon row for {row.get('image_id')!r}")
    return overrides
