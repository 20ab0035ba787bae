"""
Run configuration: package defaults, overridden by ``settings.SALIENCY``,
then by a ``key = value`` config file, then by command-line flags.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

from .conf import get_setting
from .core import ChannelGroup, SaliencyError
from .dataset import SplitSpec
from .evaluation import CvSpec
from .learners import BoostParams, KnnParams, NbParams, SvmParams, TreeParams
from .sampling import SamplingSpec
from .sift import SiftParams
from .workers import resolve_jobs

logger = logging.getLogger(__name__)


class ConfigError(SaliencyError):
    pass


def _optional_float(text: str) -> float | None:
    if text.strip().lower() in ("", "none"):
        return None
    return float(text)


def _optional_path(text: str) -> str | None:
    text = text.strip()
    return text or None


def _optional_int(text: str) -> int | None:
    if text.strip().lower() in ("", "none"):
        return None
    return int(text)


def _boolean(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _groups(text: str) -> tuple[str, ...]:
    names = tuple(part.strip() for part in text.split(",") if part.strip())
    for name in names:
        ChannelGroup(name)
    return names


PARSERS: dict[str, Callable[[str], Any]] = {
    "manifest": _optional_path,
    "out": _optional_path,
    "seed": int,
    "jobs": _optional_int,
    "gt_sigma": _optional_float,
    "train_fraction": float,
    "pos_per_image": int,
    "neg_per_image": int,
    "pos_percentile": float,
    "neg_percentile": float,
    "border_margin": int,
    "sift_octaves": int,
    "sift_scales": int,
    "sift_base_sigma": float,
    "sift_contrast_threshold": float,
    "sift_edge_ratio": float,
    "svm_gamma": float,
    "svm_cost": float,
    "svm_tolerance": float,
    "svm_max_passes": int,
    "tree_min_leaf": int,
    "tree_confidence": float,
    "knn_k": int,
    "nb_window": float,
    "nb_points": int,
    "boost_rounds": int,
    "cv_folds": int,
    "predict_stride": int,
    "horizon_file": _optional_path,
    "exclude_groups": _groups,
    "log_runs": _boolean,
}

PATH_KEYS = ("manifest", "out", "horizon_file")


def stage_seed(seed: int, stage: str) -> int:
    """Independent per-stage seed: first 8 bytes of sha256("seed:stage"), little-endian."""
    digest = hashlib.sha256(f"{seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def parse_config_text(text: str, base: Path | None = None, source: str = "<config>") -> dict[str, Any]:
    values: dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: expected 'key = value', got {raw.strip()!r}.")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if key not in PARSERS:
            raise ConfigError(f"{source}:{number}: unknown key {key!r}.")
        try:
            parsed = PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{number}: bad value for {key!r}: {exc}") from exc
        if key in PATH_KEYS and parsed is not None and base is not None and not Path(parsed).is_absolute():
            parsed = str(base / parsed)
        values[key] = parsed
    return values


def load_config_file(path: Path | str) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read config file {path}: {exc}") from exc
    return parse_config_text(text, base=path.parent, source=str(path))


@dataclass(frozen=True)
class RunConfig:
    manifest: Path | None
    out: Path
    seed: int = 0
    jobs: int = 1
    gt_sigma: float | None = None
    split: SplitSpec = field(default_factory=SplitSpec)
    sampling: SamplingSpec = field(default_factory=SamplingSpec)
    sift: SiftParams = field(default_factory=SiftParams)
    svm: SvmParams = field(default_factory=SvmParams)
    tree: TreeParams = field(default_factory=TreeParams)
    knn: KnnParams = field(default_factory=KnnParams)
    nb: NbParams = field(default_factory=NbParams)
    boost: BoostParams = field(default_factory=BoostParams)
    cv: CvSpec = field(default_factory=CvSpec)
    predict_stride: int = 1
    horizon_file: Path | None = None
    exclude_groups: tuple[str, ...] = ()
    log_runs: bool = True

    def params_for(self, method: str):
        return {
            "svm": self.svm,
            "c45": self.tree,
            "knn": self.knn,
            "nb": self.nb,
            "adaboost": self.boost,
        }[method]


def _settings_values() -> dict[str, Any]:
    return {key: get_setting(key.upper()) for key in PARSERS}


def build_run_config(values: Mapping[str, Any]) -> RunConfig:
    v = dict(values)
    seed = int(v["seed"])
    svm = SvmParams(
        gamma=float(v["svm_gamma"]),
        cost=float(v["svm_cost"]),
        smo_tolerance=float(v["svm_tolerance"]),
        max_passes=int(v["svm_max_passes"]),
    )
    if not v.get("out"):
        raise ConfigError("An output directory is required.")
    if int(v["predict_stride"]) < 1:
        raise ConfigError("predict_stride must be >= 1.")
    for name in v.get("exclude_groups") or ():
        try:
            ChannelGroup(name)
        except ValueError as exc:
            raise ConfigError(f"Unknown channel group {name!r}.") from exc

    return RunConfig(
        manifest=Path(v["manifest"]) if v.get("manifest") else None,
        out=Path(v["out"]),
        seed=seed,
        jobs=resolve_jobs(v.get("jobs")),
        gt_sigma=v.get("gt_sigma"),
        split=SplitSpec(train_fraction=float(v["train_fraction"]), rng_seed=stage_seed(seed, "split")),
        sampling=SamplingSpec(
            pos_per_image=int(v["pos_per_image"]),
            neg_per_image=int(v["neg_per_image"]),
            pos_percentile=float(v["pos_percentile"]),
            neg_percentile=float(v["neg_percentile"]),
            border_margin=int(v["border_margin"]),
            rng_seed=stage_seed(seed, "sample"),
        ),
        sift=SiftParams(
            octaves=int(v["sift_octaves"]),
            scales_per_octave=int(v["sift_scales"]),
            base_sigma=float(v["sift_base_sigma"]),
            contrast_threshold=float(v["sift_contrast_threshold"]),
            edge_ratio=float(v["sift_edge_ratio"]),
        ),
        svm=svm,
        tree=TreeParams(min_leaf=int(v["tree_min_leaf"]), confidence=float(v["tree_confidence"])),
        knn=KnnParams(k=int(v["knn_k"])),
        nb=NbParams(loess_window=float(v["nb_window"]), loess_points=int(v["nb_points"])),
        boost=BoostParams(rounds=int(v["boost_rounds"]), base=svm, rng_seed=stage_seed(seed, "boost")),
        cv=CvSpec(folds=int(v["cv_folds"]), rng_seed=stage_seed(seed, "cv")),
        predict_stride=int(v["predict_stride"]),
        horizon_file=Path(v["horizon_file"]) if v.get("horizon_file") else None,
        exclude_groups=tuple(v.get("exclude_groups") or ()),
        log_runs=bool(v["log_runs"]),
    )


def load_run_config(config_path: Path | str | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """
    Resolve a RunConfig. ``overrides`` holds command-line values keyed like
    the config file; ``None`` entries are ignored.
    """
    values = _settings_values()
    if config_path:
        values.update(load_config_file(config_path))
    for key, value in (overrides or {}).items():
        if key not in PARSERS:
            raise ConfigError(f"Unknown configuration key {key!r}.")
        if value is not None:
            values[key] = value
    try:
        config = build_run_config(values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Invalid configuration: {exc}") from exc
    for name in ("manifest", "horizon_file"):
        path = getattr(config, name)
        if path is not None and not path.exists():
            raise ConfigError(f"{name} not found: {path}")
    logger.debug("Resolved run config: %s", config)
    return config

