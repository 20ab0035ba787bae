"""
Stage runner behind the management commands. Every stage reads and writes
files under the run's output directory:

    stacks/<id>.fstk                 feature stacks
    keypoints.csv                    optional keypoint dump
    gt/<id>.chan, gt/<id>.png        ground-truth maps
    samples/{train,test}.{smpl,csv}  sample matrices, plus split.csv
    models/<method>.smdl             trained models
    eval/metrics_<protocol>.csv      comparison table, ROC SVG and CSV
    maps/<method>/<id>.png           predicted saliency maps

Outputs that depend on settings carry a ``<name>.sha256`` sidecar holding the
fingerprint of those settings; a mismatch marks the output stale.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import CHANNEL_COUNT, SaliencyError, SaliencyMap
from .dataset import (
    Corpus,
    ground_truth_map,
    image_size,
    load_channel_map,
    load_detector_maps,
    load_fixations,
    load_horizon_overrides,
    load_image,
    load_manifest,
    split_corpus,
    write_channel_map,
    write_map_png,
)
from .evaluation import EvalReport, compare_report, evaluate_model, kfold_cv, predict_map
from .features import build_feature_stack, load_stack, save_stack
from .learners import LearnerSpec, TrainedModel, fit_model, load_model, save_model
from .runconfig import ConfigError, RunConfig
from .sampling import (
    ablate_groups,
    assemble_matrix,
    read_samples,
    sample_image,
    write_samples,
    write_samples_csv,
)
from .sift import sift_channel, write_keypoints
from .workers import parallel_map

logger = logging.getLogger(__name__)

PROTOCOLS = ("cv", "holdout")


class MissingUpstream(SaliencyError):
    def __init__(self, artifact: Path, producer: str):
        self.artifact = artifact
        self.producer = producer
        super().__init__(f"Missing {artifact}; run saliency_{producer} first.")


@dataclass
class StageResult:
    stage: str
    produced: int = 0
    skipped: int = 0
    failed: list[str] = field(default_factory=list)
    outputs: list[Path] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failed

    def summary(self) -> str:
        text = f"{self.stage}: {self.produced} produced, {self.skipped} up to date"
        if self.failed:
            text += f", {len(self.failed)} failed ({', '.join(self.failed)})"
        return text


def _jsonable(value):
    if dataclasses.is_dataclass(value):
        return dataclasses.asdict(value)
    return str(value)


def fingerprint(*parts) -> str:
    """sha256 over the settings an output is built from."""
    payload = json.dumps(parts, sort_keys=True, default=_jsonable)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def stamp_path(output: Path) -> Path:
    return output.with_name(output.name + ".sha256")


def write_stamp(output: Path, stamp: str) -> None:
    stamp_path(output).write_text(stamp + "\n", encoding="utf-8")


def read_stamp(output: Path) -> str | None:
    try:
        return stamp_path(output).read_text(encoding="utf-8").strip()
    except OSError:
        return None


def is_up_to_date(output: Path, inputs: Iterable[Path | None], stamp: str | None = None) -> bool:
    """
    True when ``output`` is newer than every existing input and, if a
    ``stamp`` is given, was built with the settings that fingerprint names.
    """
    if not output.exists():
        return False
    if stamp is not None and read_stamp(output) != stamp:
        logger.debug("%s was built with other settings", output)
        return False
    mtime = output.stat().st_mtime
    return all(p is None or not p.exists() or p.stat().st_mtime <= mtime for p in inputs)


# Per-image tasks; module level so worker processes can unpickle them.


def _extract_one(task):
    entry, path, sift_params, horizon_row = task
    try:
        img = load_image(entry.image_path)
        detectors = load_detector_maps(entry, img.width, img.height)
        stack, keypoints = build_feature_stack(
            img, detectors, horizon_row=horizon_row, sift_params=sift_params
        )
        save_stack(stack, path)
    except (SaliencyError, OSError) as exc:
        return entry.image_id, None, str(exc)
    return entry.image_id, keypoints, None


def _keypoints_one(task):
    entry, sift_params = task
    try:
        _density, keypoints = sift_channel(load_image(entry.image_path).luma(), sift_params)
    except (SaliencyError, OSError) as exc:
        return entry.image_id, None, str(exc)
    return entry.image_id, keypoints, None


def _gt_one(task):
    entry, chan_path, png_path, sigma = task
    try:
        width, height = image_size(entry.image_path)
        fixations = load_fixations(entry.fixation_path, width, height, entry.image_id)
        gt = ground_truth_map(fixations, width, height, sigma)
        write_channel_map(gt.values, chan_path)
        write_map_png(gt.values, png_path)
    except (SaliencyError, OSError) as exc:
        return entry.image_id, str(exc)
    return entry.image_id, None


def _sample_one(task):
    image_id, stack_path, gt_path, spec = task
    stack = load_stack(stack_path)
    gt = SaliencyMap(load_channel_map(gt_path, stack.width, stack.height, channel="ground truth"))
    return sample_image(stack, gt, spec, image_id=image_id)


def _predict_one(task):
    image_id, model, stack_path, png_path, chan_path, stride, exclude_groups = task
    try:
        stack = load_stack(stack_path)
        saliency = predict_map(model, stack, model.normalizer, stride, exclude_groups)
        write_map_png(saliency.values, png_path)
        if chan_path is not None:
            write_channel_map(saliency.values, chan_path)
    except (SaliencyError, OSError) as exc:
        return image_id, str(exc)
    return image_id, None


class SaliencyPipeline:
    def __init__(self, config: RunConfig):
        self.config = config
        self.out = Path(config.out)
        self.stacks_dir = self.out / "stacks"
        self.gt_dir = self.out / "gt"
        self.samples_dir = self.out / "samples"
        self.models_dir = self.out / "models"
        self.eval_dir = self.out / "eval"
        self.maps_dir = self.out / "maps"
        self._corpus: Corpus | None = None

    # Paths

    def corpus(self) -> Corpus:
        if self._corpus is None:
            if self.config.manifest is None:
                raise ConfigError("No corpus manifest configured; pass --manifest or set 'manifest'.")
            self._corpus = load_manifest(self.config.manifest)
        return self._corpus

    def stack_path(self, image_id: str) -> Path:
        return self.stacks_dir / f"{image_id}.fstk"

    def gt_path(self, image_id: str) -> Path:
        return self.gt_dir / f"{image_id}.chan"

    def model_path(self, method: str) -> Path:
        return self.models_dir / f"{method}.smdl"

    def samples_path(self, part: str) -> Path:
        return self.samples_dir / f"{part}.smpl"

    def _require(self, path: Path, producer: str) -> Path:
        if not path.exists():
            raise MissingUpstream(path, producer)
        return path

    def _report_failures(self, result: StageResult, failures) -> None:
        for image_id, message in failures:
            logger.error("Image '%s' failed in %s: %s", image_id, result.stage, message)
            result.failed.append(image_id)

    # Stages

    def extract(self, force: bool = False, dump_keypoints: bool = False) -> StageResult:
        result = StageResult("extract")
        corpus = self.corpus()
        self.stacks_dir.mkdir(parents=True, exist_ok=True)
        horizons = (
            load_horizon_overrides(self.config.horizon_file) if self.config.horizon_file else {}
        )

        stamps = {}
        tasks = []
        pending_keypoints = []
        for entry in corpus:
            path = self.stack_path(entry.image_id)
            inputs = [entry.image_path, self.config.horizon_file, *entry.detector_paths().values()]
            stamp = fingerprint("extract", self.config.sift, horizons.get(entry.image_id))
            stamps[entry.image_id] = stamp
            if not force and is_up_to_date(path, inputs, stamp):
                result.skipped += 1
                pending_keypoints.append(entry)
                continue
            tasks.append((entry, path, self.config.sift, horizons.get(entry.image_id)))

        keypoints: dict[str, list] = {}
        failures = []
        for image_id, found, error in parallel_map(_extract_one, tasks, self.config.jobs):
            if error is not None:
                failures.append((image_id, error))
                continue
            write_stamp(self.stack_path(image_id), stamps[image_id])
            result.produced += 1
            result.outputs.append(self.stack_path(image_id))
            keypoints[image_id] = found

        if dump_keypoints:
            recomputed = parallel_map(
                _keypoints_one, [(e, self.config.sift) for e in pending_keypoints], self.config.jobs
            )
            for image_id, found, error in recomputed:
                if error is not None:
                    failures.append((image_id, error))
                else:
                    keypoints[image_id] = found
            rows = [
                (entry.image_id, kp)
                for entry in corpus
                for kp in keypoints.get(entry.image_id, ())
            ]
            path = self.out / "keypoints.csv"
            write_keypoints(rows, path)
            result.outputs.append(path)

        self._report_failures(result, failures)
        return result

    def ground_truth(self, force: bool = False) -> StageResult:
        result = StageResult("gt")
        self.gt_dir.mkdir(parents=True, exist_ok=True)
        stamp = fingerprint("gt", self.config.gt_sigma)
        tasks = []
        for entry in self.corpus():
            chan = self.gt_path(entry.image_id)
            png = chan.with_suffix(".png")
            inputs = [entry.image_path, entry.fixation_path]
            if not force and is_up_to_date(chan, inputs, stamp) and is_up_to_date(png, inputs):
                result.skipped += 1
                continue
            tasks.append((entry, chan, png, self.config.gt_sigma))

        failures = []
        for image_id, error in parallel_map(_gt_one, tasks, self.config.jobs):
            if error is not None:
                failures.append((image_id, error))
            else:
                write_stamp(self.gt_path(image_id), stamp)
                result.produced += 1
                result.outputs.append(self.gt_path(image_id))
        self._report_failures(result, failures)
        return result

    def sample(self, force: bool = False) -> StageResult:
        result = StageResult("sample")
        corpus = self.corpus()
        inputs = []
        for entry in corpus:
            inputs.append(self._require(self.stack_path(entry.image_id), "extract"))
            inputs.append(self._require(self.gt_path(entry.image_id), "gt"))

        outputs = [
            self.samples_path("train"),
            self.samples_path("test"),
            self.samples_dir / "train.csv",
            self.samples_dir / "test.csv",
            self.samples_dir / "split.csv",
        ]
        inputs.append(self.config.manifest)
        stamp = fingerprint("sample", self.config.split, self.config.sampling)
        split_file = self.samples_dir / "split.csv"
        if not force and is_up_to_date(split_file, inputs, stamp) and all(
            is_up_to_date(path, inputs) for path in outputs
        ):
            result.skipped = len(outputs)
            return result

        self.samples_dir.mkdir(parents=True, exist_ok=True)
        train, test = split_corpus(corpus, self.config.split)
        with open(self.samples_dir / "split.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["image_id", "part"])
            part_of = {e.image_id: "train" for e in train}
            part_of.update({e.image_id: "test" for e in test})
            for entry in corpus:
                writer.writerow([entry.image_id, part_of[entry.image_id]])

        for part, entries in (("train", train), ("test", test)):
            tasks = [
                (e.image_id, self.stack_path(e.image_id), self.gt_path(e.image_id), self.config.sampling)
                for e in entries
            ]
            samples = [s for per_image in parallel_map(_sample_one, tasks, self.config.jobs) for s in per_image]
            if samples:
                matrix, labels = assemble_matrix(samples)
            else:
                logger.warning("The %s part produced no samples", part)
                matrix, labels = np.empty((0, CHANNEL_COUNT)), np.empty(0, dtype=np.int64)
            write_samples(matrix, labels, self.samples_path(part))
            write_samples_csv(samples, self.samples_dir / f"{part}.csv")
            logger.info("%s samples: %d rows from %d images", part, len(labels), len(entries))

        write_stamp(split_file, stamp)
        result.produced = len(outputs)
        result.outputs.extend(outputs)
        return result

    def load_matrix(self, part: str) -> tuple[np.ndarray, np.ndarray]:
        matrix, labels = read_samples(self._require(self.samples_path(part), "sample"))
        if self.config.exclude_groups:
            matrix = ablate_groups(matrix, self.config.exclude_groups)
        return matrix, labels

    def learner(self, method: str) -> LearnerSpec:
        return LearnerSpec(method, self.config.params_for(method))

    def train(self, method: str, force: bool = False) -> StageResult:
        result = StageResult("train")
        path = self.model_path(method)
        source = self._require(self.samples_path("train"), "sample")
        stamp = fingerprint("train", method, self.config.params_for(method), self.config.exclude_groups)
        if not force and is_up_to_date(path, [source], stamp):
            result.skipped = 1
            return result

        matrix, labels = self.load_matrix("train")
        model = fit_model(self.learner(method), matrix, labels)
        self.models_dir.mkdir(parents=True, exist_ok=True)
        save_model(model, path)
        write_stamp(path, stamp)
        result.produced = 1
        result.outputs.append(path)
        return result

    def load_trained(self, method: str) -> TrainedModel:
        return load_model(self._require(self.model_path(method), "train"))

    def evaluate(self, methods: Sequence[str], protocol: str = "cv") -> tuple[StageResult, list[tuple[str, EvalReport]]]:
        if protocol not in PROTOCOLS:
            raise ConfigError(f"Unknown protocol {protocol!r}; choose cv or holdout.")
        result = StageResult("eval")
        reports: list[tuple[str, EvalReport]] = []

        if protocol == "cv":
            matrix, labels = self.load_matrix("train")
            for method in methods:
                reports.append(
                    (method, kfold_cv(matrix, labels, self.learner(method), self.config.cv, jobs=self.config.jobs))
                )
        else:
            models = [(method, self.load_trained(method)) for method in methods]
            matrix, labels = self.load_matrix("test")
            for method, model in models:
                reports.append((method, evaluate_model(model, matrix, labels)))

        self.eval_dir.mkdir(parents=True, exist_ok=True)
        table = self.eval_dir / f"metrics_{protocol}.csv"
        plot = self.eval_dir / f"roc_{protocol}.svg"
        compare_report(reports, table, plot)
        result.produced = len(reports)
        result.outputs.extend([table, plot, plot.with_suffix(".csv")])
        return result, reports

    def predict(
        self,
        method: str,
        force: bool = False,
        dump_chan: bool = False,
        image_ids: Iterable[str] | None = None,
    ) -> StageResult:
        result = StageResult("predict")
        model_path = self._require(self.model_path(method), "train")
        model = load_model(model_path)
        target = self.maps_dir / method
        target.mkdir(parents=True, exist_ok=True)

        wanted = set(image_ids) if image_ids else None
        stamp = fingerprint("predict", self.config.predict_stride, self.config.exclude_groups)
        tasks = []
        for entry in self.corpus():
            if wanted is not None and entry.image_id not in wanted:
                continue
            stack = self._require(self.stack_path(entry.image_id), "extract")
            png = target / f"{entry.image_id}.png"
            chan = target / f"{entry.image_id}.chan" if dump_chan else None
            if not force and is_up_to_date(png, [model_path, stack], stamp) and (
                chan is None or is_up_to_date(chan, [model_path, stack], stamp)
            ):
                result.skipped += 1
                continue
            tasks.append(
                (entry.image_id, model, stack, png, chan, self.config.predict_stride, self.config.exclude_groups)
            )

        failures = []
        for image_id, error in parallel_map(_predict_one, tasks, self.config.jobs):
            if error is not None:
                failures.append((image_id, error))
            else:
                write_stamp(target / f"{image_id}.png", stamp)
                if dump_chan:
                    write_stamp(target / f"{image_id}.chan", stamp)
                result.produced += 1
                result.outputs.append(target / f"{image_id}.png")
        self._report_failures(result, failures)
        return result

