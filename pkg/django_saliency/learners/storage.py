"""
SMDL model files: magic, version u16, kind u8, an optional normalizer
block, then a kind-specific little-endian payload.
"""
from __future__ import annotations

import struct
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..core import SaliencyError
from ..sampling import NormalizationStats
from .base import TrainedModel
from .bayes import NbModel
from .boost import BoostModel
from .knn import KnnModel
from .svm import SvmModel, SvmParams
from .tree import TreeModel, TreeNode

MODEL_MAGIC = b"SMDL"
MODEL_VERSION = 1
_HEADER = struct.Struct("<4sHB")
_NODE = struct.Struct("<BHdII")

KIND_CODES = {"svm": 1, "c45": 2, "knn": 3, "nb": 4, "adaboost": 5}


class ModelFileError(SaliencyError):
    pass


class CorruptFile(ModelFileError):
    pass


class VersionMismatch(ModelFileError):
    pass


class _Writer:
    def __init__(self):
        self.parts: list[bytes] = []

    def pack(self, fmt: str, *values) -> None:
        self.parts.append(struct.pack("<" + fmt, *values))

    def array(self, values, dtype: str = "<f8") -> None:
        self.parts.append(np.ascontiguousarray(values, dtype=dtype).tobytes())

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes, source: str):
        self.data = data
        self.offset = 0
        self.source = source

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if size < 0 or end > len(self.data):
            raise CorruptFile(f"{self.source} is truncated.")
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str):
        fmt = "<" + fmt
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, count: int, dtype: str = "<f8") -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(count * dt.itemsize), dtype=dt).astype(dt.newbyteorder("="))

    def finish(self) -> None:
        if self.offset != len(self.data):
            raise CorruptFile(f"{self.source} has {len(self.data) - self.offset} trailing bytes.")


# Payloads


def _write_svm(out: _Writer, model: SvmModel) -> None:
    n, d = model.support_vectors.shape
    out.pack("IH", n, d)
    out.array(model.support_vectors)
    out.array(model.dual_coef)
    params = model.params
    out.pack("ddddI", model.bias, params.gamma, params.cost, params.smo_tolerance, params.max_passes)


def _read_svm(src: _Reader) -> SvmModel:
    n, d = src.unpack("IH")
    vectors = src.array(n * d).reshape(n, d)
    coef = src.array(n)
    bias, gamma, cost, tolerance, max_passes = src.unpack("ddddI")
    params = SvmParams(gamma=gamma, cost=cost, smo_tolerance=tolerance, max_passes=max_passes)
    return SvmModel(support_vectors=vectors, dual_coef=coef, bias=bias, params=params)


def _write_tree(out: _Writer, model: TreeModel) -> None:
    nodes = list(model.root.preorder())
    out.pack("I", len(nodes))
    for node in nodes:
        out.parts.append(
            _NODE.pack(int(node.is_leaf), max(node.feature, 0), node.threshold, node.positives, node.total)
        )


def _read_tree(src: _Reader) -> TreeModel:
    (count,) = src.unpack("I")
    remaining = [count]

    def read_node() -> TreeNode:
        if remaining[0] == 0:
            raise CorruptFile(f"{src.source} ends inside the tree.")
        remaining[0] -= 1
        leaf, feature, threshold, positives, total = _NODE.unpack(src.take(_NODE.size))
        if total == 0:
            raise CorruptFile(f"{src.source} holds an empty tree node.")
        if leaf:
            return TreeNode(positives=positives, total=total)
        left = read_node()
        right = read_node()
        return TreeNode(positives, total, feature, threshold, left, right)

    root = read_node()
    if remaining[0]:
        raise CorruptFile(f"{src.source} lists {remaining[0]} unused tree nodes.")
    return TreeModel(root=root)


def _write_knn(out: _Writer, model: KnnModel) -> None:
    n, d = model.matrix.shape
    out.pack("IHI", n, d, model.k)
    out.array(model.matrix)
    out.array(model.labels, "i1")


def _read_knn(src: _Reader) -> KnnModel:
    n, d, k = src.unpack("IHI")
    matrix = src.array(n * d).reshape(n, d)
    labels = src.array(n, "i1").astype(np.int64)
    return KnnModel(matrix=matrix, labels=labels, k=k)


def _write_nb(out: _Writer, model: NbModel) -> None:
    _, d, points = model.densities.shape
    out.pack("HI", d, points)
    out.array(model.priors)
    out.array(model.lo)
    out.array(model.hi)
    out.array(model.densities)


def _read_nb(src: _Reader) -> NbModel:
    d, points = src.unpack("HI")
    priors = src.array(2)
    lo = src.array(d)
    hi = src.array(d)
    densities = src.array(2 * d * points).reshape(2, d, points)
    return NbModel(priors=priors, lo=lo, hi=hi, densities=densities)


def _write_boost(out: _Writer, model: BoostModel) -> None:
    out.pack("I", len(model.members))
    for member, alpha, error in zip(model.members, model.alphas, model.errors):
        out.pack("dd", alpha, error)
        _write_svm(out, member)


def _read_boost(src: _Reader) -> BoostModel:
    (count,) = src.unpack("I")
    members, alphas, errors = [], [], []
    for _ in range(count):
        alpha, error = src.unpack("dd")
        alphas.append(alpha)
        errors.append(error)
        members.append(_read_svm(src))
    return BoostModel(members=tuple(members), alphas=tuple(alphas), errors=tuple(errors))


_WRITERS = {"svm": _write_svm, "c45": _write_tree, "knn": _write_knn, "nb": _write_nb, "adaboost": _write_boost}
_READERS = {"svm": _read_svm, "c45": _read_tree, "knn": _read_knn, "nb": _read_nb, "adaboost": _read_boost}


def dump_model(model: TrainedModel) -> bytes:
    if model.kind not in KIND_CODES:
        raise ModelFileError(f"Unknown model kind {model.kind!r}.")
    out = _Writer()
    out.parts.append(_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, KIND_CODES[model.kind]))
    if model.normalizer is None:
        out.pack("B", 0)
    else:
        out.pack("BH", 1, len(model.normalizer))
        out.array(model.normalizer.mins)
        out.array(model.normalizer.maxs)
    _WRITERS[model.kind](out, model)
    return out.getvalue()


def parse_model(data: bytes, source: str = "<bytes>") -> TrainedModel:
    if len(data) < _HEADER.size:
        raise CorruptFile(f"{source} is truncated.")
    magic, version, code = _HEADER.unpack_from(data)
    if magic != MODEL_MAGIC:
        raise CorruptFile(f"{source} is not a model file.")
    if version != MODEL_VERSION:
        raise VersionMismatch(f"{source} has model version {version}, expected {MODEL_VERSION}.")
    kinds = {v: k for k, v in KIND_CODES.items()}
    if code not in kinds:
        raise CorruptFile(f"{source} has unknown model kind {code}.")

    src = _Reader(data, source)
    src.offset = _HEADER.size
    normalizer = None
    (has_normalizer,) = src.unpack("B")
    if has_normalizer:
        (d,) = src.unpack("H")
        normalizer = NormalizationStats(mins=src.array(d), maxs=src.array(d))
    try:
        model = _READERS[kinds[code]](src)
    except (ValueError, SaliencyError) as exc:
        if isinstance(exc, ModelFileError):
            raise
        raise CorruptFile(f"{source} holds an invalid model: {exc}") from exc
    src.finish()
    return _attach(model, normalizer)


def _attach(model: TrainedModel, normalizer: NormalizationStats | None) -> TrainedModel:
    if normalizer is None:
        return model
    return replace(model, normalizer=normalizer)


def save_model(model: TrainedModel, path: Path | str) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_model(model))


def load_model(path: Path | str) -> TrainedModel:
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_model(data, source=str(path))
