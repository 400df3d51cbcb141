"""Labeled feature sets and the FSET1 on-disk container.

The FSET1 layout is the sole contract between the retrieval engine and any
feature extractor. Everything is little-endian:

    bytes 0-4    magic, ASCII "FSET1"
    byte  5      format version (currently 1)
    byte  6      role: 0 = database, 1 = query
    byte  7      is_3d: 0 or 1
    bytes 8-15   record count, u64
    bytes 16-19  feature dimensionality, u32
    bytes 20-23  number of classes, u32
    bytes 24-27  image size in pixels per side, u32
    bytes 28-31  metadata byte length M, u32
    next M bytes UTF-8 JSON object: model_name, dataset_name, extra pairs
    per record   item_id u64, label u32, dim x float32

Feature sets are immutable once constructed; loaders validate before
returning, so a set obtained from :func:`read_feature_set` always passes
:func:`validate_feature_set` with zero violations.
"""

from __future__ import annotations

import enum
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterator, Sequence, Union

import numpy as np

from .errors import SetValidationError, StoreFormatError

MAGIC = b"FSET1"
FORMAT_VERSION = 1
FILE_EXTENSION = ".fset"

_HEADER = struct.Struct("<5sBBBQIIII")  # 32 bytes

# Table-1 sizes (28/64/128/224) plus the 32-pixel CNN minimum. Anything else
# is legal but flagged as a warning by validation_warnings().
RECOGNIZED_IMAGE_SIZES = frozenset({28, 32, 64, 128, 224})

MAX_DIM = 2**32 - 1
MAX_LABEL = 2**32 - 1
MAX_ITEM_ID = 2**64 - 1

ByteSource = Union[str, Path, bytes, bytearray, BinaryIO]
ByteSink = Union[str, Path, BinaryIO]


class Role(enum.Enum):
    """Whether a set is the searchable store or the query workload."""

    DATABASE = 0
    QUERY = 1


@dataclass(frozen=True)
class ProvenanceMeta:
    """Identity of the extraction that produced a feature set."""

    model_name: str
    dataset_name: str
    image_size: int
    is_3d: bool
    num_classes: int
    role: Role
    extra: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.image_size <= 0:
            raise ValueError(f"image_size must be positive, got {self.image_size}")
        if self.num_classes <= 0:
            raise ValueError(f"num_classes must be positive, got {self.num_classes}")
        if not isinstance(self.role, Role):
            raise ValueError(f"role must be a Role, got {self.role!r}")
        object.__setattr__(
            self, "extra", tuple((str(k), str(v)) for k, v in self.extra)
        )


@dataclass(frozen=True)
class FeatureRecord:
    """One item: its split ordinal, class label, and feature vector."""

    item_id: int
    label: int
    vector: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float32)
        if vec.ndim != 1:
            raise ValueError(f"vector must be 1-D, got shape {vec.shape}")
        vec = np.ascontiguousarray(vec)
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)

    def __eq__(self, other):
        if not isinstance(other, FeatureRecord):
            return NotImplemented
        return (
            self.item_id == other.item_id
            and self.label == other.label
            and self.vector.shape == other.vector.shape
            and self.vector.tobytes() == other.vector.tobytes()
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """An ordered, homogeneous collection of feature records.

    The records live in three parallel arrays so that search can operate on
    the vector matrix directly; :attr:`records` materializes the record view
    on demand. Arrays are made read-only at construction: a FeatureSet is
    immutable and safe to share across threads.
    """

    item_ids: np.ndarray  # (n,) uint64
    labels: np.ndarray  # (n,) uint32
    vectors: np.ndarray  # (n, dim) float32
    meta: ProvenanceMeta

    def __post_init__(self):
        ids = np.ascontiguousarray(np.asarray(self.item_ids, dtype=np.uint64))
        labels = np.ascontiguousarray(np.asarray(self.labels, dtype=np.uint32))
        vectors = np.ascontiguousarray(np.asarray(self.vectors, dtype=np.float32))
        if vectors.ndim != 2:
            raise ValueError(f"vectors must be 2-D, got shape {vectors.shape}")
        if not (len(ids) == len(labels) == len(vectors)):
            raise ValueError(
                f"length mismatch: {len(ids)} ids, {len(labels)} labels, "
                f"{len(vectors)} vectors"
            )
        for arr in (ids, labels, vectors):
            arr.setflags(write=False)
        object.__setattr__(self, "item_ids", ids)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "vectors", vectors)

    @classmethod
    def from_records(
        cls, records: Sequence[FeatureRecord], dim: int, meta: ProvenanceMeta
    ) -> "FeatureSet":
        """Build a set from individual records, checking each vector length."""
        violations = [
            Violation(f"vector length {len(r.vector)} != dim {dim}", record=i)
            for i, r in enumerate(records)
            if len(r.vector) != dim
        ]
        if violations:
            raise SetValidationError(violations)
        n = len(records)
        ids = np.fromiter((r.item_id for r in records), dtype=np.uint64, count=n)
        labels = np.fromiter((r.label for r in records), dtype=np.uint32, count=n)
        vectors = (
            np.stack([r.vector for r in records])
            if n
            else np.empty((0, dim), dtype=np.float32)
        )
        return cls(ids, labels, vectors, meta)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.item_ids)

    def record(self, i: int) -> FeatureRecord:
        return FeatureRecord(
            int(self.item_ids[i]), int(self.labels[i]), self.vectors[i]
        )

    def iter_records(self) -> Iterator[FeatureRecord]:
        for i in range(len(self)):
            yield self.record(i)

    @property
    def records(self) -> list[FeatureRecord]:
        return list(self.iter_records())

    def __eq__(self, other):
        """Bitwise equality, including float bit patterns."""
        if not isinstance(other, FeatureSet):
            return NotImplemented
        return (
            self.meta == other.meta
            and self.vectors.shape == other.vectors.shape
            and self.item_ids.tobytes() == other.item_ids.tobytes()
            and self.labels.tobytes() == other.labels.tobytes()
            and self.vectors.tobytes() == other.vectors.tobytes()
        )

    __hash__ = None


@dataclass(frozen=True)
class Violation:
    """One invariant violation found by validation. Data, not an exception."""

    message: str
    record: int | None = None

    def __str__(self) -> str:
        if self.record is not None:
            return f"record {self.record}: {self.message}"
        return self.message


def _record_dtype(dim: int) -> np.dtype:
    return np.dtype(
        [("item_id", "<u8"), ("label", "<u4"), ("vector", "<f4", (dim,))]
    )


def validate_feature_set(fs: FeatureSet) -> list[Violation]:
    """Enumerate every invariant violation; an empty list means valid.

    Checks: non-empty, finite vectors, labels below num_classes, and strictly
    increasing item_id values. Never mutates its input. Image-size oddities
    are not violations; see :func:`validation_warnings`.
    """
    violations: list[Violation] = []
    if len(fs) == 0:
        violations.append(Violation("feature set is empty"))
        return violations

    bad_rows = np.flatnonzero(~np.isfinite(fs.vectors).all(axis=1))
    for i in bad_rows:
        violations.append(
            Violation("vector contains non-finite values", record=int(i))
        )

    overflow = np.flatnonzero(fs.labels >= fs.meta.num_classes)
    for i in overflow:
        violations.append(
            Violation(
                f"label {int(fs.labels[i])} >= num_classes {fs.meta.num_classes}",
                record=int(i),
            )
        )

    ids = fs.item_ids
    not_increasing = np.flatnonzero(ids[1:] <= ids[:-1]) + 1
    for i in not_increasing:
        violations.append(
            Violation(
                f"item_id {int(ids[i])} not greater than predecessor "
                f"{int(ids[i - 1])}",
                record=int(i),
            )
        )
    return violations


def validation_warnings(fs: FeatureSet) -> list[Violation]:
    """Non-fatal oddities: currently just unrecognized image sizes."""
    warnings: list[Violation] = []
    if fs.meta.image_size not in RECOGNIZED_IMAGE_SIZES:
        warnings.append(
            Violation(
                f"image_size {fs.meta.image_size} is not one of the recognized "
                f"sizes {sorted(RECOGNIZED_IMAGE_SIZES)}"
            )
        )
    return warnings


def _meta_to_json(meta: ProvenanceMeta) -> bytes:
    doc = {
        "model_name": meta.model_name,
        "dataset_name": meta.dataset_name,
        "extra": dict(meta.extra),
    }
    return json.dumps(doc, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def write_feature_set(fs: FeatureSet, destination: ByteSink) -> int:
    """Serialize a validated set to the FSET1 container.

    Returns the number of bytes written. Round-trips bitwise through
    :func:`read_feature_set`, including float bit patterns.
    """
    violations = validate_feature_set(fs)
    if violations:
        raise SetValidationError(violations)

    meta_bytes = _meta_to_json(fs.meta)
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        fs.meta.role.value,
        int(fs.meta.is_3d),
        len(fs),
        fs.dim,
        fs.meta.num_classes,
        fs.meta.image_size,
        len(meta_bytes),
    )
    records = np.empty(len(fs), dtype=_record_dtype(fs.dim))
    records["item_id"] = fs.item_ids
    records["label"] = fs.labels
    records["vector"] = fs.vectors
    payload = records.tobytes()

    if isinstance(destination, (str, Path)):
        with open(destination, "wb") as sink:
            sink.write(header)
            sink.write(meta_bytes)
            sink.write(payload)
    else:
        destination.write(header)
        destination.write(meta_bytes)
        destination.write(payload)
    return len(header) + len(meta_bytes) + len(payload)


def read_feature_set(source: ByteSource) -> FeatureSet:
    """Parse an FSET1 container and return a validated FeatureSet.

    Rejects bad magic, unknown versions, truncated or oversized payloads,
    and any set that fails :func:`validate_feature_set`.
    """
    data = _read_all(source)
    if len(data) < _HEADER.size:
        raise StoreFormatError(
            f"file too short for FSET1 header: {len(data)} bytes"
        )
    magic, version, role_byte, is_3d_byte, count, dim, num_classes, image_size, meta_len = _HEADER.unpack_from(
        data, 0
    )
    if magic != MAGIC:
        raise StoreFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise StoreFormatError(
            f"unsupported format version {version}, expected {FORMAT_VERSION}"
        )
    try:
        role = Role(role_byte)
    except ValueError:
        raise StoreFormatError(f"invalid role byte {role_byte}") from None
    if is_3d_byte not in (0, 1):
        raise StoreFormatError(f"invalid is_3d byte {is_3d_byte}")
    if dim == 0:
        raise StoreFormatError("dim must be positive")

    meta_start = _HEADER.size
    meta_end = meta_start + meta_len
    if len(data) < meta_end:
        raise StoreFormatError("metadata block truncated")
    try:
        meta_doc = json.loads(data[meta_start:meta_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise StoreFormatError(f"metadata is not valid UTF-8 JSON: {exc}") from None
    if not isinstance(meta_doc, dict) or not {"model_name", "dataset_name"} <= set(
        meta_doc
    ):
        raise StoreFormatError(
            "metadata JSON must be an object with model_name and dataset_name"
        )

    dtype = _record_dtype(dim)
    payload = data[meta_end:]
    expected = count * dtype.itemsize
    if len(payload) != expected:
        raise StoreFormatError(
            f"payload holds {len(payload)} bytes but header declares "
            f"{count} records of {dtype.itemsize} bytes ({expected})"
        )
    records = np.frombuffer(payload, dtype=dtype)

    try:
        meta = ProvenanceMeta(
            model_name=str(meta_doc["model_name"]),
            dataset_name=str(meta_doc["dataset_name"]),
            image_size=image_size,
            is_3d=bool(is_3d_byte),
            num_classes=num_classes,
            role=role,
            extra=tuple(
                (str(k), str(v)) for k, v in meta_doc.get("extra", {}).items()
            ),
        )
    except ValueError as exc:
        raise StoreFormatError(str(exc)) from None

    fs = FeatureSet(
        records["item_id"].copy(),
        records["label"].copy(),
        np.ascontiguousarray(records["vector"]),
        meta,
    )
    violations = validate_feature_set(fs)
    if violations:
        raise SetValidationError(violations)
    return fs


def _read_all(source: ByteSource) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    if isinstance(source, (str, Path)):
        return Path(source).read_bytes()
    return source.read()


def merge_feature_sets(sets: Sequence[FeatureSet]) -> FeatureSet:
    """Concatenate sets that share dim and provenance into one set.

    item_id values must remain strictly increasing across the boundary;
    useful for stitching shard-wise extractions back together.
    """
    if not sets:
        raise SetValidationError([Violation("nothing to merge")])
    first = sets[0]
    problems = []
    for i, fs in enumerate(sets[1:], start=1):
        if fs.dim != first.dim:
            problems.append(
                Violation(f"set {i} has dim {fs.dim}, expected {first.dim}")
            )
        elif fs.meta != first.meta:
            problems.append(Violation(f"set {i} provenance differs from set 0"))
    if problems:
        raise SetValidationError(problems)
    merged = FeatureSet(
        np.concatenate([fs.item_ids for fs in sets]),
        np.concatenate([fs.labels for fs in sets]),
        np.vstack([fs.vectors for fs in sets]),
        first.meta,
    )
    violations = validate_feature_set(merged)
    if violations:
        raise SetValidationError(violations)
    return merged
