"""Per-volume features for 3D datasets by slice concatenation.

A 3D volume is encoded by running the 2D extractor on every slice along the
volume's first axis and concatenating the per-slice vectors in ascending
slice order. No per-slice renormalization happens here: concatenation is
plain, so cosine ranking sees exactly the juxtaposed slice features.

Per-slice files follow ``<dataset>_<model>_<size>_slice<NNN>.fset`` with a
zero-padded, zero-based slice index.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import VolumeError
from .store import FeatureSet, read_feature_set

# FSET1 stores the vector dimension as an unsigned 32-bit field.
_MAX_DIM = 2**32 - 1

_SLICE_NAME = re.compile(
    r"^(?P<stem>.+_\d+)_slice(?P<index>\d{3,})\.fset$"
)


@dataclass(frozen=True)
class SliceStack:
    """Ordered per-slice feature sets for one batch of volumes.

    Every member set must describe the same volumes in the same order:
    identical dims, record counts, item_id sequences, labels, and class
    counts. Position in ``slices`` is the slice index.
    """

    slices: tuple[FeatureSet, ...]

    def __post_init__(self):
        object.__setattr__(self, "slices", tuple(self.slices))
        if not self.slices:
            raise VolumeError("slice stack is empty")
        first = self.slices[0]
        for i, fs in enumerate(self.slices[1:], start=1):
            if fs.dim != first.dim:
                raise VolumeError(
                    f"slice {i} has dim {fs.dim}, expected {first.dim}"
                )
            if len(fs) != len(first):
                raise VolumeError(
                    f"slice {i} has {len(fs)} records, expected {len(first)}"
                )
            if not np.array_equal(fs.item_ids, first.item_ids):
                where = int(np.flatnonzero(fs.item_ids != first.item_ids)[0])
                raise VolumeError(
                    f"slice {i} item_id sequence diverges at record {where} "
                    f"(item {int(fs.item_ids[where])} vs "
                    f"{int(first.item_ids[where])})"
                )
            if not np.array_equal(fs.labels, first.labels):
                where = int(np.flatnonzero(fs.labels != first.labels)[0])
                raise VolumeError(
                    f"slice {i} label disagrees at item "
                    f"{int(first.item_ids[where])}"
                )
            if fs.meta.num_classes != first.meta.num_classes:
                raise VolumeError(
                    f"slice {i} declares {fs.meta.num_classes} classes, "
                    f"expected {first.meta.num_classes}"
                )

    @property
    def depth(self) -> int:
        return len(self.slices)

    @property
    def slice_dim(self) -> int:
        return self.slices[0].dim


def concat_slices(stack: SliceStack) -> FeatureSet:
    """Concatenate per-slice vectors into one per-volume feature set.

    Record i of the output is slice-0 features followed by slice-1 features
    and so on; item_ids and labels carry over unchanged and the result is
    flagged 3D.
    """
    plan = split_volume_manifest(stack.depth, stack.slice_dim, len(stack.slices[0]))
    vectors = np.hstack([fs.vectors for fs in stack.slices])
    assert vectors.shape[1] == plan.dim
    first = stack.slices[0]
    return FeatureSet(
        item_ids=first.item_ids,
        labels=first.labels,
        vectors=vectors,
        meta=replace(first.meta, is_3d=True),
    )


def split_concatenated(combined: FeatureSet, depth: int) -> list[FeatureSet]:
    """Inverse of concat_slices: cut each vector back into depth chunks."""
    if depth < 1:
        raise VolumeError(f"depth must be >= 1, got {depth}")
    if combined.dim % depth:
        raise VolumeError(
            f"dim {combined.dim} is not divisible by depth {depth}"
        )
    slice_dim = combined.dim // depth
    meta = replace(combined.meta, is_3d=False)
    return [
        FeatureSet(
            item_ids=combined.item_ids,
            labels=combined.labels,
            vectors=np.ascontiguousarray(
                combined.vectors[:, i * slice_dim : (i + 1) * slice_dim]
            ),
            meta=meta,
        )
        for i in range(depth)
    ]


@dataclass(frozen=True)
class VolumePlan:
    """Pre-flight answer: output dimension and rough memory footprint."""

    dim: int
    bytes_estimate: int


def split_volume_manifest(
    depth: int, slice_dim: int, record_count: int = 1
) -> VolumePlan:
    """Capacity check before a concatenation job.

    Returns the concatenated dimension (depth x slice_dim) and the payload
    size of the resulting vectors (records x dim x 4 bytes for float32).
    Concatenation can get large fast, so this runs before any data is
    touched; the dimension must still fit the container's 32-bit dim field.
    """
    if depth < 1 or slice_dim < 1:
        raise VolumeError(
            f"depth and slice_dim must be positive, got ({depth}, {slice_dim})"
        )
    if record_count < 0:
        raise VolumeError(f"record_count must be >= 0, got {record_count}")
    dim = depth * slice_dim
    if dim > _MAX_DIM:
        raise VolumeError(
            f"concatenated dim {depth} x {slice_dim} = {dim} overflows the "
            f"32-bit dimension field (max {_MAX_DIM})"
        )
    return VolumePlan(dim=dim, bytes_estimate=record_count * dim * 4)


def slice_filename(dataset: str, model: str, size: int, index: int) -> str:
    """Canonical per-slice file name: <dataset>_<model>_<size>_slice<NNN>.fset"""
    return f"{dataset}_{model}_{size}_slice{index:03d}.fset"


def order_slice_paths(paths: Sequence[str | Path]) -> list[Path]:
    """Sort slice files by their encoded index and verify the run is whole.

    All files must share one <dataset>_<model>_<size> stem, and the indices
    must run 0..depth-1 without gaps or duplicates, so a missing slice file
    fails loudly instead of silently shortening every volume vector.
    """
    if not paths:
        raise VolumeError("no slice files given")
    indexed: list[tuple[int, Path]] = []
    stems = set()
    for p in paths:
        p = Path(p)
        m = _SLICE_NAME.match(p.name)
        if m is None:
            raise VolumeError(
                f"file name {p.name!r} does not match "
                f"<dataset>_<model>_<size>_slice<NNN>.fset"
            )
        stems.add(m.group("stem"))
        indexed.append((int(m.group("index")), p))
    if len(stems) > 1:
        raise VolumeError(
            "slice files mix different volumes: " + ", ".join(sorted(stems))
        )
    indexed.sort(key=lambda pair: pair[0])
    seen = [i for i, _ in indexed]
    expected = list(range(len(indexed)))
    if seen != expected:
        missing = sorted(set(expected) - set(seen))
        if missing:
            raise VolumeError(f"slice indices have gaps: missing {missing}")
        raise VolumeError(f"duplicate slice indices: {sorted(seen)}")
    return [p for _, p in indexed]


def load_slice_stack(paths: Sequence[str | Path]) -> SliceStack:
    """Read slice files in index order and assemble the stack."""
    ordered = order_slice_paths(paths)
    return SliceStack(tuple(read_feature_set(p) for p in ordered))
