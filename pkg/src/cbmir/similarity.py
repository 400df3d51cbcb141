"""Exact cosine-similarity top-k retrieval.

The scan is brute force by design: every query is scored against every
database record, dot products and norms accumulated in 64-bit precision.
Databases are normalized once into a :class:`SearchIndex` so each scan is a
pure matrix product. Ranking ties are broken by ascending database item_id,
which (because item_ids are strictly increasing) is the same as ascending
database position.
"""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DimensionMismatchError, SearchError, ZeroNormError
from .store import FeatureRecord, FeatureSet

# Queries are scanned in fixed-size blocks. The block layout never depends on
# the worker count, so parallel runs are bitwise identical to sequential ones.
BLOCK_SIZE = 256


@dataclass(frozen=True)
class Hit:
    """One retrieved database record."""

    db_index: int
    score: float
    label: int


@dataclass(frozen=True)
class RankedResult:
    """Top-k hits for one query, sorted by (score desc, item_id asc)."""

    query_index: int
    hits: tuple[Hit, ...]


@dataclass(frozen=True)
class QueryError:
    """A per-query failure inside a batch, isolated from the other queries."""

    query_index: int
    message: str


@dataclass
class BatchResult:
    """Outcome of a batch scan.

    ``results[i]`` corresponds to query i; it is None when that query failed,
    with the reason recorded in ``errors``. ``elapsed_seconds`` is the wall
    time of the scan, feeding the harness timing reports.
    """

    results: list[RankedResult | None]
    errors: list[QueryError]
    elapsed_seconds: float
    k: int

    def require_complete(self) -> list[RankedResult]:
        if self.errors:
            first = self.errors[0]
            raise SearchError(
                f"{len(self.errors)} of {len(self.results)} queries failed; "
                f"first: query {first.query_index}: {first.message}"
            )
        return self.results  # type: ignore[return-value]


def cosine_similarity(a, b) -> float:
    """dot(a,b) / (|a|·|b|), accumulated in float64, rounded to float32.

    Raises on length mismatch and on zero-norm input: a zero embedding
    signals an extraction fault and must not be scored silently.
    """
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.ndim != 1 or vb.ndim != 1:
        raise DimensionMismatchError("cosine_similarity expects 1-D vectors")
    if va.shape[0] != vb.shape[0]:
        raise DimensionMismatchError(
            f"vector lengths differ: {va.shape[0]} vs {vb.shape[0]}"
        )
    norm_a = float(np.linalg.norm(va))
    norm_b = float(np.linalg.norm(vb))
    if norm_a == 0.0:
        raise ZeroNormError("first vector has zero norm")
    if norm_b == 0.0:
        raise ZeroNormError("second vector has zero norm")
    value = float(va @ vb) / (norm_a * norm_b)
    return float(np.float32(value))


def normalize(v) -> np.ndarray:
    """Scale a vector to unit Euclidean norm (float64 arithmetic)."""
    vec = np.asarray(v, dtype=np.float64)
    if vec.ndim != 1:
        raise DimensionMismatchError("normalize expects a 1-D vector")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ZeroNormError("cannot normalize a zero-norm vector")
    return vec / norm


class SearchIndex:
    """A database normalized once, ready for pure dot-product scanning.

    Holds the unit-vector matrix transposed and C-contiguous, the layout the
    block gemm wants. Construction rejects empty databases and any record
    with non-finite components or zero norm.
    """

    def __init__(self, database: FeatureSet):
        if len(database) == 0:
            raise SearchError("database is empty")
        vectors = database.vectors.astype(np.float64)
        bad = np.flatnonzero(~np.isfinite(vectors).all(axis=1))
        if bad.size:
            raise SearchError(
                f"database record {int(bad[0])} contains non-finite values"
            )
        norms = np.linalg.norm(vectors, axis=1)
        zero = np.flatnonzero(norms == 0.0)
        if zero.size:
            raise ZeroNormError(f"database record {int(zero[0])} has zero norm")
        vectors /= norms[:, None]
        self.units_t = np.ascontiguousarray(vectors.T)  # (dim, n)
        self.labels = database.labels
        self.item_ids = database.item_ids
        self.meta = database.meta
        self.dim = database.dim
        self.size = len(database)


def _as_index(database: Union[FeatureSet, SearchIndex]) -> SearchIndex:
    if isinstance(database, SearchIndex):
        return database
    return SearchIndex(database)


def _rank_block(index: SearchIndex, unit_queries: np.ndarray, k: int):
    """Score a block of unit queries; return (indices, scores), each (m, k).

    Rows come back sorted by score descending, database index ascending.
    Boundary ties at the k-th score are resolved explicitly so the selected
    set always contains the lowest-index records among equals.
    """
    scores = unit_queries @ index.units_t  # (m, n) float64
    m, n = scores.shape
    if k < n:
        part = np.argpartition(scores, n - k, axis=1)[:, n - k :]
        chosen = np.take_along_axis(scores, part, axis=1)
        kth = chosen.min(axis=1)
        greater = (scores > kth[:, None]).sum(axis=1)
        equal = (scores == kth[:, None]).sum(axis=1)
        for r in np.flatnonzero(greater + equal > k):
            row = scores[r]
            better = np.flatnonzero(row > kth[r])
            tied = np.flatnonzero(row == kth[r])[: k - better.size]
            part[r] = np.concatenate([better, tied])
        chosen = np.take_along_axis(scores, part, axis=1)
    else:
        part = np.broadcast_to(np.arange(n), (m, n)).copy()
        chosen = scores
    order = np.lexsort((part, -chosen), axis=1)
    return np.take_along_axis(part, order, axis=1), np.take_along_axis(
        chosen, order, axis=1
    )


def _check_queries(vectors: np.ndarray):
    """Split a query block into unit rows and per-row failure messages."""
    q = vectors.astype(np.float64)
    finite = np.isfinite(q).all(axis=1)
    if finite.all():
        norms = np.linalg.norm(q, axis=1)
    else:
        norms = np.linalg.norm(np.where(finite[:, None], q, 0.0), axis=1)
    messages: dict[int, str] = {}
    for r in np.flatnonzero(~finite):
        messages[int(r)] = "query vector contains non-finite values"
    for r in np.flatnonzero(finite & (norms == 0.0)):
        messages[int(r)] = "query vector has zero norm"
    good = np.flatnonzero(finite & (norms != 0.0))
    units = q[good] / norms[good, None]
    return good, units, messages


def top_k_search(
    query: Union[FeatureRecord, np.ndarray, Sequence[float]],
    database: Union[FeatureSet, SearchIndex],
    k: int,
) -> RankedResult:
    """Exact top-k cosine retrieval for a single query.

    k larger than the database is clamped (with a warning); the result is
    identical to exhaustive scoring followed by a full sort under the
    (score desc, item_id asc) order.
    """
    index = _as_index(database)
    if k < 1:
        raise SearchError(f"k must be >= 1, got {k}")
    vector = query.vector if isinstance(query, FeatureRecord) else query
    vec = np.asarray(vector, dtype=np.float64)
    if vec.ndim != 1:
        raise DimensionMismatchError("query vector must be 1-D")
    if vec.shape[0] != index.dim:
        raise DimensionMismatchError(
            f"query dim {vec.shape[0]} != database dim {index.dim}"
        )
    if not np.isfinite(vec).all():
        raise SearchError("query vector contains non-finite values")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ZeroNormError("query vector has zero norm")
    k_eff = _clamp_k(k, index.size)
    idx, sc = _rank_block(index, (vec / norm)[None, :], k_eff)
    return RankedResult(query_index=0, hits=_hits(index, idx[0], sc[0]))


def _clamp_k(k: int, size: int) -> int:
    if k > size:
        warnings.warn(
            f"k={k} exceeds database size {size}; clamped to {size}",
            stacklevel=3,
        )
        return size
    return k


def _hits(index: SearchIndex, idx_row: np.ndarray, score_row: np.ndarray):
    return tuple(
        Hit(db_index=int(j), score=float(s), label=int(index.labels[j]))
        for j, s in zip(idx_row, score_row)
    )


def batch_search(
    queries: FeatureSet,
    database: Union[FeatureSet, SearchIndex],
    k: int,
    workers: int = 1,
    block_size: int = BLOCK_SIZE,
) -> BatchResult:
    """Scan every query against the database.

    Result element i equals a standalone top-k search of query i (same
    ranking, float64 scores). Per-query failures (zero-norm or non-finite
    vectors) are isolated: the failing entry is None and an error naming the
    query index is recorded, while all other results are produced.

    Queries are processed in fixed blocks; ``workers`` only schedules blocks
    across threads, so output is bitwise identical for any worker count.
    """
    index = _as_index(database)
    if k < 1:
        raise SearchError(f"k must be >= 1, got {k}")
    if queries.dim != index.dim:
        raise DimensionMismatchError(
            f"queries dim {queries.dim} != database dim {index.dim}"
        )
    m = len(queries)
    if m == 0:
        raise SearchError("query set is empty")
    k_eff = _clamp_k(k, index.size)

    start = time.perf_counter()
    results: list[RankedResult | None] = [None] * m
    errors: list[QueryError] = []
    blocks = [(b, min(b + block_size, m)) for b in range(0, m, block_size)]

    def scan_block(bounds):
        b0, b1 = bounds
        good, units, messages = _check_queries(queries.vectors[b0:b1])
        if good.size:
            idx, sc = _rank_block(index, units, k_eff)
        else:
            idx = sc = None
        return b0, good, idx, sc, messages

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scanned = list(pool.map(scan_block, blocks))
    else:
        scanned = [scan_block(b) for b in blocks]

    for b0, good, idx, sc, messages in scanned:
        for offset, message in sorted(messages.items()):
            errors.append(QueryError(query_index=b0 + offset, message=message))
        if idx is None:
            continue
        for row, offset in enumerate(good):
            qi = b0 + int(offset)
            results[qi] = RankedResult(
                query_index=qi, hits=_hits(index, idx[row], sc[row])
            )
    elapsed = time.perf_counter() - start
    return BatchResult(results=results, errors=errors, elapsed_seconds=elapsed, k=k)
