"""Retrieval evaluation: mAP@k, mMV@k, and ACC@k under label-match relevance.

A retrieved item is relevant iff its class label equals the query's label.
All three metrics are means over the query set:

  AP@k   sum over ranks j <= k of Precision(j) * rel(j), divided by the
         number of relevant items within the top k; zero when none are
         relevant (avoids the 0/0 case).
  MV@k   1 iff the query label wins the majority vote over the top-k labels;
         ties between classes go to the class whose best-ranked occurrence
         comes earliest.
  ACC@k  1 iff the query label appears anywhere in the top k.

Everything is computed in 64-bit float; rounding to the 4 decimal places
used in reports happens at emission time, not here.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .errors import DimensionMismatchError, EvaluationError
from .similarity import BatchResult, SearchIndex, batch_search
from .store import FeatureSet


@dataclass(frozen=True)
class RelevanceJudgment:
    """A query's label and the ordered labels of its top-k hits."""

    query_label: int
    retrieved_labels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "retrieved_labels", tuple(int(x) for x in self.retrieved_labels)
        )
        if not self.retrieved_labels:
            raise EvaluationError("retrieved_labels must be non-empty")


@dataclass(frozen=True)
class Timing:
    """Wall-clock split mirroring the benchmark's training/testing phases.

    build_seconds covers database load plus index normalization ("training");
    the test phase splits into query load, similarity scan, and metric
    computation. Metric time is counted inside the test phase.
    """

    build_seconds: float = 0.0
    test_load_seconds: float = 0.0
    test_scan_seconds: float = 0.0
    test_metric_seconds: float = 0.0

    @property
    def test_seconds(self) -> float:
        return (
            self.test_load_seconds
            + self.test_scan_seconds
            + self.test_metric_seconds
        )


@dataclass(frozen=True)
class MetricReport:
    """All metric values for one (model, dataset, size) cell."""

    map_at_5: float
    mmv_at_5: float
    acc: Mapping[int, float]  # k -> ACC@k, always includes 1, 3, 5
    per_query_ap: tuple[float, ...]  # AP@5 per query
    query_count: int
    timing: Timing = field(default_factory=Timing)

    @property
    def acc_at_1(self) -> float:
        return self.acc[1]

    @property
    def acc_at_3(self) -> float:
        return self.acc[3]

    @property
    def acc_at_5(self) -> float:
        return self.acc[5]

    def with_timing(self, timing: Timing) -> "MetricReport":
        return replace(self, timing=timing)


def ap_at_k(judgment: RelevanceJudgment, k: int) -> float:
    """Average precision over the top-k ranks of one query."""
    if k < 1:
        raise EvaluationError(f"k must be >= 1, got {k}")
    labels = judgment.retrieved_labels[:k]
    relevant = 0
    precision_sum = 0.0
    for rank, label in enumerate(labels, start=1):
        if label == judgment.query_label:
            relevant += 1
            precision_sum += relevant / rank
    if relevant == 0:
        return 0.0
    return precision_sum / relevant


def map_at_k(judgments: Sequence[RelevanceJudgment], k: int) -> float:
    """Mean of per-query average precision."""
    _require_judgments(judgments)
    return sum(ap_at_k(j, k) for j in judgments) / len(judgments)


def majority_label(labels: Sequence[int]) -> int:
    """Winner of the vote; class ties go to the earliest best-ranked class."""
    counts: dict[int, int] = {}
    first_rank: dict[int, int] = {}
    for rank, label in enumerate(labels):
        counts[label] = counts.get(label, 0) + 1
        first_rank.setdefault(label, rank)
    return min(counts, key=lambda lab: (-counts[lab], first_rank[lab]))


def mmv_at_k(judgments: Sequence[RelevanceJudgment], k: int) -> float:
    """Fraction of queries whose label wins the top-k majority vote."""
    _require_judgments(judgments)
    if k < 1:
        raise EvaluationError(f"k must be >= 1, got {k}")
    hits = sum(
        1
        for j in judgments
        if majority_label(j.retrieved_labels[:k]) == j.query_label
    )
    return hits / len(judgments)


def acc_at_k(judgments: Sequence[RelevanceJudgment], k: int) -> float:
    """Fraction of queries whose label appears anywhere in the top k."""
    _require_judgments(judgments)
    if k < 1:
        raise EvaluationError(f"k must be >= 1, got {k}")
    hits = sum(1 for j in judgments if j.query_label in j.retrieved_labels[:k])
    return hits / len(judgments)


def _require_judgments(judgments: Sequence[RelevanceJudgment]):
    if not judgments:
        raise EvaluationError("judgment list is empty")


def judgments_from_batch(
    queries: FeatureSet, batch: BatchResult
) -> list[RelevanceJudgment]:
    """Pair each query's label with the labels its scan retrieved."""
    results = batch.require_complete()
    return [
        RelevanceJudgment(
            query_label=int(queries.labels[r.query_index]),
            retrieved_labels=tuple(h.label for h in r.hits),
        )
        for r in results
    ]


def evaluate(
    queries: FeatureSet,
    database: FeatureSet,
    ks: Iterable[int] = (1, 3, 5),
    workers: int = 1,
) -> MetricReport:
    """Search, judge, and score a query set against a database.

    Runs one batch scan at the deepest k needed, then derives every metric
    from the same ranked output: mAP@5, mMV@5, and ACC at 1/3/5 plus any
    extra depths in ``ks``. Labels are used only here, never during search.
    """
    acc_ks = sorted(set(int(k) for k in ks) | {1, 3, 5})
    if acc_ks[0] < 1:
        raise EvaluationError(f"all k values must be >= 1, got {acc_ks[0]}")
    if queries.dim != database.dim:
        raise DimensionMismatchError(
            f"queries dim {queries.dim} != database dim {database.dim}"
        )
    if queries.meta.num_classes != database.meta.num_classes:
        raise EvaluationError(
            f"num_classes mismatch: queries declare "
            f"{queries.meta.num_classes}, database declares "
            f"{database.meta.num_classes}"
        )
    for name, fs in (("query", queries), ("database", database)):
        if len(fs) and int(fs.labels.max()) >= fs.meta.num_classes:
            raise EvaluationError(
                f"{name} set contains label {int(fs.labels.max())} >= "
                f"num_classes {fs.meta.num_classes}"
            )

    depth = max(acc_ks)

    t0 = time.perf_counter()
    index = SearchIndex(database)
    build_seconds = time.perf_counter() - t0

    batch = batch_search(queries, index, depth, workers=workers)

    t1 = time.perf_counter()
    judgments = judgments_from_batch(queries, batch)
    report = MetricReport(
        map_at_5=map_at_k(judgments, 5),
        mmv_at_5=mmv_at_k(judgments, 5),
        acc={k: acc_at_k(judgments, k) for k in acc_ks},
        per_query_ap=tuple(ap_at_k(j, 5) for j in judgments),
        query_count=len(judgments),
    )
    metric_seconds = time.perf_counter() - t1
    return report.with_timing(
        Timing(
            build_seconds=build_seconds,
            test_scan_seconds=batch.elapsed_seconds,
            test_metric_seconds=metric_seconds,
        )
    )
