"""Experiment grids over (model x dataset x image size) and their reports.

A grid run takes a JSON manifest of cells, evaluates each database/query
file pair, and emits:

  cells.csv          one row per cell: metrics as exact fractions plus the
                     build ("training") and test wall-clock seconds
  averages_2d.md     per-model unweighted means over all 2D cells, percent
  averages_3d.md     same for 3D cells, when any exist
  robustness.md      per-dataset ACC@1 ranges over sizes, plus an overall row
  figure_<ds>.csv    size vs ACC@1 per model, one file per dataset

Cells are independent: a cell that fails provenance checks or will not load
is recorded as a failure and the rest of the grid still runs. Apart from the
two timing columns, report bytes are a pure function of the manifest and the
feature files.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    CbmirError,
    ManifestError,
    ProvenanceError,
    RaggedGridError,
)
from .metrics import MetricReport, Timing, evaluate
from .store import FeatureSet, Role, read_feature_set

# Feature widths of the models the benchmark covers; used to cross-check a
# cell's declared model against the dimensionality of the file it points at.
# Unknown model names skip that check.
KNOWN_MODEL_DIMS: Mapping[str, int] = {
    "VGG19": 512,
    "ResNet50": 2048,
    "DenseNet121": 1024,
    "EfficientNetV2M": 1280,
    "MedCLIP": 512,
    "BioMedCLIP": 512,
    "OpenCLIP": 1024,
    "CONCH": 512,
    "UNI": 1024,
}

_METRIC_COLUMNS = ("map5", "mmv5", "acc1", "acc3", "acc5")
_CELLS_HEADER = ("model", "dataset", "size") + _METRIC_COLUMNS + (
    "build_s",
    "test_s",
)


@dataclass(frozen=True)
class ManifestCell:
    """One grid cell: a database/query file pair and its declared identity."""

    database_path: Path
    query_path: Path
    expected_model: str
    expected_dataset: str
    expected_size: int

    def __post_init__(self):
        object.__setattr__(self, "database_path", Path(self.database_path))
        object.__setattr__(self, "query_path", Path(self.query_path))

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.expected_model, self.expected_dataset, self.expected_size)


@dataclass(frozen=True)
class ExperimentManifest:
    """The full grid: cells plus evaluation depths and output location."""

    cells: tuple[ManifestCell, ...]
    ks: tuple[int, ...] = (1, 3, 5)
    output_dir: Path = Path("reports")
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "ks", tuple(int(k) for k in self.ks))
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        if not self.cells:
            raise ManifestError("manifest has no cells")
        if not self.ks or min(self.ks) < 1:
            raise ManifestError(f"ks must be non-empty and positive, got {self.ks}")
        if self.seed < 0:
            raise ManifestError(f"seed must be unsigned, got {self.seed}")
        seen = {}
        for i, cell in enumerate(self.cells):
            if cell.key in seen:
                raise ManifestError(
                    f"cells {seen[cell.key]} and {i} both describe "
                    f"{cell.key}; (model, dataset, size) must be unique"
                )
            seen[cell.key] = i


def load_manifest(path: str | Path) -> ExperimentManifest:
    """Parse a UTF-8 JSON manifest; relative paths resolve against it."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ManifestError("manifest root must be a JSON object")
    base = path.parent

    def resolve(p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else base / p

    try:
        cells = tuple(
            ManifestCell(
                database_path=resolve(c["database_path"]),
                query_path=resolve(c["query_path"]),
                expected_model=str(c["expected_model"]),
                expected_dataset=str(c["expected_dataset"]),
                expected_size=int(c["expected_size"]),
            )
            for c in raw["cells"]
        )
    except (KeyError, TypeError) as exc:
        raise ManifestError(f"manifest cell is missing a field: {exc}") from exc
    return ExperimentManifest(
        cells=cells,
        ks=tuple(raw.get("ks", (1, 3, 5))),
        output_dir=resolve(raw.get("output_dir", "reports")),
        seed=int(raw.get("seed", 0)),
    )


def save_manifest(manifest: ExperimentManifest, path: str | Path) -> None:
    payload = {
        "ks": list(manifest.ks),
        "output_dir": str(manifest.output_dir),
        "seed": manifest.seed,
        "cells": [
            {
                "database_path": str(c.database_path),
                "query_path": str(c.query_path),
                "expected_model": c.expected_model,
                "expected_dataset": c.expected_dataset,
                "expected_size": c.expected_size,
            }
            for c in manifest.cells
        ],
    }
    _atomic_write_text(Path(path), json.dumps(payload, indent=2) + "\n")


@dataclass(frozen=True)
class CellResult:
    """Metrics for one evaluated cell."""

    model: str
    dataset: str
    size: int
    is_3d: bool
    report: MetricReport

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.model, self.dataset, self.size)


@dataclass(frozen=True)
class CellFailure:
    """A cell that could not be evaluated, with the reason."""

    model: str
    dataset: str
    size: int
    message: str


@dataclass(frozen=True)
class GridOutcome:
    results: tuple[CellResult, ...]
    failures: tuple[CellFailure, ...]

    def require_complete(self) -> tuple[CellResult, ...]:
        if self.failures:
            first = self.failures[0]
            raise CbmirError(
                f"{len(self.failures)} of "
                f"{len(self.results) + len(self.failures)} cells failed; "
                f"first: ({first.model}, {first.dataset}, {first.size}): "
                f"{first.message}"
            )
        return self.results


def _check_provenance(cell: ManifestCell, fs: FeatureSet, path: Path, role: Role):
    meta = fs.meta
    if meta.role is not role:
        raise ProvenanceError(
            f"{path} has role {meta.role.name}, expected {role.name}"
        )
    if meta.model_name != cell.expected_model:
        raise ProvenanceError(
            f"{path} was extracted with {meta.model_name!r}, cell declares "
            f"{cell.expected_model!r}"
        )
    if meta.dataset_name != cell.expected_dataset:
        raise ProvenanceError(
            f"{path} holds {meta.dataset_name!r}, cell declares "
            f"{cell.expected_dataset!r}"
        )
    if meta.image_size != cell.expected_size:
        raise ProvenanceError(
            f"{path} was extracted at size {meta.image_size}, cell declares "
            f"{cell.expected_size}"
        )
    known_dim = KNOWN_MODEL_DIMS.get(cell.expected_model)
    if known_dim is not None and fs.dim != known_dim:
        raise ProvenanceError(
            f"{path} has dim {fs.dim} but {cell.expected_model} "
            f"produces dim {known_dim}"
        )


def run_cell(cell: ManifestCell, ks: Sequence[int]) -> CellResult:
    """Load, provenance-check, and evaluate one cell."""
    t0 = time.perf_counter()
    database = read_feature_set(cell.database_path)
    db_load = time.perf_counter() - t0
    _check_provenance(cell, database, cell.database_path, Role.DATABASE)

    t1 = time.perf_counter()
    queries = read_feature_set(cell.query_path)
    query_load = time.perf_counter() - t1
    _check_provenance(cell, queries, cell.query_path, Role.QUERY)

    report = evaluate(queries, database, ks=ks)
    timing = Timing(
        build_seconds=db_load + report.timing.build_seconds,
        test_load_seconds=query_load,
        test_scan_seconds=report.timing.test_scan_seconds,
        test_metric_seconds=report.timing.test_metric_seconds,
    )
    return CellResult(
        model=cell.expected_model,
        dataset=cell.expected_dataset,
        size=cell.expected_size,
        is_3d=database.meta.is_3d,
        report=report.with_timing(timing),
    )


def run_grid(manifest: ExperimentManifest, workers: int = 1) -> GridOutcome:
    """Evaluate every cell, isolating per-cell failures.

    Cells run in a thread pool; each result is immutable and the outcome is
    ordered by (model, dataset, size) regardless of completion order.
    """
    if workers < 1:
        raise ManifestError(f"workers must be >= 1, got {workers}")

    def one(cell: ManifestCell) -> CellResult | CellFailure:
        try:
            return run_cell(cell, manifest.ks)
        except (CbmirError, OSError) as exc:
            return CellFailure(
                model=cell.expected_model,
                dataset=cell.expected_dataset,
                size=cell.expected_size,
                message=str(exc),
            )

    if workers == 1 or len(manifest.cells) == 1:
        outcomes = [one(c) for c in manifest.cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, manifest.cells))

    results = sorted(
        (o for o in outcomes if isinstance(o, CellResult)),
        key=lambda r: r.key,
    )
    failures = sorted(
        (o for o in outcomes if isinstance(o, CellFailure)),
        key=lambda f: (f.model, f.dataset, f.size),
    )
    return GridOutcome(results=tuple(results), failures=tuple(failures))


@dataclass(frozen=True)
class AverageRow:
    """Per-model means over a group of cells, as percentages."""

    model: str
    map5: float
    mmv5: float
    acc1: float
    acc3: float
    acc5: float


def _cell_metrics_percent(r: CellResult) -> dict[str, float]:
    rep = r.report
    return {
        "map5": 100.0 * rep.map_at_5,
        "mmv5": 100.0 * rep.mmv_at_5,
        "acc1": 100.0 * rep.acc_at_1,
        "acc3": 100.0 * rep.acc_at_3,
        "acc5": 100.0 * rep.acc_at_5,
    }


def aggregate_averages(
    results: Sequence[CellResult], group_3d: bool
) -> list[AverageRow]:
    """Unweighted per-model means across every (dataset, size) cell.

    Every model must cover the same (dataset, size) combinations; a hole
    would silently skew the comparison, so it aborts with the missing cell
    named instead.
    """
    grouped = [r for r in results if r.is_3d == group_3d]
    if not grouped:
        raise RaggedGridError(
            f"no {'3D' if group_3d else '2D'} cells to aggregate"
        )
    models = sorted({r.model for r in grouped})
    combos = sorted({(r.dataset, r.size) for r in grouped})
    by_key = {(r.model, r.dataset, r.size): r for r in grouped}
    rows = []
    for model in models:
        sums = dict.fromkeys(_METRIC_COLUMNS, 0.0)
        for dataset, size in combos:
            cell = by_key.get((model, dataset, size))
            if cell is None:
                raise RaggedGridError(
                    f"model {model} is missing cell ({dataset}, size {size})"
                )
            for name, value in _cell_metrics_percent(cell).items():
                sums[name] += value
        count = len(combos)
        rows.append(
            AverageRow(
                model=model,
                **{name: sums[name] / count for name in _METRIC_COLUMNS},
            )
        )
    return rows


@dataclass(frozen=True)
class RangeRow:
    """ACC@1 spread over image sizes: who moves least and most."""

    dataset: str
    most_robust_model: str
    robust_range: float
    most_sensitive_model: str
    sensitive_range: float

    def __post_init__(self):
        if self.robust_range < 0 or self.sensitive_range < 0:
            raise CbmirError("ranges cannot be negative")


OVERALL_ROW_NAME = "All"


def robustness_ranges(results: Sequence[CellResult]) -> list[RangeRow]:
    """Per-dataset ACC@1 range (max minus min over sizes) per model.

    Each dataset row names the model with the smallest range (most robust)
    and the largest (most sensitive); ties go to the alphabetically first
    model. A final row averages each model's ranges across datasets and
    applies the same argmin/argmax. Ranges are in percentage points.
    """
    if not results:
        raise RaggedGridError("no cells to analyze")
    acc_by_pair: dict[tuple[str, str], list[float]] = {}
    for r in results:
        acc_by_pair.setdefault((r.dataset, r.model), []).append(
            100.0 * r.report.acc_at_1
        )
    datasets = sorted({d for d, _ in acc_by_pair})
    models = sorted({m for _, m in acc_by_pair})
    ranges: dict[tuple[str, str], float] = {}
    for dataset in datasets:
        for model in models:
            values = acc_by_pair.get((dataset, model))
            if values is None:
                raise RaggedGridError(
                    f"model {model} has no cells for dataset {dataset}"
                )
            if len(values) < 2:
                raise RaggedGridError(
                    f"dataset {dataset} has a single size for {model}; "
                    f"need at least 2 to compute a range"
                )
            ranges[(dataset, model)] = max(values) - min(values)

    def pick(range_of: Mapping[str, float]) -> tuple[str, float, str, float]:
        robust = min(models, key=lambda m: (range_of[m], m))
        sensitive = min(models, key=lambda m: (-range_of[m], m))
        return robust, range_of[robust], sensitive, range_of[sensitive]

    rows = []
    for dataset in datasets:
        per_model = {m: ranges[(dataset, m)] for m in models}
        rows.append(RangeRow(dataset, *pick(per_model)))
    overall = {
        m: sum(ranges[(d, m)] for d in datasets) / len(datasets) for m in models
    }
    rows.append(RangeRow(OVERALL_ROW_NAME, *pick(overall)))
    return rows


@dataclass(frozen=True)
class ReportInventory:
    """What emit_reports wrote, and which tables it had to skip."""

    paths: tuple[Path, ...]
    warnings: tuple[str, ...] = ()


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format_fraction(v: float) -> str:
    # repr round-trips exactly, so regenerating tables from cells.csv gives
    # the same bytes as the original emission.
    return repr(float(v))


def _cells_csv_text(results: Sequence[CellResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CELLS_HEADER)
    for r in sorted(results, key=lambda r: r.key):
        rep = r.report
        writer.writerow(
            [
                r.model,
                r.dataset,
                r.size,
                _format_fraction(rep.map_at_5),
                _format_fraction(rep.mmv_at_5),
                _format_fraction(rep.acc_at_1),
                _format_fraction(rep.acc_at_3),
                _format_fraction(rep.acc_at_5),
                f"{rep.timing.build_seconds:.3f}",
                f"{rep.timing.test_seconds:.3f}",
            ]
        )
    return buf.getvalue()


def _averages_md_text(rows: Sequence[AverageRow], title: str) -> str:
    lines = [
        f"# {title}",
        "",
        "| Model | mAP@5 | mMV@5 | ACC@1 | ACC@3 | ACC@5 |",
        "| --- | --- | --- | --- | --- | --- |",
    ]
    for row in rows:
        lines.append(
            f"| {row.model} | {row.map5:.2f} | {row.mmv5:.2f} "
            f"| {row.acc1:.2f} | {row.acc3:.2f} | {row.acc5:.2f} |"
        )
    return "\n".join(lines) + "\n"


def _robustness_md_text(rows: Sequence[RangeRow]) -> str:
    lines = [
        "# ACC@1 range over image sizes",
        "",
        "| Dataset | Most robust | Range (pp) | Most sensitive | Range (pp) |",
        "| --- | --- | --- | --- | --- |",
    ]
    for row in rows:
        lines.append(
            f"| {row.dataset} | {row.most_robust_model} "
            f"| {row.robust_range:.2f} | {row.most_sensitive_model} "
            f"| {row.sensitive_range:.2f} |"
        )
    return "\n".join(lines) + "\n"


def _figure_csv_text(results: Sequence[CellResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "size", "acc1"])
    for r in sorted(results, key=lambda r: (r.model, r.size)):
        writer.writerow([r.model, r.size, f"{100.0 * r.report.acc_at_1:.2f}"])
    return buf.getvalue()


def emit_reports(
    results: Sequence[CellResult], output_dir: str | Path
) -> ReportInventory:
    """Write every report artifact for a set of cell results.

    cells.csv and the per-dataset figure CSVs always emit. The aggregate and
    robustness tables need a regular grid; when the grid cannot support one
    (ragged, or too few sizes) that table is skipped and the reason recorded
    as a warning. All writes are atomic (temp file + rename), so re-emission
    over an existing directory never leaves a half-written artifact.
    """
    if not results:
        raise RaggedGridError("no cell results to report")
    output_dir = Path(output_dir)
    paths: list[Path] = []
    warnings: list[str] = []

    def write(name: str, text: str):
        target = output_dir / name
        _atomic_write_text(target, text)
        paths.append(target)

    write("cells.csv", _cells_csv_text(results))

    for group_3d, name, title in (
        (False, "averages_2d.md", "Average results across all 2D datasets and sizes"),
        (True, "averages_3d.md", "Average results across all 3D datasets and sizes"),
    ):
        if not any(r.is_3d == group_3d for r in results):
            continue
        try:
            rows = aggregate_averages(results, group_3d)
        except RaggedGridError as exc:
            warnings.append(f"{name} skipped: {exc}")
            continue
        write(name, _averages_md_text(rows, title))

    try:
        rows = robustness_ranges(list(results))
    except RaggedGridError as exc:
        warnings.append(f"robustness.md skipped: {exc}")
    else:
        write("robustness.md", _robustness_md_text(rows))

    for dataset in sorted({r.dataset for r in results}):
        subset = [r for r in results if r.dataset == dataset]
        write(f"figure_{dataset}.csv", _figure_csv_text(subset))

    return ReportInventory(paths=tuple(paths), warnings=tuple(warnings))


def load_cells_csv(path: str | Path) -> list[CellResult]:
    """Rebuild cell results from a cells.csv for report regeneration.

    The CSV does not carry the 3D flag, so it is inferred from the dataset
    name (trailing "3d", case-insensitive), matching the benchmark's naming.
    Per-query detail and the timing split are not recoverable; timings load
    into the scan component.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(_CELLS_HEADER):
            raise ManifestError(
                f"{path} columns {reader.fieldnames} do not match "
                f"{list(_CELLS_HEADER)}"
            )
        results = []
        for row in reader:
            try:
                report = MetricReport(
                    map_at_5=float(row["map5"]),
                    mmv_at_5=float(row["mmv5"]),
                    acc={
                        1: float(row["acc1"]),
                        3: float(row["acc3"]),
                        5: float(row["acc5"]),
                    },
                    per_query_ap=(),
                    query_count=0,
                    timing=Timing(
                        build_seconds=float(row["build_s"]),
                        test_scan_seconds=float(row["test_s"]),
                    ),
                )
                results.append(
                    CellResult(
                        model=row["model"],
                        dataset=row["dataset"],
                        size=int(row["size"]),
                        is_3d=row["dataset"].lower().endswith("3d"),
                        report=report,
                    )
                )
            except (KeyError, ValueError) as exc:
                raise ManifestError(f"{path}: bad row {row}: {exc}") from exc
    if not results:
        raise ManifestError(f"{path} has no data rows")
    return results
