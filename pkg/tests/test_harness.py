"""Grid runner, aggregation, robustness ranges, and report emission."""

import json

import numpy as np
import pytest

from cbmir.errors import CbmirError, ManifestError, RaggedGridError
from cbmir.harness import (
    AverageRow,
    CellResult,
    ExperimentManifest,
    ManifestCell,
    aggregate_averages,
    emit_reports,
    load_cells_csv,
    load_manifest,
    robustness_ranges,
    run_cell,
    run_grid,
    save_manifest,
)
from cbmir.metrics import MetricReport, Timing, evaluate
from cbmir.store import read_feature_set, write_feature_set
from cbmir.synthetic import make_clustered_sets
from conftest import make_meta


def fake_report(acc1=0.7, acc3=0.8, acc5=0.9, map5=0.6, mmv5=0.65):
    return MetricReport(
        map_at_5=map5,
        mmv_at_5=mmv5,
        acc={1: acc1, 3: acc3, 5: acc5},
        per_query_ap=(),
        query_count=10,
        timing=Timing(build_seconds=0.5, test_scan_seconds=1.5),
    )


def fake_cell(model, dataset, size, acc1, is_3d=False, **metrics):
    return CellResult(
        model=model,
        dataset=dataset,
        size=size,
        is_3d=is_3d,
        report=fake_report(acc1=acc1, **metrics),
    )


def write_pair(tmp_path, model="synthetic", dataset="synthetic", size=28, seed=0, sep=20.0):
    db, queries = make_clustered_sets(
        classes=3,
        per_class=12,
        dim=8,
        sep=sep,
        seed=seed,
        image_size=size,
        model_name=model,
        dataset_name=dataset,
    )
    db_path = tmp_path / f"{dataset}_{model}_{size}_db.fset"
    q_path = tmp_path / f"{dataset}_{model}_{size}_q.fset"
    write_feature_set(db, db_path)
    write_feature_set(queries, q_path)
    return db_path, q_path


def grid_manifest(tmp_path, specs, out="reports", ks=(1, 3, 5)):
    cells = []
    for model, dataset, size, seed, sep in specs:
        db_path, q_path = write_pair(
            tmp_path, model=model, dataset=dataset, size=size, seed=seed, sep=sep
        )
        cells.append(
            ManifestCell(
                database_path=db_path,
                query_path=q_path,
                expected_model=model,
                expected_dataset=dataset,
                expected_size=size,
            )
        )
    return ExperimentManifest(cells=tuple(cells), ks=ks, output_dir=tmp_path / out)


def test_manifest_json_round_trip(tmp_path):
    manifest = grid_manifest(tmp_path, [("m", "d", 28, 0, 20.0)])
    path = tmp_path / "manifest.json"
    save_manifest(manifest, path)
    loaded = load_manifest(path)
    assert loaded == manifest


def test_manifest_relative_paths_resolve_against_file(tmp_path):
    write_pair(tmp_path, model="m", dataset="d", size=28)
    doc = {
        "cells": [
            {
                "database_path": "d_m_28_db.fset",
                "query_path": "d_m_28_q.fset",
                "expected_model": "m",
                "expected_dataset": "d",
                "expected_size": 28,
            }
        ]
    }
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(doc))
    manifest = load_manifest(path)
    assert manifest.cells[0].database_path == tmp_path / "d_m_28_db.fset"
    assert manifest.output_dir == tmp_path / "reports"
    outcome = run_grid(manifest)
    assert len(outcome.require_complete()) == 1


def test_manifest_validation():
    cell = ManifestCell("a.fset", "b.fset", "m", "d", 28)
    with pytest.raises(ManifestError, match="no cells"):
        ExperimentManifest(cells=())
    with pytest.raises(ManifestError, match="unique"):
        ExperimentManifest(cells=(cell, cell))
    with pytest.raises(ManifestError, match="ks"):
        ExperimentManifest(cells=(cell,), ks=())
    with pytest.raises(ManifestError, match="ks"):
        ExperimentManifest(cells=(cell,), ks=(0, 1))


def test_bad_manifest_files(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ManifestError, match="JSON"):
        load_manifest(path)
    path.write_text(json.dumps({"cells": [{"database_path": "x"}]}))
    with pytest.raises(ManifestError, match="missing"):
        load_manifest(path)


def test_single_cell_matches_direct_evaluate(tmp_path):
    manifest = grid_manifest(tmp_path, [("m", "d", 28, 5, 6.0)])
    (result,) = run_grid(manifest).require_complete()
    cell = manifest.cells[0]
    direct = evaluate(
        read_feature_set(cell.query_path), read_feature_set(cell.database_path)
    )
    assert result.report.map_at_5 == direct.map_at_5
    assert result.report.mmv_at_5 == direct.mmv_at_5
    assert dict(result.report.acc) == dict(direct.acc)
    assert result.model == "m"
    assert result.is_3d is False
    assert result.report.timing.build_seconds > 0.0


def test_provenance_mismatch_is_isolated(tmp_path):
    manifest = grid_manifest(
        tmp_path, [("good", "d", 28, 0, 20.0), ("liar", "d", 64, 1, 20.0)]
    )
    # Point the second cell at the first cell's files: dataset matches but
    # model and size will not.
    bad = ManifestCell(
        database_path=manifest.cells[0].database_path,
        query_path=manifest.cells[0].query_path,
        expected_model="liar",
        expected_dataset="d",
        expected_size=64,
    )
    manifest = ExperimentManifest(
        cells=(manifest.cells[0], bad), output_dir=manifest.output_dir
    )
    outcome = run_grid(manifest)
    assert len(outcome.results) == 1
    assert outcome.results[0].model == "good"
    assert len(outcome.failures) == 1
    assert outcome.failures[0].model == "liar"
    assert "liar" in outcome.failures[0].message
    with pytest.raises(CbmirError, match="liar"):
        outcome.require_complete()


def test_known_model_dim_cross_check(tmp_path):
    # File claims to be UNI output but holds dim-8 vectors: UNI is dim 1024.
    db_path, q_path = write_pair(tmp_path, model="UNI", dataset="d", size=28)
    cell = ManifestCell(db_path, q_path, "UNI", "d", 28)
    with pytest.raises(CbmirError, match="1024"):
        run_cell(cell, ks=(1, 3, 5))


def test_swapped_roles_fail_provenance(tmp_path):
    db_path, q_path = write_pair(tmp_path, model="m", dataset="d", size=28)
    cell = ManifestCell(q_path, db_path, "m", "d", 28)
    with pytest.raises(CbmirError, match="role"):
        run_cell(cell, ks=(1, 3, 5))


def test_unreadable_file_is_isolated(tmp_path):
    manifest = grid_manifest(tmp_path, [("m", "d", 28, 0, 20.0)])
    gone = ManifestCell(
        tmp_path / "missing.fset", tmp_path / "missing_q.fset", "m", "d2", 28
    )
    manifest = ExperimentManifest(
        cells=manifest.cells + (gone,), output_dir=manifest.output_dir
    )
    outcome = run_grid(manifest)
    assert len(outcome.results) == 1
    assert len(outcome.failures) == 1
    assert outcome.failures[0].dataset == "d2"


def test_aggregate_mean_is_unweighted():
    results = [
        fake_cell("m", "d1", 28, acc1=0.70),
        fake_cell("m", "d1", 64, acc1=0.80),
    ]
    (row,) = aggregate_averages(results, group_3d=False)
    assert row.model == "m"
    assert row.acc1 == pytest.approx(75.00)
    assert row.acc3 == pytest.approx(80.0)


def test_aggregate_splits_2d_and_3d():
    results = [
        fake_cell("m", "d", 28, acc1=0.5),
        fake_cell("m", "v3", 28, acc1=0.9, is_3d=True),
    ]
    (flat,) = aggregate_averages(results, group_3d=False)
    (vol,) = aggregate_averages(results, group_3d=True)
    assert flat.acc1 == pytest.approx(50.0)
    assert vol.acc1 == pytest.approx(90.0)


def test_aggregate_names_the_hole():
    results = [
        fake_cell("a", "d1", 28, acc1=0.7),
        fake_cell("a", "d1", 64, acc1=0.7),
        fake_cell("b", "d1", 28, acc1=0.7),
    ]
    with pytest.raises(RaggedGridError, match=r"b is missing cell \(d1, size 64\)"):
        aggregate_averages(results, group_3d=False)
    with pytest.raises(RaggedGridError, match="no 3D cells"):
        aggregate_averages(results, group_3d=True)


def test_robustness_constant_model_is_most_robust():
    results = [
        fake_cell("steady", "d", s, acc1=0.70) for s in (28, 64, 128, 224)
    ] + [
        fake_cell("jumpy", "d", s, acc1=v)
        for s, v in ((28, 0.60), (64, 0.75), (128, 0.62), (224, 0.70))
    ]
    rows = robustness_ranges(results)
    assert len(rows) == 2  # dataset row + overall
    row = rows[0]
    assert row.dataset == "d"
    assert row.most_robust_model == "steady"
    assert row.robust_range == 0.0
    assert row.most_sensitive_model == "jumpy"
    assert row.sensitive_range == pytest.approx(15.0)
    assert rows[1].dataset == "All"


def test_robustness_tie_goes_alphabetical():
    results = [
        fake_cell("zeta", "d", 28, acc1=0.70),
        fake_cell("zeta", "d", 64, acc1=0.73),
        fake_cell("alpha", "d", 28, acc1=0.50),
        fake_cell("alpha", "d", 64, acc1=0.53),
    ]
    (row, overall) = robustness_ranges(results)
    assert row.most_robust_model == "alpha"
    assert row.most_sensitive_model == "alpha"
    assert row.robust_range == pytest.approx(3.0)


def test_robustness_overall_averages_ranges():
    # alpha ranges: d1 10pp, d2 2pp -> mean 6; beta ranges: d1 4pp, d2 4pp -> 4.
    results = [
        fake_cell("alpha", "d1", 28, acc1=0.50),
        fake_cell("alpha", "d1", 64, acc1=0.60),
        fake_cell("alpha", "d2", 28, acc1=0.70),
        fake_cell("alpha", "d2", 64, acc1=0.72),
        fake_cell("beta", "d1", 28, acc1=0.50),
        fake_cell("beta", "d1", 64, acc1=0.54),
        fake_cell("beta", "d2", 28, acc1=0.70),
        fake_cell("beta", "d2", 64, acc1=0.74),
    ]
    rows = robustness_ranges(results)
    overall = rows[-1]
    assert overall.dataset == "All"
    assert overall.most_robust_model == "beta"
    assert overall.robust_range == pytest.approx(4.0)
    assert overall.most_sensitive_model == "alpha"
    assert overall.sensitive_range == pytest.approx(6.0)


def test_robustness_needs_two_sizes():
    with pytest.raises(RaggedGridError, match="single size"):
        robustness_ranges([fake_cell("m", "d", 28, acc1=0.5)])


def test_emit_single_cell_shapes(tmp_path):
    inventory = emit_reports([fake_cell("m", "d", 28, acc1=0.5)], tmp_path / "out")
    names = {p.name for p in inventory.paths}
    assert names == {"cells.csv", "averages_2d.md", "figure_d.csv"}
    assert any("robustness" in w for w in inventory.warnings)
    lines = (tmp_path / "out" / "cells.csv").read_text().splitlines()
    assert len(lines) == 2
    assert lines[0] == "model,dataset,size,map5,mmv5,acc1,acc3,acc5,build_s,test_s"
    assert lines[1].startswith("m,d,28,0.6,0.65,0.5,0.8,0.9,")


def test_emit_figure_rows_per_model(tmp_path):
    results = [
        fake_cell(m, "d", s, acc1=0.5)
        for m in ("a", "b")
        for s in (28, 64, 128, 224)
    ]
    emit_reports(results, tmp_path)
    lines = (tmp_path / "figure_d.csv").read_text().splitlines()
    assert lines[0] == "model,size,acc1"
    assert len(lines) == 1 + 8
    assert sum(1 for l in lines[1:] if l.startswith("a,")) == 4


def test_emit_replaces_existing_files_atomically(tmp_path):
    target = tmp_path / "cells.csv"
    target.write_text("stale junk")
    results = [fake_cell("m", "d", 28, acc1=0.5), fake_cell("m", "d", 64, acc1=0.5)]
    emit_reports(results, tmp_path)
    text = target.read_text()
    assert "stale" not in text
    assert len(list(tmp_path.glob("cells.csv.*"))) == 0  # no temp litter
    before = {p.name: p.read_text() for p in tmp_path.iterdir()}
    emit_reports(results, tmp_path)
    after = {p.name: p.read_text() for p in tmp_path.iterdir()}
    assert before == after


def test_markdown_tables_format(tmp_path):
    results = [
        fake_cell("m", "d", 28, acc1=0.70),
        fake_cell("m", "d", 64, acc1=0.80),
    ]
    emit_reports(results, tmp_path)
    averages = (tmp_path / "averages_2d.md").read_text()
    assert "| m | 60.00 | 65.00 | 75.00 | 80.00 | 90.00 |" in averages
    robustness = (tmp_path / "robustness.md").read_text()
    assert "| d | m | 10.00 | m | 10.00 |" in robustness
    assert "| All | m | 10.00 | m | 10.00 |" in robustness


def test_cells_csv_round_trips_through_loader(tmp_path):
    results = [
        fake_cell("m", "SynapseMNIST3D", 28, acc1=1 / 3, is_3d=True),
        fake_cell("m", "SynapseMNIST3D", 64, acc1=2 / 3, is_3d=True),
    ]
    emit_reports(results, tmp_path)
    loaded = load_cells_csv(tmp_path / "cells.csv")
    assert [r.key for r in loaded] == [r.key for r in results]
    assert all(r.is_3d for r in loaded)
    assert loaded[0].report.acc_at_1 == results[0].report.acc_at_1
    assert loaded[0].report.map_at_5 == results[0].report.map_at_5
    # Regenerating from the loaded rows reproduces the file byte for byte.
    emit_reports(loaded, tmp_path / "again")
    assert (tmp_path / "again" / "cells.csv").read_bytes() == (
        tmp_path / "cells.csv"
    ).read_bytes()


def test_load_cells_csv_rejects_wrong_columns(tmp_path):
    bad = tmp_path / "cells.csv"
    bad.write_text("model,dataset\nx,y\n")
    with pytest.raises(ManifestError, match="columns"):
        load_cells_csv(bad)
    empty = tmp_path / "empty.csv"
    empty.write_text("model,dataset,size,map5,mmv5,acc1,acc3,acc5,build_s,test_s\n")
    with pytest.raises(ManifestError, match="no data"):
        load_cells_csv(empty)


def test_grid_reports_deterministic_across_runs_and_workers(tmp_path):
    specs = [
        (model, dataset, size, seed, sep)
        for seed, (model, dataset, size, sep) in enumerate(
            (m, d, s, sp)
            for m in ("a", "b")
            for d, sp in (("d1", 8.0), ("d2", 2.0))
            for s in (28, 64)
        )
    ]
    manifest = grid_manifest(tmp_path, specs)

    def run(out, workers):
        outcome = run_grid(manifest, workers=workers)
        emit_reports(list(outcome.require_complete()), tmp_path / out)
        drop_timing = lambda text: [
            ",".join(line.split(",")[:-2]) for line in text.splitlines()
        ]
        return {
            p.name: (
                drop_timing(p.read_text()) if p.name == "cells.csv" else p.read_bytes()
            )
            for p in (tmp_path / out).iterdir()
        }

    first = run("r1", workers=1)
    second = run("r2", workers=4)
    third = run("r3", workers=1)
    assert first == second == third
