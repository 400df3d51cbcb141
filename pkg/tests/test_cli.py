"""Command-line surface: subcommands, output formats, exit codes."""

import json
import subprocess
import sys

import numpy as np
import pytest

from cbmir.cli import main
from cbmir.store import read_feature_set, write_feature_set
from cbmir.synthetic import make_clustered_sets
from cbmir.volume3d import slice_filename
from conftest import make_set


def parse_kv(output):
    pairs = {}
    for line in output.strip().splitlines():
        if "=" in line and not line.startswith(("wrote", "cell", "FAILED")):
            key, value = line.split("=", 1)
            pairs[key] = value
    return pairs


def synth_args(tmp_path, sep="20", seed="0", classes="5"):
    return [
        "synth",
        "--classes", classes,
        "--per-class", "40",
        "--dim", "16",
        "--sep", sep,
        "--seed", seed,
        "--out-db", str(tmp_path / "db.fset"),
        "--out-q", str(tmp_path / "q.fset"),
    ]


def test_synth_then_validate(tmp_path, capsys):
    assert main(synth_args(tmp_path)) == 0
    capsys.readouterr()
    assert main(["validate", str(tmp_path / "db.fset")]) == 0
    out = parse_kv(capsys.readouterr().out)
    assert out["records"] == "200"
    assert out["dim"] == "16"
    assert out["classes"] == "5"
    assert out["role"] == "database"


def test_evaluate_prints_perfect_metrics(tmp_path, capsys):
    main(synth_args(tmp_path))
    capsys.readouterr()
    code = main(
        [
            "evaluate",
            "--db", str(tmp_path / "db.fset"),
            "--query", str(tmp_path / "q.fset"),
            "--k", "1,3,5",
            "--out", str(tmp_path / "rep"),
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    values = parse_kv(out)
    assert values["map5"] == "1.0000"
    assert values["mmv5"] == "1.0000"
    assert values["acc1"] == values["acc3"] == values["acc5"] == "1.0000"
    assert (tmp_path / "rep" / "cells.csv").exists()


def test_evaluate_rejects_mismatched_pair(tmp_path, capsys):
    main(synth_args(tmp_path))
    other = tmp_path / "other"
    other.mkdir()
    main(synth_args(other, classes="5", seed="9") + ["--model-name", "different"])
    capsys.readouterr()
    code = main(
        [
            "evaluate",
            "--db", str(tmp_path / "db.fset"),
            "--query", str(other / "q.fset"),
        ]
    )
    assert code == 1
    assert "model_name" in capsys.readouterr().err


def test_validate_exit_codes(tmp_path, capsys):
    missing = main(["validate", str(tmp_path / "nope.fset")])
    assert missing == 2
    bad = tmp_path / "bad.fset"
    bad.write_bytes(b"XXXXX garbage".ljust(40, b"\x00"))
    assert main(["validate", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "magic" in err


def test_validate_warns_on_odd_size(tmp_path, capsys):
    fs = make_set(
        np.ones((2, 3), dtype=np.float32), labels=[0, 1], image_size=99
    )
    path = tmp_path / "odd.fset"
    write_feature_set(fs, path)
    assert main(["validate", str(path)]) == 0
    captured = capsys.readouterr()
    assert "warning" in captured.err
    assert "99" in captured.err


def test_concat3d_glob(tmp_path, capsys):
    db, _ = make_clustered_sets(classes=2, per_class=3, dim=4, sep=5.0, seed=0)
    for i in range(3):
        write_feature_set(db, tmp_path / slice_filename("vol", "m", 28, i))
    out = tmp_path / "combined.fset"
    code = main(["concat3d", "--slices", str(tmp_path / "vol_m_28_slice*.fset"), "--out", str(out)])
    assert code == 0
    combined = read_feature_set(out)
    assert combined.dim == 12
    assert combined.meta.is_3d is True
    assert "dim 12" in capsys.readouterr().out


def test_concat3d_missing_slice(tmp_path, capsys):
    db, _ = make_clustered_sets(classes=2, per_class=3, dim=4, sep=5.0, seed=0)
    for i in (0, 2):  # gap at 1
        write_feature_set(db, tmp_path / slice_filename("vol", "m", 28, i))
    code = main(["concat3d", "--slices", str(tmp_path / "*.fset"), "--out", str(tmp_path / "x.fset")])
    assert code == 1
    assert "gaps" in capsys.readouterr().err


def test_concat3d_no_match_is_io_error(tmp_path, capsys):
    code = main(
        ["concat3d", "--slices", str(tmp_path / "none_*.fset"), "--out", str(tmp_path / "x.fset")]
    )
    assert code == 2


def grid_setup(tmp_path, break_one=False):
    cells = []
    for model in ("a", "b"):
        for size in (28, 64):
            db, q = make_clustered_sets(
                classes=3,
                per_class=10,
                dim=8,
                sep=10.0,
                seed=size,
                image_size=size,
                model_name=model,
                dataset_name="synthetic",
            )
            db_path = tmp_path / f"{model}_{size}_db.fset"
            q_path = tmp_path / f"{model}_{size}_q.fset"
            write_feature_set(db, db_path)
            write_feature_set(q, q_path)
            cells.append(
                {
                    "database_path": db_path.name,
                    "query_path": q_path.name,
                    "expected_model": model,
                    "expected_dataset": "synthetic",
                    "expected_size": size,
                }
            )
    if break_one:
        cells[0]["expected_model"] = "wrong"
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps({"cells": cells, "output_dir": "out"}))
    return manifest


def test_grid_command_emits_reports(tmp_path, capsys):
    manifest = grid_setup(tmp_path)
    assert main(["grid", "--manifest", str(manifest)]) == 0
    out = capsys.readouterr().out
    assert out.count("cell model=") == 4
    for name in ("cells.csv", "averages_2d.md", "robustness.md", "figure_synthetic.csv"):
        assert (tmp_path / "out" / name).exists()


def test_grid_failure_isolates_and_signals(tmp_path, capsys):
    manifest = grid_setup(tmp_path, break_one=True)
    assert main(["grid", "--manifest", str(manifest)]) == 1
    captured = capsys.readouterr()
    assert "FAILED cell" in captured.err
    assert captured.out.count("cell model=") == 3
    assert (tmp_path / "out" / "cells.csv").exists()


def test_report_regenerates_identical_tables(tmp_path, capsys):
    manifest = grid_setup(tmp_path)
    main(["grid", "--manifest", str(manifest)])
    capsys.readouterr()
    code = main(
        [
            "report",
            "--cells", str(tmp_path / "out" / "cells.csv"),
            "--out", str(tmp_path / "regen"),
        ]
    )
    assert code == 0
    for name in ("cells.csv", "averages_2d.md", "robustness.md", "figure_synthetic.csv"):
        assert (tmp_path / "regen" / name).read_bytes() == (
            tmp_path / "out" / name
        ).read_bytes()


def test_workers_env_override(tmp_path, capsys, monkeypatch):
    manifest = grid_setup(tmp_path)
    monkeypatch.setenv("CBMIR_WORKERS", "4")
    assert main(["grid", "--manifest", str(manifest)]) == 0
    monkeypatch.setenv("CBMIR_WORKERS", "zero?")
    assert main(["grid", "--manifest", str(manifest)]) == 1
    assert "CBMIR_WORKERS" in capsys.readouterr().err


def test_bad_k_argument(tmp_path, capsys):
    main(synth_args(tmp_path))
    code = main(
        [
            "evaluate",
            "--db", str(tmp_path / "db.fset"),
            "--query", str(tmp_path / "q.fset"),
            "--k", "1,two",
        ]
    )
    assert code == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "cbmir"] + synth_args(tmp_path),
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert (tmp_path / "db.fset").exists()
    proc = subprocess.run(
        [sys.executable, "-m", "cbmir", "validate", str(tmp_path / "db.fset")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "valid" in proc.stdout


def test_console_script_installed():
    proc = subprocess.run(
        ["cbmir", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    for name in ("evaluate", "grid", "concat3d", "validate", "synth", "report"):
        assert name in proc.stdout
