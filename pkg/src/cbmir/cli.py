"""Command-line front end.

Subcommands cover the whole engine surface: evaluate one database/query
pair, run a manifest grid, concatenate 3D slice files, validate a feature
file, generate synthetic clustered features, and regenerate report tables
from an existing cells.csv.

Exit codes: 0 success, 1 validation or provenance failure, 2 I/O failure.
``CBMIR_WORKERS`` overrides the default worker count where one applies.
"""

from __future__ import annotations

import argparse
import glob
import os
import sys
from pathlib import Path

from .errors import CbmirError, ManifestError, VolumeError
from .harness import (
    CellResult,
    emit_reports,
    load_cells_csv,
    load_manifest,
    run_grid,
)
from .metrics import evaluate
from .store import (
    read_feature_set,
    validation_warnings,
    write_feature_set,
)
from .synthetic import make_clustered_sets
from .volume3d import concat_slices, load_slice_stack


def _default_workers() -> int:
    raw = os.environ.get("CBMIR_WORKERS")
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ManifestError(f"CBMIR_WORKERS must be an integer, got {raw!r}")
    if value < 1:
        raise ManifestError(f"CBMIR_WORKERS must be >= 1, got {value}")
    return value


def _parse_ks(text: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ManifestError(f"--k expects comma-separated integers, got {text!r}")
    if not ks:
        raise ManifestError("--k is empty")
    return ks


def _print_metrics(result: CellResult, extra_ks: tuple[int, ...]):
    rep = result.report
    print(f"model={result.model}")
    print(f"dataset={result.dataset}")
    print(f"size={result.size}")
    print(f"queries={rep.query_count}")
    print(f"map5={rep.map_at_5:.4f}")
    print(f"mmv5={rep.mmv_at_5:.4f}")
    for k in sorted(rep.acc):
        if k in (1, 3, 5) or k in extra_ks:
            print(f"acc{k}={rep.acc[k]:.4f}")
    print(f"build_s={rep.timing.build_seconds:.3f}")
    print(f"test_s={rep.timing.test_seconds:.3f}")


def _cmd_evaluate(args) -> int:
    database = read_feature_set(args.db)
    queries = read_feature_set(args.query)
    for field in ("model_name", "dataset_name", "image_size"):
        db_value = getattr(database.meta, field)
        q_value = getattr(queries.meta, field)
        if db_value != q_value:
            raise CbmirError(
                f"database and query disagree on {field}: "
                f"{db_value!r} vs {q_value!r}"
            )
    ks = _parse_ks(args.k)
    report = evaluate(queries, database, ks=ks, workers=args.workers)
    result = CellResult(
        model=database.meta.model_name,
        dataset=database.meta.dataset_name,
        size=database.meta.image_size,
        is_3d=database.meta.is_3d,
        report=report,
    )
    _print_metrics(result, ks)
    if args.out:
        inventory = emit_reports([result], args.out)
        for path in inventory.paths:
            print(f"wrote {path}")
        for warning in inventory.warnings:
            print(f"warning: {warning}", file=sys.stderr)
    return 0


def _cmd_grid(args) -> int:
    manifest = load_manifest(args.manifest)
    outcome = run_grid(manifest, workers=args.workers)
    for r in outcome.results:
        rep = r.report
        print(
            f"cell model={r.model} dataset={r.dataset} size={r.size} "
            f"acc1={rep.acc_at_1:.4f} map5={rep.map_at_5:.4f}"
        )
    for f in outcome.failures:
        print(
            f"FAILED cell model={f.model} dataset={f.dataset} "
            f"size={f.size}: {f.message}",
            file=sys.stderr,
        )
    if outcome.results:
        out_dir = args.out if args.out else manifest.output_dir
        inventory = emit_reports(list(outcome.results), out_dir)
        for path in inventory.paths:
            print(f"wrote {path}")
        for warning in inventory.warnings:
            print(f"warning: {warning}", file=sys.stderr)
    return 1 if outcome.failures else 0


def _cmd_concat3d(args) -> int:
    paths: list[str] = []
    for pattern in args.slices:
        matched = sorted(glob.glob(pattern))
        paths.extend(matched if matched else [pattern])
    missing = [p for p in paths if not Path(p).is_file()]
    if missing:
        raise FileNotFoundError(f"slice file not found: {missing[0]}")
    if not paths:
        raise VolumeError(f"no files match {args.slices}")
    stack = load_slice_stack(paths)
    combined = concat_slices(stack)
    written = write_feature_set(combined, args.out)
    print(
        f"wrote {args.out}: {len(combined)} volumes, "
        f"dim {combined.dim} ({stack.depth} slices x {stack.slice_dim}), "
        f"{written} bytes"
    )
    return 0


def _cmd_validate(args) -> int:
    fs = read_feature_set(args.file)
    meta = fs.meta
    print(f"records={len(fs)}")
    print(f"dim={fs.dim}")
    print(f"model={meta.model_name}")
    print(f"dataset={meta.dataset_name}")
    print(f"size={meta.image_size}")
    print(f"classes={meta.num_classes}")
    print(f"role={meta.role.name.lower()}")
    print(f"is_3d={int(meta.is_3d)}")
    for warning in validation_warnings(fs):
        print(f"warning: {warning}", file=sys.stderr)
    print("valid")
    return 0


def _cmd_synth(args) -> int:
    database, queries = make_clustered_sets(
        classes=args.classes,
        per_class=args.per_class,
        dim=args.dim,
        sep=args.sep,
        seed=args.seed,
        image_size=args.size,
        model_name=args.model_name,
        dataset_name=args.dataset_name,
    )
    write_feature_set(database, args.out_db)
    write_feature_set(queries, args.out_q)
    print(f"wrote {args.out_db}: {len(database)} records")
    print(f"wrote {args.out_q}: {len(queries)} records")
    return 0


def _cmd_report(args) -> int:
    results = load_cells_csv(args.cells)
    inventory = emit_reports(results, args.out)
    for path in inventory.paths:
        print(f"wrote {path}")
    for warning in inventory.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbmir",
        description="Exact content-based retrieval over labeled feature files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score one query set against a database")
    p.add_argument("--db", required=True, help="database .fset file")
    p.add_argument("--query", required=True, help="query .fset file")
    p.add_argument("--k", default="1,3,5", help="comma-separated ACC depths")
    p.add_argument("--out", default=None, help="directory for report files")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("grid", help="run every cell in a manifest")
    p.add_argument("--manifest", required=True, help="UTF-8 JSON manifest")
    p.add_argument("--out", default=None, help="override manifest output_dir")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("concat3d", help="concatenate per-slice files into one")
    p.add_argument(
        "--slices", required=True, nargs="+", help="slice file paths or globs"
    )
    p.add_argument("--out", required=True, help="output .fset file")
    p.set_defaults(func=_cmd_concat3d)

    p = sub.add_parser("validate", help="check a feature file and print its identity")
    p.add_argument("file", help=".fset file to validate")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("synth", help="generate clustered synthetic features")
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--per-class", type=int, required=True, dest="per_class")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--sep", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-db", required=True, dest="out_db")
    p.add_argument("--out-q", required=True, dest="out_q")
    p.add_argument("--size", type=int, default=28, help="declared image size")
    p.add_argument("--model-name", default="synthetic")
    p.add_argument("--dataset-name", default="synthetic")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("report", help="regenerate tables from a cells.csv")
    p.add_argument("--cells", required=True, help="cells.csv from a grid run")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "workers", None) is None and hasattr(args, "workers"):
            args.workers = _default_workers()
        return args.func(args)
    except CbmirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
