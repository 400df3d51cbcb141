"""A full experiment grid: manifest in, metric tables and figure CSVs out.

Each cell pairs a database file with a query file and declares what it
expects to find inside (model, dataset, size); the run refuses any cell
whose file disagrees, and a broken cell never takes the grid down with it.
"""

import tempfile
from pathlib import Path

from cbmir import (
    ExperimentManifest,
    ManifestCell,
    emit_reports,
    make_clustered_sets,
    run_grid,
    save_manifest,
    write_feature_set,
)

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    cells = []
    # Two synthetic "models" that differ in how separable their features
    # are, over two datasets and two image sizes.
    quality = {"sharp": 12.0, "blurry": 2.5}
    for model, sep in quality.items():
        for dataset in ("blobsA", "blobsB"):
            for size in (28, 64):
                db, queries = make_clustered_sets(
                    classes=4,
                    per_class=150,
                    dim=32,
                    sep=sep if size == 28 else sep * 0.7,
                    seed=size,
                    image_size=size,
                    model_name=model,
                    dataset_name=dataset,
                )
                db_path = root / f"{dataset}_{model}_{size}_db.fset"
                q_path = root / f"{dataset}_{model}_{size}_q.fset"
                write_feature_set(db, db_path)
                write_feature_set(queries, q_path)
                cells.append(
                    ManifestCell(db_path, q_path, model, dataset, size)
                )

    manifest = ExperimentManifest(cells=tuple(cells), output_dir=root / "reports")
    save_manifest(manifest, root / "manifest.json")

    outcome = run_grid(manifest, workers=2)
    print(f"ran {len(outcome.results)} cells, {len(outcome.failures)} failures")
    for r in outcome.results[:4]:
        print(f"  {r.model:7s} {r.dataset} @{r.size:3d}: ACC@1 {r.report.acc_at_1:.4f}")

    inventory = emit_reports(list(outcome.require_complete()), manifest.output_dir)
    print("\nreport files:")
    for path in inventory.paths:
        print(f"  {path.name}")

    print("\n" + (manifest.output_dir / "averages_2d.md").read_text())
    print((manifest.output_dir / "robustness.md").read_text())
