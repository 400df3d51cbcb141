"""Exact content-based image retrieval over pre-extracted feature vectors.

The package splits into five parts: the FSET1 feature container (store),
the cosine top-k search kernel (similarity), retrieval metrics (metrics),
3D slice concatenation (volume3d), and the experiment grid harness with its
report emitters (harness). A synthetic clustered-feature generator backs
tests and benchmarks.
"""

from .errors import (
    CbmirError,
    DimensionMismatchError,
    EvaluationError,
    ManifestError,
    ProvenanceError,
    RaggedGridError,
    SearchError,
    SetValidationError,
    StoreFormatError,
    VolumeError,
    ZeroNormError,
)
from .harness import (
    AverageRow,
    CellFailure,
    CellResult,
    ExperimentManifest,
    GridOutcome,
    KNOWN_MODEL_DIMS,
    ManifestCell,
    RangeRow,
    ReportInventory,
    aggregate_averages,
    emit_reports,
    load_cells_csv,
    load_manifest,
    robustness_ranges,
    run_cell,
    run_grid,
    save_manifest,
)
from .metrics import (
    MetricReport,
    RelevanceJudgment,
    Timing,
    acc_at_k,
    ap_at_k,
    evaluate,
    majority_label,
    map_at_k,
    mmv_at_k,
)
from .similarity import (
    BatchResult,
    Hit,
    QueryError,
    RankedResult,
    SearchIndex,
    batch_search,
    cosine_similarity,
    normalize,
    top_k_search,
)
from .store import (
    FeatureRecord,
    FeatureSet,
    ProvenanceMeta,
    Role,
    Violation,
    merge_feature_sets,
    read_feature_set,
    validate_feature_set,
    validation_warnings,
    write_feature_set,
)
from .synthetic import make_clustered_sets
from .volume3d import (
    SliceStack,
    VolumePlan,
    concat_slices,
    load_slice_stack,
    order_slice_paths,
    slice_filename,
    split_concatenated,
    split_volume_manifest,
)

__version__ = "0.1.0"

__all__ = [
    "AverageRow",
    "BatchResult",
    "CbmirError",
    "CellFailure",
    "CellResult",
    "DimensionMismatchError",
    "EvaluationError",
    "ExperimentManifest",
    "FeatureRecord",
    "FeatureSet",
    "GridOutcome",
    "Hit",
    "KNOWN_MODEL_DIMS",
    "ManifestCell",
    "ManifestError",
    "MetricReport",
    "ProvenanceError",
    "ProvenanceMeta",
    "QueryError",
    "RaggedGridError",
    "RangeRow",
    "RankedResult",
    "RelevanceJudgment",
    "ReportInventory",
    "Role",
    "SearchError",
    "SearchIndex",
    "SetValidationError",
    "SliceStack",
    "StoreFormatError",
    "Timing",
    "Violation",
    "VolumeError",
    "VolumePlan",
    "ZeroNormError",
    "acc_at_k",
    "aggregate_averages",
    "ap_at_k",
    "batch_search",
    "concat_slices",
    "cosine_similarity",
    "emit_reports",
    "evaluate",
    "load_cells_csv",
    "load_manifest",
    "load_slice_stack",
    "majority_label",
    "make_clustered_sets",
    "map_at_k",
    "merge_feature_sets",
    "mmv_at_k",
    "normalize",
    "order_slice_paths",
    "read_feature_set",
    "robustness_ranges",
    "run_cell",
    "run_grid",
    "save_manifest",
    "slice_filename",
    "split_concatenated",
    "split_volume_manifest",
    "top_k_search",
    "validate_feature_set",
    "validation_warnings",
    "write_feature_set",
]
