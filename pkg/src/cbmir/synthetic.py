"""Class-clustered Gaussian feature sets for tests and benchmarks.

Each class gets a centroid on its own coordinate axis, scaled so that every
pair of centroids sits exactly ``sep`` apart; samples add unit-variance
isotropic noise. ``sep`` therefore reads as inter-centroid distance in
units of intra-class standard deviation: sep=20 gives clusters a retrieval
engine should separate perfectly, sep=0 collapses everything to one blob
where ACC@1 lands at chance level.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import CbmirError
from .store import FeatureSet, ProvenanceMeta, Role


def make_clustered_sets(
    classes: int,
    per_class: int,
    dim: int,
    sep: float,
    seed: int,
    image_size: int = 28,
    model_name: str = "synthetic",
    dataset_name: str = "synthetic",
    queries_per_class: int | None = None,
) -> tuple[FeatureSet, FeatureSet]:
    """Draw a (database, query) pair from the same class-cluster mixture.

    The database holds ``per_class`` samples per class; queries default to a
    quarter of that (at least one per class). Records are grouped by class
    with item_ids numbered 0..n-1, and both sets carry matching provenance
    apart from the role flag.
    """
    if classes < 1:
        raise CbmirError(f"classes must be >= 1, got {classes}")
    if per_class < 1:
        raise CbmirError(f"per_class must be >= 1, got {per_class}")
    if classes > dim:
        raise CbmirError(
            f"need dim >= classes to place {classes} equidistant centroids, "
            f"got dim {dim}"
        )
    if sep < 0:
        raise CbmirError(f"sep must be >= 0, got {sep}")
    if queries_per_class is None:
        queries_per_class = max(1, per_class // 4)

    # Centroid c = (sep / sqrt(2)) * e_c, so ||centroid_i - centroid_j|| is
    # exactly sep for every pair.
    centroids = np.zeros((classes, dim))
    scale = sep / math.sqrt(2.0)
    for c in range(classes):
        centroids[c, c] = scale

    rng = np.random.default_rng(seed)

    def draw(count_per_class: int, role: Role) -> FeatureSet:
        n = classes * count_per_class
        labels = np.repeat(np.arange(classes, dtype=np.uint32), count_per_class)
        noise = rng.standard_normal((n, dim))
        vectors = (centroids[labels] + noise).astype(np.float32)
        meta = ProvenanceMeta(
            model_name=model_name,
            dataset_name=dataset_name,
            image_size=image_size,
            is_3d=False,
            num_classes=classes,
            role=role,
        )
        return FeatureSet(
            item_ids=np.arange(n, dtype=np.uint64),
            labels=labels,
            vectors=vectors,
            meta=meta,
        )

    database = draw(per_class, Role.DATABASE)
    queries = draw(queries_per_class, Role.QUERY)
    return database, queries
