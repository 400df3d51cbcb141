import numpy as np

from cbmir.store import FeatureSet, ProvenanceMeta, Role


def make_meta(**overrides) -> ProvenanceMeta:
    base = dict(
        model_name="VGG19",
        dataset_name="BreastMNIST",
        image_size=28,
        is_3d=False,
        num_classes=2,
        role=Role.DATABASE,
    )
    base.update(overrides)
    return ProvenanceMeta(**base)


def make_set(vectors, labels=None, meta=None, ids=None, **meta_overrides) -> FeatureSet:
    """Build a FeatureSet from a vector matrix with sensible defaults."""
    vectors = np.asarray(vectors, dtype=np.float32)
    n = len(vectors)
    if labels is None:
        labels = np.zeros(n, dtype=np.uint32)
    labels = np.asarray(labels, dtype=np.uint32)
    if ids is None:
        ids = np.arange(n, dtype=np.uint64)
    if meta is None:
        classes = int(labels.max()) + 1 if n else 2
        meta_overrides.setdefault("num_classes", max(2, classes))
        meta = make_meta(**meta_overrides)
    return FeatureSet(ids, labels, vectors, meta)


def random_set(rng, n, dim, classes=3, role=Role.DATABASE, **meta_overrides):
    """Continuous random vectors; near-ties are measure-zero by construction."""
    vectors = rng.standard_normal((n, dim)).astype(np.float32)
    labels = rng.integers(0, classes, size=n).astype(np.uint32)
    meta = make_meta(num_classes=classes, role=role, **meta_overrides)
    return FeatureSet(np.arange(n, dtype=np.uint64), labels, vectors, meta)
