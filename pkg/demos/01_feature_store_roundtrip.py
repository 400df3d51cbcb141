"""Store labeled feature vectors in an FSET1 container and read them back.

The container is self-describing: model, dataset, image size, role, and
class count travel inside the file, so a grid run can verify it got the file
it was promised.
"""

import tempfile
from pathlib import Path

import numpy as np

from cbmir import (
    FeatureSet,
    ProvenanceMeta,
    Role,
    read_feature_set,
    validate_feature_set,
    write_feature_set,
)

rng = np.random.default_rng(42)

meta = ProvenanceMeta(
    model_name="VGG19",
    dataset_name="BreastMNIST",
    image_size=224,
    is_3d=False,
    num_classes=2,
    role=Role.DATABASE,
    extra=(("split", "train"),),
)
features = FeatureSet(
    item_ids=np.arange(546, dtype=np.uint64),
    labels=rng.integers(0, 2, size=546).astype(np.uint32),
    vectors=rng.standard_normal((546, 512)).astype(np.float32),
    meta=meta,
)
print(f"built a {len(features)}-record set, dim {features.dim}")
print(f"violations: {validate_feature_set(features)}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "breast_vgg19_224_train.fset"
    written = write_feature_set(features, path)
    print(f"wrote {written} bytes to {path.name}")

    back = read_feature_set(path)
    print(f"read back {len(back)} records of dim {back.dim}")
    print(f"model={back.meta.model_name} size={back.meta.image_size} extra={back.meta.extra}")
    print(f"bitwise round-trip: {back == features}")
