"""Shared fixtures: the trained blobs pipeline and a hand-built bundle
with exactly known geometry (diagonal sigmoid decoder, threshold black
box) for tests that need analytic expectations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest

from recourse_forge.fixtures import make_blobs
from recourse_forge.neural import (
    Autoencoder,
    BlackBox,
    MlpParams,
    TrainConfig,
    train_autoencoder,
    train_blackbox,
)
from recourse_forge.surrogate import (
    Hyperplane,
    PlaneKind,
    ROLE_CONTINUOUS,
    ROLE_PREDICTION,
    SamplerConfig,
    SurrogateBundle,
    build_surrogate,
)
from recourse_forge.tabular import (
    CATEGORICAL,
    CONTINUOUS,
    DatasetSchema,
    FeatureSpec,
    RawRow,
    encode_table,
    labels_of,
)


@dataclass
class BlobsPipeline:
    schema: DatasetSchema
    rows: list
    x: np.ndarray
    y: np.ndarray
    blackbox: BlackBox
    accuracy: float
    autoencoder: Autoencoder
    recon_loss: float
    bundle: SurrogateBundle
    test_rows: list


def train_blobs_pipeline(
    n: int = 500, seed: int = 7, surrogate_seed: int = 11
) -> BlobsPipeline:
    schema, rows = make_blobs(n, seed=seed)
    x = encode_table(rows, schema)
    y = labels_of(rows, schema)
    bb, accuracy = train_blackbox(
        x, y, [2, 8, 2], TrainConfig(epochs=300, learning_rate=0.5, seed=seed), schema
    )
    ae, recon = train_autoencoder(
        x, [2, 2], TrainConfig(epochs=400, learning_rate=0.5, seed=seed), schema
    )
    bundle = build_surrogate(ae, bb, schema, x, seed=surrogate_seed)
    _, test_rows = make_blobs(60, seed=seed + 1)
    return BlobsPipeline(
        schema=schema,
        rows=rows,
        x=x,
        y=y,
        blackbox=bb,
        accuracy=accuracy,
        autoencoder=ae,
        recon_loss=recon,
        bundle=bundle,
        test_rows=test_rows,
    )


@pytest.fixture(scope="session")
def blobs() -> BlobsPipeline:
    return train_blobs_pipeline()


def train_mixed_pipeline(n: int = 300, seed: int = 12) -> BlobsPipeline:
    """Blobs plus one label-independent binary categorical feature."""
    rng = np.random.default_rng(seed)
    base_schema, base_rows = make_blobs(n, seed=seed)
    schema = DatasetSchema(
        features=base_schema.features
        + (FeatureSpec(name="grp", kind=CATEGORICAL, categories=("a", "b")),),
        target_name="label",
        target_labels=("0", "1"),
    )
    rows = [
        RawRow({**r.values, "grp": str(rng.choice(["a", "b"]))}) for r in base_rows
    ]
    x = encode_table(rows, schema)
    y = labels_of(rows, schema)
    bb, accuracy = train_blackbox(
        x, y, [4, 8, 2], TrainConfig(epochs=150, learning_rate=0.3, seed=1), schema
    )
    ae, recon = train_autoencoder(
        x, [4, 3], TrainConfig(epochs=150, learning_rate=0.3, seed=1), schema
    )
    bundle = build_surrogate(ae, bb, schema, x, k=800, seed=2)
    return BlobsPipeline(
        schema=schema,
        rows=rows,
        x=x,
        y=y,
        blackbox=bb,
        accuracy=accuracy,
        autoencoder=ae,
        recon_loss=recon,
        bundle=bundle,
        test_rows=rows[:20],
    )


@pytest.fixture(scope="session")
def mixed() -> BlobsPipeline:
    return train_mixed_pipeline()


def make_synthetic_bundle(
    n_features: int = 2,
    gain: float = 8.0,
    sharpness: float = 40.0,
    threshold_feature: int = 0,
    threshold: float = 0.5,
    immutable: tuple[str, ...] = (),
) -> SurrogateBundle:
    """Hand-assembled bundle with exactly known geometry.

    Decoder: x_j = sigmoid(gain * z_j) per slot, so slot j's contours in
    latent space are exactly the planes {z_j = const} and z = 0 decodes to
    the all-0.5 row. Encoder: the linearization z = (x - 0.5) * 4/gain.
    Black box: label "1" iff slot `threshold_feature` > `threshold`.
    Feature planes carry the exact normals e_j; the prediction plane is
    {z_t = z*(threshold)} with positive label "1".
    """
    names = [f"f{j + 1}" for j in range(n_features)]
    schema = DatasetSchema(
        features=tuple(
            FeatureSpec(
                name=name,
                kind=CONTINUOUS,
                min=0.0,
                max=1.0,
                mad=0.25,
                mutable=name not in immutable,
            )
            for name in names
        ),
        target_name="label",
        target_labels=("0", "1"),
    )
    d = n_features
    encoder = MlpParams(
        layer_sizes=(d, d),
        weights=[np.eye(d) * (4.0 / gain)],
        biases=[np.full(d, -2.0 / gain)],
        output_activation="linear",
    )
    decoder = MlpParams(
        layer_sizes=(d, d),
        weights=[np.eye(d) * gain],
        biases=[np.zeros(d)],
        output_activation="blocks",
        output_blocks=tuple(("cont", j, j + 1) for j in range(d)),
    )
    ae = Autoencoder(encoder=encoder, decoder=decoder, latent_dim=d)
    ae.validate()

    t = threshold_feature
    w_bb = np.zeros((2, d))
    w_bb[0, t] = -sharpness
    w_bb[1, t] = sharpness
    bb_mlp = MlpParams(
        layer_sizes=(d, 2),
        weights=[w_bb],
        biases=[np.array([sharpness * threshold, -sharpness * threshold])],
        output_activation="softmax",
    )
    bb = BlackBox(mlp=bb_mlp, schema_id=schema.fingerprint)

    # z-value whose decoded slot equals the threshold
    z_star = np.log(threshold / (1.0 - threshold)) / gain
    e_t = np.zeros(d)
    e_t[t] = 1.0
    prediction_plane = Hyperplane(
        normal=e_t,
        offset=-z_star,
        kind=PlaneKind(ROLE_PREDICTION, positive="1"),
        fit_quality=1.0,
    )
    feature_planes = {}
    for j, name in enumerate(names):
        e_j = np.zeros(d)
        e_j[j] = 1.0
        # linearized surrogate value: 0.5 + (gain/4) * z_j
        feature_planes[name] = Hyperplane(
            normal=e_j * (gain / 4.0),
            offset=0.5,
            kind=PlaneKind(ROLE_CONTINUOUS, feature=name),
            fit_quality=1.0,
        )
    return SurrogateBundle(
        autoencoder=ae,
        blackbox=bb,
        schema=schema,
        feature_planes=feature_planes,
        category_planes={},
        prediction_plane=prediction_plane,
        sample_count=0,
        sampler=SamplerConfig(mu=np.zeros(d), sigma=np.ones(d)),
        seed=0,
    )


def synthetic_row(bundle: SurrogateBundle, values: dict[str, float]) -> RawRow:
    base = {f.name: 0.5 for f in bundle.schema.features}
    base.update(values)
    base["label"] = "0"
    return RawRow(base)


@pytest.fixture()
def synthetic_bundle() -> SurrogateBundle:
    return make_synthetic_bundle()
