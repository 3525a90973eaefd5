import json

import numpy as np
import pytest

from recourse_forge.errors import SchemaError, TrainingError
from recourse_forge.neural import (
    Autoencoder,
    BlackBox,
    MlpParams,
    TrainConfig,
    autoencoder_from_dict,
    autoencoder_to_dict,
    autoencoder_loss_grads,
    blackbox_from_dict,
    blackbox_to_dict,
    blocks_from_schema,
    classifier_loss_grads,
    decode_latent,
    encode_latent,
    flatten_params,
    forward,
    init_mlp,
    predict,
    reconstruction_loss,
    set_flat_params,
    train_autoencoder,
    train_blackbox,
)
from recourse_forge.tabular import (
    CATEGORICAL,
    CONTINUOUS,
    DatasetSchema,
    FeatureSpec,
)

FD_STEP = 1e-5
FD_RTOL = 1e-4


def fd_gradient(loss_fn, params: MlpParams) -> np.ndarray:
    """Central finite differences over the flattened parameter vector."""
    flat = flatten_params(params)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        for sign in (+1, -1):
            probe = flat.copy()
            probe[i] += sign * FD_STEP
            set_flat_params(params, probe)
            grad[i] += sign * loss_fn()
    set_flat_params(params, flat)
    return grad / (2 * FD_STEP)


def grads_close(analytic: np.ndarray, numeric: np.ndarray) -> bool:
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / denom)) <= FD_RTOL


def flatten_grads(gw, gb) -> np.ndarray:
    parts = []
    for w, b in zip(gw, gb):
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts)


def jitter_biases(params: MlpParams, rng) -> None:
    """Move the check point away from ReLU kinks (where the derivative
    does not exist and finite differences legitimately disagree)."""
    for k in range(len(params.biases)):
        params.biases[k] = rng.uniform(0.05, 0.3, size=params.biases[k].shape) * (
            rng.integers(0, 2, size=params.biases[k].shape) * 2 - 1
        )


def min_kink_distance(params: MlpParams, x: np.ndarray) -> float:
    h = np.atleast_2d(x)
    worst = np.inf
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        pre = h @ w.T + b
        worst = min(worst, float(np.abs(pre).min()))
        h = np.maximum(0.0, pre)
    return worst


def random_small_schema(rng) -> DatasetSchema:
    feats = []
    width = 0
    for i in range(int(rng.integers(2, 4))):
        if rng.random() < 0.5:
            feats.append(FeatureSpec(name=f"c{i}", kind=CONTINUOUS, min=0, max=1, mad=0.2))
            width += 1
        else:
            n_cat = int(rng.integers(2, 4))
            feats.append(
                FeatureSpec(
                    name=f"k{i}",
                    kind=CATEGORICAL,
                    categories=tuple(f"v{j}" for j in range(n_cat)),
                )
            )
            width += n_cat
    return DatasetSchema(features=tuple(feats), target_name="y", target_labels=("0", "1"))


def random_hard_rows(schema, rng, n):
    x = np.zeros((n, schema.encoded_width))
    for i in range(n):
        for f in schema.features:
            block = schema.block(f.name)
            if f.kind == CONTINUOUS:
                x[i, block] = rng.uniform(0, 1)
            else:
                x[i, block.start + int(rng.integers(0, f.width))] = 1.0
    return x


def random_classifier_problem(rng, max_tries: int = 20):
    """Random small net and batch, regenerated until the check point is
    safely away from every ReLU kink."""
    for _ in range(max_tries):
        sizes = [int(rng.integers(2, 9)) for _ in range(int(rng.integers(2, 4)))]
        sizes.append(int(rng.integers(2, 5)))
        params = init_mlp(sizes, "softmax", rng)
        jitter_biases(params, rng)
        x = rng.normal(size=(6, sizes[0]))
        y = rng.integers(0, sizes[-1], size=6)
        if min_kink_distance(params, x) > 1e-3:
            return params, x, y
    raise AssertionError("could not find a kink-free check point")


def random_autoencoder_problem(rng, max_tries: int = 20):
    for _ in range(max_tries):
        schema = random_small_schema(rng)
        width = schema.encoded_width
        latent = int(rng.integers(2, min(8, width) + 1))
        enc_sizes = [width, latent] if rng.random() < 0.5 else [width, 6, latent]
        dec_sizes = list(reversed(enc_sizes))
        enc = init_mlp(enc_sizes, "linear", rng)
        dec = init_mlp(dec_sizes, "blocks", rng, output_blocks=blocks_from_schema(schema))
        jitter_biases(enc, rng)
        jitter_biases(dec, rng)
        x = random_hard_rows(schema, rng, 5)
        if min_kink_distance(enc, x) > 1e-3:
            latent_pts = forward(enc, x)
            if min_kink_distance(dec, latent_pts) > 1e-3:
                return enc, dec, x
    raise AssertionError("could not find a kink-free check point")


class TestGradients:
    @pytest.mark.parametrize("seed", range(4))
    def test_classifier_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        params, x, y = random_classifier_problem(rng)
        _, gw, gb = classifier_loss_grads(params, x, y)
        numeric = fd_gradient(lambda: classifier_loss_grads(params, x, y)[0], params)
        assert grads_close(flatten_grads(gw, gb), numeric)

    @pytest.mark.parametrize("seed", range(4))
    def test_autoencoder_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(100 + seed)
        enc, dec, x = random_autoencoder_problem(rng)
        _, gw_e, gb_e, gw_d, gb_d = autoencoder_loss_grads(enc, dec, x)
        num_e = fd_gradient(lambda: autoencoder_loss_grads(enc, dec, x)[0], enc)
        num_d = fd_gradient(lambda: autoencoder_loss_grads(enc, dec, x)[0], dec)
        assert grads_close(flatten_grads(gw_e, gb_e), num_e)
        assert grads_close(flatten_grads(gw_d, gb_d), num_d)


class TestReconstructionLoss:
    def test_perfect_reconstruction_is_zero(self):
        blocks = (("cont", 0, 1), ("cat", 1, 3))
        x = np.array([[0.4, 1.0, 0.0]])
        assert reconstruction_loss(x, x, blocks) == 0.0

    def test_cosine_of_equal_and_orthogonal_one_hots(self):
        blocks = (("cat", 0, 2),)
        same = reconstruction_loss(np.array([[1.0, 0.0]]), np.array([[1.0, 0.0]]), blocks)
        different = reconstruction_loss(np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]]), blocks)
        assert same == 0.0
        assert different == 1.0


def separable_blobs(n=200, margin=1.0, seed=0):
    """Two clusters split on the first coordinate with a gap of `margin`."""
    rng = np.random.default_rng(seed)
    half = n // 2
    x0 = np.column_stack([rng.uniform(-3, -margin / 2, half), rng.normal(0, 1, half)])
    x1 = np.column_stack([rng.uniform(margin / 2, 3, half), rng.normal(0, 1, half)])
    x = np.vstack([x0, x1])
    y = np.array([0] * half + [1] * half)
    order = rng.permutation(n)
    return x[order], y[order]


class TestBlackboxTraining:
    def test_linearly_separable_blobs(self):
        x, y = separable_blobs(200, margin=1.0, seed=1)
        # hand-fit threshold certifies separability before any training
        assert ((x[:, 0] > 0).astype(int) == y).all()
        bb, acc = train_blackbox(
            x, y, [2, 8, 2], TrainConfig(epochs=200, learning_rate=0.1, seed=3)
        )
        assert acc >= 0.95

    def test_single_class_errors(self):
        x = np.random.default_rng(0).normal(size=(50, 2))
        with pytest.raises(TrainingError, match="fewer than 2 classes"):
            train_blackbox(x, np.zeros(50, int), [2, 2], TrainConfig())

    def test_same_seed_is_bit_identical(self):
        x, y = separable_blobs(120, seed=5)
        cfg = TrainConfig(epochs=50, learning_rate=0.1, seed=11)
        bb1, acc1 = train_blackbox(x, y, [2, 4, 2], cfg)
        bb2, acc2 = train_blackbox(x, y, [2, 4, 2], cfg)
        assert acc1 == acc2
        for w1, w2 in zip(bb1.mlp.weights, bb2.mlp.weights):
            assert np.array_equal(w1, w2)
        for b1, b2 in zip(bb1.mlp.biases, bb2.mlp.biases):
            assert np.array_equal(b1, b2)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_names_epoch(self):
        x, y = separable_blobs(80, seed=2)
        with pytest.raises(TrainingError, match="epoch.*learning rate"):
            train_blackbox(
                x * 1e3, y, [2, 8, 2], TrainConfig(epochs=30, learning_rate=1e9, seed=0)
            )

    def test_arch_width_mismatch(self):
        x, y = separable_blobs(40, seed=2)
        with pytest.raises(TrainingError, match="width"):
            train_blackbox(x, y, [3, 2], TrainConfig())


class TestPredict:
    def test_probs_sum_to_one(self):
        rng = np.random.default_rng(0)
        params = init_mlp([3, 5, 4], "softmax", rng)
        bb = BlackBox(mlp=params, schema_id="")
        for _ in range(10):
            _, probs = predict(bb, rng.normal(size=3))
            assert probs.sum() == pytest.approx(1.0, abs=1e-6)

    def test_equal_logits_tie_to_lowest_index(self):
        params = MlpParams(
            layer_sizes=(2, 3),
            weights=[np.zeros((3, 2))],
            biases=[np.zeros(3)],
            output_activation="softmax",
        )
        label, _ = predict(BlackBox(mlp=params, schema_id=""), np.array([1.0, -1.0]))
        assert label == 0

    def test_hand_set_logits(self):
        params = MlpParams(
            layer_sizes=(1, 2),
            weights=[np.array([[0.0], [0.0]])],
            biases=[np.array([2.0, 1.0])],
            output_activation="softmax",
        )
        label, probs = predict(BlackBox(mlp=params, schema_id=""), np.array([0.3]))
        assert label == 0
        assert probs[0] > probs[1]

    def test_width_mismatch(self):
        params = init_mlp([4, 2], "softmax", np.random.default_rng(0))
        with pytest.raises(SchemaError, match="width"):
            predict(BlackBox(mlp=params, schema_id=""), np.zeros(3))


def all_continuous_schema(width):
    return DatasetSchema(
        features=tuple(
            FeatureSpec(name=f"v{i}", kind=CONTINUOUS, min=0, max=1, mad=0.2)
            for i in range(width)
        ),
        target_name="y",
        target_labels=("0", "1"),
    )


class TestAutoencoder:
    def test_identity_capable_training(self):
        """A hand-built near-identity parameterization certifies the loss
        floor is tiny, so training a linear net with latent = width must
        land under 0.05."""
        rng = np.random.default_rng(8)
        schema = all_continuous_schema(3)
        x = rng.uniform(0, 1, size=(50, 3))
        blocks = blocks_from_schema(schema)

        gain = 8.0
        enc = MlpParams((3, 3), [np.eye(3)], [np.zeros(3)], "linear")
        dec = MlpParams(
            (3, 3),
            [np.eye(3) * gain],
            [np.full(3, -gain / 2)],
            "blocks",
            output_blocks=blocks,
        )
        oracle_loss = reconstruction_loss(x, forward(dec, forward(enc, x)), blocks)
        assert oracle_loss < 0.02

        ae, recon = train_autoencoder(
            x, [3, 3], TrainConfig(epochs=500, learning_rate=0.5, seed=1), schema
        )
        assert recon < 0.05

    def test_decoded_categorical_block_sums_to_one(self):
        rng = np.random.default_rng(3)
        schema = DatasetSchema(
            features=(
                FeatureSpec(name="v", kind=CONTINUOUS, min=0, max=1, mad=0.1),
                FeatureSpec(name="c", kind=CATEGORICAL, categories=("a", "b", "c")),
            ),
            target_name="y",
            target_labels=("0", "1"),
        )
        enc = init_mlp([4, 2], "linear", rng)
        dec = init_mlp([2, 4], "blocks", rng, output_blocks=blocks_from_schema(schema))
        ae = Autoencoder(encoder=enc, decoder=dec, latent_dim=2)
        out = decode_latent(ae, rng.normal(size=2))
        assert out[schema.block("c")].sum() == pytest.approx(1.0)
        assert 0 < out[0] < 1

    def test_zero_weight_encoder_returns_biases(self):
        enc = MlpParams(
            (3, 2), [np.zeros((2, 3))], [np.array([0.7, -0.2])], "linear"
        )
        dec = init_mlp([2, 3], "blocks", np.random.default_rng(0),
                       output_blocks=(("cont", 0, 1), ("cont", 1, 2), ("cont", 2, 3)))
        ae = Autoencoder(encoder=enc, decoder=dec, latent_dim=2)
        z = encode_latent(ae, np.array([0.1, 0.9, 0.5]))
        assert np.allclose(z, [0.7, -0.2])

    def test_heldout_reconstruction_tracks_val_loss(self, blobs):
        blocks = blocks_from_schema(blobs.schema)
        out = decode_latent(blobs.autoencoder, encode_latent(blobs.autoencoder, blobs.x))
        mean_recon = reconstruction_loss(blobs.x, out, blocks)
        assert mean_recon <= 2 * blobs.recon_loss + 1e-6

    def test_same_seed_autoencoder_deterministic(self):
        rng = np.random.default_rng(4)
        schema = all_continuous_schema(2)
        x = rng.uniform(0, 1, size=(60, 2))
        cfg = TrainConfig(epochs=40, learning_rate=0.3, seed=9)
        ae1, r1 = train_autoencoder(x, [2, 2], cfg, schema)
        ae2, r2 = train_autoencoder(x, [2, 2], cfg, schema)
        assert r1 == r2
        for w1, w2 in zip(ae1.decoder.weights, ae2.decoder.weights):
            assert np.array_equal(w1, w2)


class TestArtifactRoundTrip:
    def test_blackbox_bit_exact(self):
        rng = np.random.default_rng(5)
        bb = BlackBox(mlp=init_mlp([3, 5, 2], "softmax", rng), schema_id="abc")
        doc = json.loads(json.dumps(blackbox_to_dict(bb, meta={"note": 1})))
        back = blackbox_from_dict(doc)
        assert back.schema_id == "abc"
        for w1, w2 in zip(bb.mlp.weights, back.mlp.weights):
            assert np.array_equal(w1, w2)
        for b1, b2 in zip(bb.mlp.biases, back.mlp.biases):
            assert np.array_equal(b1, b2)

    def test_autoencoder_bit_exact(self):
        rng = np.random.default_rng(6)
        schema = all_continuous_schema(3)
        enc = init_mlp([3, 2], "linear", rng)
        dec = init_mlp([2, 3], "blocks", rng, output_blocks=blocks_from_schema(schema))
        ae = Autoencoder(encoder=enc, decoder=dec, latent_dim=2)
        doc = json.loads(json.dumps(autoencoder_to_dict(ae)))
        back = autoencoder_from_dict(doc)
        z = np.array([0.3, -1.2])
        assert np.array_equal(decode_latent(ae, z), decode_latent(back, z))
