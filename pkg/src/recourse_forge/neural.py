"""From-scratch MLP black-box classifier and autoencoder.

Both networks are plain numpy: ReLU hidden layers trained by seeded
mini-batch SGD. The classifier ends in a softmax; the autoencoder decoder
ends in a per-block head (sigmoid on continuous slots, softmax on each
categorical block) so every decoded vector is schema-valid by
construction. The reconstruction loss is mean squared error over
continuous slots plus one-minus-cosine per categorical block.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import SchemaError, TrainingError
from .tabular import CONTINUOUS, DatasetSchema, EncodedVector

MODEL_VERSION = 1

# Output-block entry: (kind, start, stop) per feature, in slot order.
Block = tuple[str, int, int]


def blocks_from_schema(schema: DatasetSchema) -> tuple[Block, ...]:
    out: list[Block] = []
    pos = 0
    for f in schema.features:
        kind = "cont" if f.kind == CONTINUOUS else "cat"
        out.append((kind, pos, pos + f.width))
        pos += f.width
    return tuple(out)


@dataclass
class MlpParams:
    """Weights and biases for one MLP; layer k maps size[k] -> size[k+1]."""

    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    output_activation: str  # "softmax" | "blocks" | "linear"
    hidden_activation: str = "relu"
    output_blocks: tuple[Block, ...] | None = None

    def validate(self) -> None:
        if len(self.layer_sizes) < 2:
            raise SchemaError("need at least input and output layer sizes")
        if len(self.weights) != len(self.layer_sizes) - 1:
            raise SchemaError("weight count does not chain layer sizes")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (self.layer_sizes[k + 1], self.layer_sizes[k])
            if w.shape != expect:
                raise SchemaError(f"layer {k}: weight shape {w.shape} != {expect}")
            if b.shape != (self.layer_sizes[k + 1],):
                raise SchemaError(f"layer {k}: bias shape {b.shape}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise SchemaError(f"layer {k}: non-finite parameters")
        if self.output_activation == "blocks" and self.output_blocks is None:
            raise SchemaError("blocks head requires output_blocks")

    @property
    def input_width(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_width(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "MlpParams":
        return MlpParams(
            layer_sizes=self.layer_sizes,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            output_activation=self.output_activation,
            hidden_activation=self.hidden_activation,
            output_blocks=self.output_blocks,
        )


@dataclass
class BlackBox:
    """Trained classifier queried (only) through :func:`predict`."""

    mlp: MlpParams
    schema_id: str


@dataclass
class Autoencoder:
    encoder: MlpParams
    decoder: MlpParams
    latent_dim: int

    def validate(self) -> None:
        self.encoder.validate()
        self.decoder.validate()
        if self.encoder.output_width != self.latent_dim:
            raise SchemaError("encoder output width != latent_dim")
        if self.decoder.input_width != self.latent_dim:
            raise SchemaError("decoder input width != latent_dim")
        if self.encoder.input_width != self.decoder.output_width:
            raise SchemaError("decoder output width != encoder input width")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 32
    learning_rate: float = 0.1
    seed: int = 0
    split: tuple[float, float, float] = (0.70, 0.15, 0.15)

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise TrainingError("learning_rate must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise TrainingError("epochs and batch_size must be >= 1")
        if abs(sum(self.split) - 1.0) > 1e-9:
            raise TrainingError("split fractions must sum to 1")


def init_mlp(
    layer_sizes: Sequence[int],
    output_activation: str,
    rng: np.random.Generator,
    output_blocks: tuple[Block, ...] | None = None,
) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    params = MlpParams(
        layer_sizes=tuple(int(s) for s in layer_sizes),
        weights=weights,
        biases=biases,
        output_activation=output_activation,
        output_blocks=output_blocks,
    )
    params.validate()
    return params


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ez = np.exp(x[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _apply_head(params: MlpParams, pre: np.ndarray) -> np.ndarray:
    if params.output_activation == "linear":
        return pre
    if params.output_activation == "softmax":
        return _softmax(pre)
    out = np.empty_like(pre)
    for kind, lo, hi in params.output_blocks:
        if kind == "cont":
            out[:, lo:hi] = _sigmoid(pre[:, lo:hi])
        else:
            out[:, lo:hi] = _softmax(pre[:, lo:hi])
    return out


def forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Batched forward pass; x is (n, input_width) or (input_width,)."""
    single = x.ndim == 1
    h = np.atleast_2d(np.asarray(x, float))
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        h = np.maximum(0.0, h @ w.T + b)
    pre = h @ params.weights[-1].T + params.biases[-1]
    out = _apply_head(params, pre)
    return out[0] if single else out


def _forward_cached(params: MlpParams, x: np.ndarray):
    """Forward pass keeping hidden activations for backprop."""
    hs = [np.atleast_2d(np.asarray(x, float))]
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        hs.append(np.maximum(0.0, hs[-1] @ w.T + b))
    pre = hs[-1] @ params.weights[-1].T + params.biases[-1]
    return hs, pre


def _backprop(params: MlpParams, hs: list[np.ndarray], d_pre: np.ndarray):
    """Given dL/d(pre-activation of output layer), return parameter grads."""
    gw = [np.zeros_like(w) for w in params.weights]
    gb = [np.zeros_like(b) for b in params.biases]
    delta = d_pre
    for k in range(len(params.weights) - 1, -1, -1):
        gw[k] = delta.T @ hs[k]
        gb[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ params.weights[k]) * (hs[k] > 0)
    return gw, gb


def classifier_loss_grads(params: MlpParams, x: np.ndarray, y: np.ndarray):
    """Mean cross-entropy and its parameter gradients."""
    n = x.shape[0]
    hs, pre = _forward_cached(params, x)
    probs = _softmax(pre)
    eps = 1e-12
    loss = -float(np.mean(np.log(probs[np.arange(n), y] + eps)))
    d_pre = probs.copy()
    d_pre[np.arange(n), y] -= 1.0
    d_pre /= n
    gw, gb = _backprop(params, hs, d_pre)
    return loss, gw, gb


def reconstruction_loss(
    x: np.ndarray, out: np.ndarray, blocks: tuple[Block, ...]
) -> float:
    """Composite distance: MSE over continuous slots + (1 - cosine) per
    categorical block, averaged over rows."""
    x = np.atleast_2d(x)
    out = np.atleast_2d(out)
    n = x.shape[0]
    total = np.zeros(n)
    n_cont = sum(hi - lo for kind, lo, hi in blocks if kind == "cont")
    if n_cont:
        cont_idx = np.concatenate(
            [np.arange(lo, hi) for kind, lo, hi in blocks if kind == "cont"]
        )
        diff = x[:, cont_idx] - out[:, cont_idx]
        total += (diff * diff).sum(axis=1) / n_cont
    for kind, lo, hi in blocks:
        if kind != "cat":
            continue
        u = x[:, lo:hi]
        v = out[:, lo:hi]
        nu = np.maximum(np.linalg.norm(u, axis=1), 1e-12)
        nv = np.maximum(np.linalg.norm(v, axis=1), 1e-12)
        total += 1.0 - (u * v).sum(axis=1) / (nu * nv)
    return float(np.mean(total))


def autoencoder_loss_grads(enc: MlpParams, dec: MlpParams, x: np.ndarray):
    """Reconstruction loss and gradients for encoder and decoder."""
    x = np.atleast_2d(np.asarray(x, float))
    n = x.shape[0]
    blocks = dec.output_blocks
    hs_e, z = _forward_cached(enc, x)  # latent head is linear
    hs_d, pre = _forward_cached(dec, z)
    out = _apply_head(dec, pre)

    loss = reconstruction_loss(x, out, blocks)

    d_pre = np.zeros_like(pre)
    n_cont = sum(hi - lo for kind, lo, hi in blocks if kind == "cont")
    for kind, lo, hi in blocks:
        u = x[:, lo:hi]
        v = out[:, lo:hi]
        if kind == "cont":
            # d/da of (u - sigmoid(a))^2 / n_cont
            d_pre[:, lo:hi] = 2.0 * (v - u) * v * (1.0 - v) / n_cont
        else:
            nu = np.maximum(np.linalg.norm(u, axis=1, keepdims=True), 1e-12)
            nv = np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-12)
            un = u / nu
            dot = (un * v).sum(axis=1, keepdims=True)
            # dL/dv of (1 - <un, v>/|v|)
            g = -(un / nv - dot * v / nv**3)
            # softmax Jacobian transpose
            d_pre[:, lo:hi] = v * (g - (v * g).sum(axis=1, keepdims=True))
    d_pre /= n

    gw_d, gb_d = _backprop(dec, hs_d, d_pre)
    # gradient flowing back into the latent vector
    delta = d_pre
    for k in range(len(dec.weights) - 1, 0, -1):
        delta = (delta @ dec.weights[k]) * (hs_d[k] > 0)
    d_z = delta @ dec.weights[0]

    gw_e, gb_e = _backprop(enc, hs_e, d_z)
    return loss, gw_e, gb_e, gw_d, gb_d


def _split_indexes(n: int, split: tuple[float, float, float], rng: np.random.Generator):
    order = rng.permutation(n)
    n_train = int(round(split[0] * n))
    n_val = int(round(split[1] * n))
    return order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :]


def _sgd(
    params_list: list[MlpParams],
    grad_fn,
    x: np.ndarray,
    y: np.ndarray | None,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> None:
    n = x.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb = x[idx]
            yb = None if y is None else y[idx]
            loss, grads = grad_fn(xb, yb)
            epoch_loss += loss
            batches += 1
            for params, (gw, gb) in zip(params_list, grads):
                for k in range(len(params.weights)):
                    params.weights[k] -= cfg.learning_rate * gw[k]
                    params.biases[k] -= cfg.learning_rate * gb[k]
        if not np.isfinite(epoch_loss / max(batches, 1)):
            raise TrainingError(
                f"loss diverged at epoch {epoch}; try a lower learning rate"
            )


def train_blackbox(
    x: np.ndarray,
    y: np.ndarray,
    arch: Sequence[int],
    cfg: TrainConfig,
    schema: DatasetSchema | None = None,
) -> tuple[BlackBox, float]:
    """Train the classifier; returns it with held-out (validation) accuracy."""
    x = np.asarray(x, float)
    y = np.asarray(y, int)
    if len(np.unique(y)) < 2:
        raise TrainingError("fewer than 2 classes in the training labels")
    if arch[0] != x.shape[1]:
        raise TrainingError(f"arch input width {arch[0]} != data width {x.shape[1]}")
    if schema is not None:
        if arch[0] != schema.encoded_width or arch[-1] != len(schema.target_labels):
            raise TrainingError("arch widths do not match schema")
    if arch[-1] < int(y.max()) + 1:
        raise TrainingError("arch output width smaller than number of classes")

    rng = np.random.default_rng(cfg.seed)
    params = init_mlp(arch, "softmax", rng)
    idx_train, idx_val, _ = _split_indexes(x.shape[0], cfg.split, rng)
    if len(np.unique(y[idx_train])) < 2:
        raise TrainingError("fewer than 2 classes in the training split")

    def grad_fn(xb, yb):
        loss, gw, gb = classifier_loss_grads(params, xb, yb)
        return loss, [(gw, gb)]

    _sgd([params], grad_fn, x[idx_train], y[idx_train], cfg, rng)

    eval_idx = idx_val if len(idx_val) else idx_train
    preds = np.argmax(forward(params, x[eval_idx]), axis=1)
    accuracy = float(np.mean(preds == y[eval_idx]))
    schema_id = schema.fingerprint if schema is not None else ""
    return BlackBox(mlp=params, schema_id=schema_id), accuracy


def train_autoencoder(
    x: np.ndarray,
    encoder_arch: Sequence[int],
    cfg: TrainConfig,
    schema: DatasetSchema,
) -> tuple[Autoencoder, float]:
    """Train encoder plus mirrored decoder; returns final validation loss."""
    x = np.asarray(x, float)
    if encoder_arch[0] != schema.encoded_width:
        raise TrainingError("encoder input width does not match schema")
    rng = np.random.default_rng(cfg.seed)
    blocks = blocks_from_schema(schema)
    enc = init_mlp(encoder_arch, "linear", rng)
    dec = init_mlp(list(reversed(encoder_arch)), "blocks", rng, output_blocks=blocks)
    idx_train, idx_val, _ = _split_indexes(x.shape[0], cfg.split, rng)

    def grad_fn(xb, _):
        loss, gw_e, gb_e, gw_d, gb_d = autoencoder_loss_grads(enc, dec, xb)
        return loss, [(gw_e, gb_e), (gw_d, gb_d)]

    _sgd([enc, dec], grad_fn, x[idx_train], None, cfg, rng)

    eval_x = x[idx_val] if len(idx_val) else x[idx_train]
    recon = reconstruction_loss(eval_x, forward(dec, forward(enc, eval_x)), blocks)
    ae = Autoencoder(encoder=enc, decoder=dec, latent_dim=int(encoder_arch[-1]))
    ae.validate()
    return ae, recon


def predict(bb: BlackBox, x: EncodedVector | np.ndarray) -> tuple[int, np.ndarray]:
    """Label index (argmax, ties to the lowest index) and class probabilities."""
    data = x.data if isinstance(x, EncodedVector) else np.asarray(x, float)
    if data.shape[-1] != bb.mlp.input_width:
        raise SchemaError(
            f"input width {data.shape[-1]} != model width {bb.mlp.input_width}"
        )
    probs = forward(bb.mlp, data)
    return int(np.argmax(probs)), probs


def predict_batch(bb: BlackBox, x: np.ndarray) -> np.ndarray:
    if x.shape[1] != bb.mlp.input_width:
        raise SchemaError("input width mismatch")
    return np.argmax(forward(bb.mlp, x), axis=1)


def encode_latent(ae: Autoencoder, x: EncodedVector | np.ndarray) -> np.ndarray:
    data = x.data if isinstance(x, EncodedVector) else np.asarray(x, float)
    if data.shape[-1] != ae.encoder.input_width:
        raise SchemaError("input width mismatch")
    return forward(ae.encoder, data)


def decode_latent(ae: Autoencoder, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, float)
    if z.shape[-1] != ae.latent_dim:
        raise SchemaError("latent width mismatch")
    return forward(ae.decoder, z)


# --- parameter flattening (finite-difference checks, artifacts) -----------


def flatten_params(params: MlpParams) -> np.ndarray:
    parts = []
    for w, b in zip(params.weights, params.biases):
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts)


def set_flat_params(params: MlpParams, flat: np.ndarray) -> None:
    pos = 0
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        params.weights[k] = flat[pos : pos + w.size].reshape(w.shape)
        pos += w.size
        params.biases[k] = flat[pos : pos + b.size].copy()
        pos += b.size


def mlp_to_dict(params: MlpParams) -> dict:
    return {
        "layer_sizes": list(params.layer_sizes),
        "weights": [w.ravel().tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
        "hidden_activation": params.hidden_activation,
        "output_activation": params.output_activation,
        "output_blocks": (
            [list(b) for b in params.output_blocks] if params.output_blocks else None
        ),
    }


def mlp_from_dict(doc: dict) -> MlpParams:
    sizes = tuple(doc["layer_sizes"])
    weights = [
        np.array(flat, float).reshape(sizes[k + 1], sizes[k])
        for k, flat in enumerate(doc["weights"])
    ]
    biases = [np.array(b, float) for b in doc["biases"]]
    blocks = doc.get("output_blocks")
    params = MlpParams(
        layer_sizes=sizes,
        weights=weights,
        biases=biases,
        output_activation=doc["output_activation"],
        hidden_activation=doc.get("hidden_activation", "relu"),
        output_blocks=tuple((k, lo, hi) for k, lo, hi in blocks) if blocks else None,
    )
    params.validate()
    return params


def blackbox_to_dict(bb: BlackBox, meta: dict | None = None) -> dict:
    return {
        "version": MODEL_VERSION,
        "kind": "blackbox",
        "schema_id": bb.schema_id,
        "mlp": mlp_to_dict(bb.mlp),
        "meta": meta or {},
    }


def blackbox_from_dict(doc: dict) -> BlackBox:
    if doc.get("version") != MODEL_VERSION or doc.get("kind") != "blackbox":
        raise SchemaError("not a blackbox artifact")
    return BlackBox(mlp=mlp_from_dict(doc["mlp"]), schema_id=doc.get("schema_id", ""))


def autoencoder_to_dict(ae: Autoencoder, meta: dict | None = None) -> dict:
    return {
        "version": MODEL_VERSION,
        "kind": "autoencoder",
        "latent_dim": ae.latent_dim,
        "encoder": mlp_to_dict(ae.encoder),
        "decoder": mlp_to_dict(ae.decoder),
        "meta": meta or {},
    }


def autoencoder_from_dict(doc: dict) -> Autoencoder:
    if doc.get("version") != MODEL_VERSION or doc.get("kind") != "autoencoder":
        raise SchemaError("not an autoencoder artifact")
    ae = Autoencoder(
        encoder=mlp_from_dict(doc["encoder"]),
        decoder=mlp_from_dict(doc["decoder"]),
        latent_dim=int(doc["latent_dim"]),
    )
    ae.validate()
    return ae
