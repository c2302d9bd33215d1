"""Network architectures and training loops.

The classifier is a stack of linear/relu/batch-norm/dropout blocks over an
embedding front end with a softmax output. The autoencoder and its
variational variant share the front end and reconstruct mixed-type rows
through one softmax head per discrete feature plus linear heads for
continuous features.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..data import Dataset, Encoder, schema_from_dict, schema_to_dict
from .core import (
    BatchNorm,
    Dense,
    Dropout,
    FeatureEmbedder,
    Relu,
    Sequential,
    check_finite,
    softmax,
    softmax_cross_entropy,
)
from .optim import Adam, PlateauScheduler

CHECKPOINT_FORMAT = "sedg-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LrndBlockConfig:
    width: int
    dropout_rate: float = 0.25

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("block width must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")


@dataclass(frozen=True)
class NnModelConfig:
    embedding_dim: int = 8
    blocks: tuple[LrndBlockConfig, ...] = (
        LrndBlockConfig(128), LrndBlockConfig(64), LrndBlockConfig(32),
    )
    output_classes: int = 21

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("need at least one block")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    plateau_patience: int = 10
    plateau_factor: float = 0.1
    max_epochs: int = 100
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.plateau_factor < 1.0:
            raise ValueError("plateau_factor must be in (0, 1)")


class ReconHead:
    """Maps a flat decoder output onto per-feature reconstruction targets.

    Discrete features get a softmax segment scored by cross entropy against
    the true code; continuous features get one linear output scored by
    squared error. Losses sum over features and average over the batch.
    """

    def __init__(self, columns):
        self.columns = columns
        self.segments = []
        offset = 0
        for j, c in enumerate(columns):
            width = c["n_values"] if c["kind"] == "discrete" else 1
            self.segments.append((j, c["kind"], offset, width))
            offset += width
        self.width = offset

    def loss_and_grad(self, out: np.ndarray, x_encoded: np.ndarray):
        n = out.shape[0]
        grad = np.zeros_like(out)
        loss = 0.0
        for j, kind, off, width in self.segments:
            seg = out[:, off:off + width]
            if kind == "discrete":
                codes = x_encoded[:, j].astype(np.int64)
                seg_loss, seg_grad = softmax_cross_entropy(seg, codes)
                loss += seg_loss
                grad[:, off:off + width] = seg_grad
            else:
                err = seg - x_encoded[:, j:j + 1]
                loss += float((err**2).sum() / n)
                grad[:, off:off + width] = 2.0 * err / n
        return loss, grad

    def to_encoded_rows(self, out: np.ndarray) -> np.ndarray:
        """Collapse head outputs to encoded-space rows (argmax codes, raw
        continuous predictions)."""
        rows = np.empty((out.shape[0], len(self.columns)), dtype=np.float64)
        for j, kind, off, width in self.segments:
            seg = out[:, off:off + width]
            rows[:, j] = np.argmax(seg, axis=1) if kind == "discrete" else seg[:, 0]
        return rows

    def prob_repr(self, out: np.ndarray) -> np.ndarray:
        """Differentiable sample representation: per-feature softmax probs
        plus continuous outputs (what a discriminator consumes for fakes)."""
        rep = np.empty_like(out)
        for _, kind, off, width in self.segments:
            seg = out[:, off:off + width]
            rep[:, off:off + width] = softmax(seg) if kind == "discrete" else seg
        return rep

    def prob_repr_backward(self, out: np.ndarray, grad_rep: np.ndarray) -> np.ndarray:
        grad = np.empty_like(out)
        for _, kind, off, width in self.segments:
            g = grad_rep[:, off:off + width]
            if kind == "discrete":
                p = softmax(out[:, off:off + width])
                grad[:, off:off + width] = p * (g - (g * p).sum(axis=1, keepdims=True))
            else:
                grad[:, off:off + width] = g
        return grad

    def onehot_repr(self, x_encoded: np.ndarray) -> np.ndarray:
        """Real-sample representation matching prob_repr's layout."""
        rep = np.zeros((x_encoded.shape[0], self.width))
        for j, kind, off, width in self.segments:
            if kind == "discrete":
                codes = x_encoded[:, j].astype(np.int64)
                rep[np.arange(x_encoded.shape[0]), off + codes] = 1.0
            else:
                rep[:, off] = x_encoded[:, j]
        return rep


class NNModel:
    """Softmax classifier: embeddings -> N LRND blocks -> linear output."""

    def __init__(self, encoder: Encoder, cfg: NnModelConfig, rng):
        self.encoder = encoder
        self.cfg = cfg
        self.embedder = FeatureEmbedder(encoder.columns, cfg.embedding_dim, rng)
        layers = []
        d = self.embedder.out_dim
        for i, blk in enumerate(cfg.blocks):
            layers.append(Dense(d, blk.width, rng, f"block{i}"))
            layers.append(Relu())
            layers.append(BatchNorm(blk.width, f"block{i}.bn"))
            layers.append(Dropout(blk.dropout_rate))
            d = blk.width
        layers.append(Dense(d, cfg.output_classes, rng, "out"))
        self.net = Sequential(layers)
        self.history: list[dict] = []

    def params(self):
        return self.embedder.params() + self.net.params()

    def forward(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        h = self.embedder.forward(x, training, rng)
        return self.net.forward(h, training, rng)

    def predict_scores(self, x: np.ndarray) -> np.ndarray:
        return softmax(self.forward(x, training=False))

    def loss_only(self, x, y, training: bool = False) -> float:
        loss, _ = softmax_cross_entropy(self.forward(x, training=training), y)
        return loss

    def loss_and_grads(self, x, y, training: bool = True, rng=None) -> float:
        for p in self.params():
            p.zero_grad()
        logits = self.forward(x, training=training, rng=rng)
        loss, dlogits = softmax_cross_entropy(logits, y)
        self.embedder.backward(self.net.backward(dlogits))
        return loss

    def batch_norm_buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.net.layers):
            if isinstance(layer, BatchNorm):
                out[f"layer{i}.running_mean"] = layer.running_mean
                out[f"layer{i}.running_var"] = layer.running_var
        return out


class Autoencoder:
    """Compress/decompress network over the embedding front end.

    The narrowest layer's activations are the whole-sample embedding.
    """

    def __init__(self, encoder: Encoder, bottleneck_dim: int, rng,
                 hidden: tuple[int, ...] = (64,), embedding_dim: int = 8):
        self.encoder = encoder
        self.embedder = FeatureEmbedder(encoder.columns, embedding_dim, rng)
        if bottleneck_dim >= self.embedder.out_dim:
            raise ValueError(
                f"bottleneck_dim {bottleneck_dim} must be < input width {self.embedder.out_dim}"
            )
        self.bottleneck_dim = bottleneck_dim
        self.hidden = tuple(hidden)
        self.embedding_dim = embedding_dim
        self.head_spec = ReconHead(encoder.columns)

        enc_layers, d = [], self.embedder.out_dim
        for i, h in enumerate(self.hidden):
            enc_layers += [Dense(d, h, rng, f"enc{i}"), Relu()]
            d = h
        enc_layers.append(Dense(d, bottleneck_dim, rng, "enc.bottleneck"))
        self.enc = Sequential(enc_layers)

        dec_layers, d = [], bottleneck_dim
        for i, h in enumerate(reversed(self.hidden)):
            dec_layers += [Dense(d, h, rng, f"dec{i}"), Relu()]
            d = h
        dec_layers.append(Dense(d, self.head_spec.width, rng, "dec.head"))
        self.dec = Sequential(dec_layers)
        self.history: list[dict] = []

    def params(self):
        return self.embedder.params() + self.enc.params() + self.dec.params()

    def encode_bottleneck(self, x: np.ndarray) -> np.ndarray:
        return self.enc.forward(self.embedder.forward(x, False), False)

    def decode_latent(self, z: np.ndarray) -> np.ndarray:
        return self.dec.forward(z, False)

    def forward_heads(self, x: np.ndarray, training: bool = False, rng=None) -> np.ndarray:
        h = self.embedder.forward(x, training, rng)
        z = self.enc.forward(h, training, rng)
        return self.dec.forward(z, training, rng)

    def loss_only(self, x) -> float:
        loss, _ = self.head_spec.loss_and_grad(self.forward_heads(x), x)
        return loss

    def loss_and_grads(self, x, training: bool = True, rng=None) -> float:
        for p in self.params():
            p.zero_grad()
        out = self.forward_heads(x, training=training, rng=rng)
        loss, dout = self.head_spec.loss_and_grad(out, x)
        self.embedder.backward(self.enc.backward(self.dec.backward(dout)))
        return loss

    def reconstruct_encoded(self, x: np.ndarray) -> np.ndarray:
        return self.head_spec.to_encoded_rows(self.forward_heads(x))


def gaussian_kl(mu: np.ndarray, log_sigma: np.ndarray) -> float:
    """Mean over batch of KL(N(mu, sigma) || N(0, 1)), summed over dims."""
    return float(
        (0.5 * (mu**2 + np.exp(2.0 * log_sigma) - 1.0 - 2.0 * log_sigma)).sum(axis=1).mean()
    )


class Vae:
    """Variational variant: the bottleneck is a diagonal Gaussian; the
    embedding of a sample is the posterior mean."""

    def __init__(self, encoder: Encoder, latent_dim: int, rng,
                 hidden: tuple[int, ...] = (64,), embedding_dim: int = 8):
        self.encoder = encoder
        self.embedder = FeatureEmbedder(encoder.columns, embedding_dim, rng)
        if latent_dim >= self.embedder.out_dim:
            raise ValueError(
                f"latent_dim {latent_dim} must be < input width {self.embedder.out_dim}"
            )
        self.latent_dim = latent_dim
        self.hidden = tuple(hidden)
        self.embedding_dim = embedding_dim
        self.head_spec = ReconHead(encoder.columns)

        trunk, d = [], self.embedder.out_dim
        for i, h in enumerate(self.hidden):
            trunk += [Dense(d, h, rng, f"enc{i}"), Relu()]
            d = h
        self.trunk = Sequential(trunk)
        self.mu_head = Dense(d, latent_dim, rng, "enc.mu")
        self.log_sigma_head = Dense(d, latent_dim, rng, "enc.log_sigma")

        dec_layers, d = [], latent_dim
        for i, h in enumerate(reversed(self.hidden)):
            dec_layers += [Dense(d, h, rng, f"dec{i}"), Relu()]
            d = h
        dec_layers.append(Dense(d, self.head_spec.width, rng, "dec.head"))
        self.dec = Sequential(dec_layers)
        self.history: list[dict] = []

    def params(self):
        return (self.embedder.params() + self.trunk.params() + self.mu_head.params()
                + self.log_sigma_head.params() + self.dec.params())

    def posterior(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(mu, sigma) per input row."""
        t = self.trunk.forward(self.embedder.forward(x, False), False)
        mu = self.mu_head.forward(t, False)
        sigma = np.exp(self.log_sigma_head.forward(t, False))
        return mu, sigma

    def encode_mu(self, x: np.ndarray) -> np.ndarray:
        return self.posterior(x)[0]

    def decode_latent(self, z: np.ndarray) -> np.ndarray:
        return self.dec.forward(z, False)

    def _forward_train(self, x, eps, training, rng):
        h = self.embedder.forward(x, training, rng)
        t = self.trunk.forward(h, training, rng)
        mu = self.mu_head.forward(t, training)
        log_sigma = self.log_sigma_head.forward(t, training)
        sigma = np.exp(log_sigma)
        z = mu + sigma * eps
        out = self.dec.forward(z, training, rng)
        return out, mu, log_sigma, sigma

    def elbo_loss_only(self, x, eps) -> float:
        out, mu, log_sigma, _ = self._forward_train(x, eps, False, None)
        recon, _ = self.head_spec.loss_and_grad(out, x)
        return recon + gaussian_kl(mu, log_sigma)

    def loss_and_grads(self, x, eps, training: bool = True, rng=None) -> float:
        for p in self.params():
            p.zero_grad()
        n = x.shape[0]
        out, mu, log_sigma, sigma = self._forward_train(x, eps, training, rng)
        recon, dout = self.head_spec.loss_and_grad(out, x)
        kl = gaussian_kl(mu, log_sigma)
        dz = self.dec.backward(dout)
        dmu = dz + mu / n
        dlog_sigma = dz * sigma * eps + (np.exp(2.0 * log_sigma) - 1.0) / n
        dtrunk = self.mu_head.backward(dmu) + self.log_sigma_head.backward(dlog_sigma)
        self.embedder.backward(self.trunk.backward(dtrunk))
        return recon + kl

    def reconstruct_encoded(self, x: np.ndarray) -> np.ndarray:
        """Deterministic reconstruction through the posterior mean."""
        return self.head_spec.to_encoded_rows(self.decode_latent(self.encode_mu(x)))


def _epoch_batches(n: int, batch_size: int, rng):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield perm[start:start + batch_size]


def _fit(model, step, n_rows: int, tcfg: TrainConfig, rng, context: str):
    """Shared epoch loop: minibatch steps, plateau-scheduled Adam, history."""
    opt = Adam(model.params(), lr=tcfg.learning_rate)
    sched = PlateauScheduler(opt, tcfg.plateau_patience, tcfg.plateau_factor)
    for epoch in range(tcfg.max_epochs):
        total, seen = 0.0, 0
        for idx in _epoch_batches(n_rows, tcfg.batch_size, rng):
            loss = step(idx, rng)
            check_finite(loss, context)
            opt.step()
            total += loss * idx.size
            seen += idx.size
        epoch_loss = total / seen
        reduced = sched.step(epoch_loss)
        model.history.append({"epoch": epoch, "loss": epoch_loss,
                              "lr": opt.lr, "lr_reduced": reduced})
    return model


def train_classifier(train: Dataset, cfg: NnModelConfig | None = None,
                     tcfg: TrainConfig | None = None,
                     model: NNModel | None = None) -> NNModel:
    """Fit the classifier on a dataset; pass `model` to continue training
    existing weights (warm start) instead of reinitializing."""
    if len(train) == 0:
        raise ValueError("empty training set")
    cfg = cfg or NnModelConfig(output_classes=train.n_classes)
    tcfg = tcfg or TrainConfig()
    rng = np.random.default_rng(tcfg.seed)
    enc = model.encoder if model is not None else Encoder(train.schema)
    X, y = enc.encode_dataset(train)
    if model is None:
        model = NNModel(enc, cfg, rng)

    def step(idx, step_rng):
        return model.loss_and_grads(X[idx], y[idx], training=True, rng=step_rng)

    return _fit(model, step, len(train), tcfg, rng, "classifier training")


def train_autoencoder(train: Dataset, bottleneck_dim: int,
                      tcfg: TrainConfig | None = None,
                      hidden: tuple[int, ...] = (64,),
                      embedding_dim: int = 8) -> Autoencoder:
    if len(train) == 0:
        raise ValueError("empty training set")
    tcfg = tcfg or TrainConfig()
    rng = np.random.default_rng(tcfg.seed)
    enc = Encoder(train.schema)
    X, _ = enc.encode_dataset(train)
    model = Autoencoder(enc, bottleneck_dim, rng, hidden=hidden, embedding_dim=embedding_dim)

    def step(idx, step_rng):
        return model.loss_and_grads(X[idx], training=True, rng=step_rng)

    return _fit(model, step, len(train), tcfg, rng, "autoencoder training")


def train_vae(train: Dataset, latent_dim: int, tcfg: TrainConfig | None = None,
              hidden: tuple[int, ...] = (64,), embedding_dim: int = 8) -> Vae:
    if len(train) == 0:
        raise ValueError("empty training set")
    tcfg = tcfg or TrainConfig()
    rng = np.random.default_rng(tcfg.seed)
    enc = Encoder(train.schema)
    X, _ = enc.encode_dataset(train)
    model = Vae(enc, latent_dim, rng, hidden=hidden, embedding_dim=embedding_dim)

    def step(idx, step_rng):
        eps = step_rng.standard_normal((idx.size, latent_dim))
        return model.loss_and_grads(X[idx], eps, training=True, rng=step_rng)

    return _fit(model, step, len(train), tcfg, rng, "vae training")


def _params_dict(model) -> dict:
    return {p.name: p.value.tolist() for p in model.params()}


def _load_params(model, blob: dict):
    for p in model.params():
        stored = np.asarray(blob[p.name], dtype=np.float64)
        if stored.shape != p.value.shape:
            raise ValueError(f"checkpoint shape mismatch for {p.name}")
        p.value[...] = stored


def save_checkpoint(model, path) -> None:
    """Write weights + architecture as a versioned JSON weight map."""
    if isinstance(model, NNModel):
        kind = "nnmodel"
        config = {
            "embedding_dim": model.cfg.embedding_dim,
            "blocks": [[b.width, b.dropout_rate] for b in model.cfg.blocks],
            "output_classes": model.cfg.output_classes,
        }
        buffers = {k: v.tolist() for k, v in model.batch_norm_buffers().items()}
    elif isinstance(model, Vae):
        kind = "vae"
        config = {"latent_dim": model.latent_dim, "hidden": list(model.hidden),
                  "embedding_dim": model.embedding_dim}
        buffers = {}
    elif isinstance(model, Autoencoder):
        kind = "autoencoder"
        config = {"bottleneck_dim": model.bottleneck_dim, "hidden": list(model.hidden),
                  "embedding_dim": model.embedding_dim}
        buffers = {}
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    blob = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "schema": schema_to_dict(model.encoder.schema),
        "config": config,
        "params": _params_dict(model),
        "buffers": buffers,
    }
    Path(path).write_text(json.dumps(blob))


def load_checkpoint(path):
    blob = json.loads(Path(path).read_text())
    if blob.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a checkpoint file")
    schema = schema_from_dict(blob["schema"])
    enc = Encoder(schema)
    rng = np.random.default_rng(0)
    cfg = blob["config"]
    kind = blob["kind"]
    if kind == "nnmodel":
        model = NNModel(
            enc,
            NnModelConfig(
                embedding_dim=cfg["embedding_dim"],
                blocks=tuple(LrndBlockConfig(w, d) for w, d in cfg["blocks"]),
                output_classes=cfg["output_classes"],
            ),
            rng,
        )
        for key, val in blob["buffers"].items():
            layer_idx, attr = key.split(".", 1)
            layer = model.net.layers[int(layer_idx.removeprefix("layer"))]
            setattr(layer, attr, np.asarray(val, dtype=np.float64))
    elif kind == "autoencoder":
        model = Autoencoder(enc, cfg["bottleneck_dim"], rng,
                            hidden=tuple(cfg["hidden"]), embedding_dim=cfg["embedding_dim"])
    elif kind == "vae":
        model = Vae(enc, cfg["latent_dim"], rng,
                    hidden=tuple(cfg["hidden"]), embedding_dim=cfg["embedding_dim"])
    else:
        raise ValueError(f"unknown checkpoint kind {kind!r}")
    _load_params(model, blob["params"])
    return model
