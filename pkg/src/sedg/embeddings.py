"""Embedding export from trained models plus the similarity machinery
(cosine, nearest neighbor, PCA reduction) used by feature modification."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .nn.models import Autoencoder, NNModel, Vae, load_checkpoint, save_checkpoint

CLASSIFIER_TRANSFER = "classifier_transfer"
AUTOENCODER_BOTTLENECK = "autoencoder_bottleneck"
VAE_LATENT = "vae_latent"
PER_FEATURE = "per_feature"
WHOLE_SAMPLE = "whole_sample"


class GranularityError(ValueError):
    """Requested embedding granularity unsupported for the model type."""


@dataclass(frozen=True)
class PcaProjection:
    """Orthonormal projection onto the top principal components."""

    mean: np.ndarray
    components: np.ndarray  # (k, d), rows orthonormal
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray

    @property
    def k(self) -> int:
        return self.components.shape[0]

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(x) - self.mean) @ self.components.T

    def inverse_transform(self, z: np.ndarray) -> np.ndarray:
        return np.atleast_2d(z) @ self.components + self.mean


def pca_fit(vectors, k: int) -> PcaProjection:
    """Principal components of the centered data via SVD."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least 2 vectors")
    n, d = x.shape
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}]")
    mean = x.mean(axis=0)
    _, s, vt = np.linalg.svd(x - mean, full_matrices=False)
    var = s**2 / (n - 1)
    total = var.sum()
    ratio = var / total if total > 0 else np.zeros_like(var)
    return PcaProjection(mean, vt[:k], var[:k], ratio[:k])


def pca_fit_auto(vectors, variance_target: float = 0.95) -> PcaProjection:
    """Smallest k explaining at least `variance_target` of the variance."""
    x = np.asarray(vectors, dtype=np.float64)
    full = pca_fit(x, min(x.shape[1], x.shape[0] - 1) or 1)
    cumulative = np.cumsum(full.explained_variance_ratio)
    k = int(np.searchsorted(cumulative, variance_target) + 1)
    k = min(k, full.components.shape[0])
    return PcaProjection(full.mean, full.components[:k],
                         full.explained_variance[:k], full.explained_variance_ratio[:k])


def cosine_similarity(a, b) -> float:
    """dot(a, b) / (|a| |b|); zero-norm inputs yield 0 by convention."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def nearest_neighbor(query, candidates) -> int:
    """Index of the Euclidean-nearest candidate; ties go to the lowest index."""
    c = np.asarray(candidates, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] == 0:
        raise ValueError("candidates must be a non-empty 2-d array")
    q = np.asarray(query, dtype=np.float64).ravel()
    return int(np.argmin(np.linalg.norm(c - q, axis=1)))


class Embedder:
    """A frozen mapping into embedding space exported from a trained model.

    Per-feature granularity exposes one lookup table per discrete feature
    (classifier-transfer only); whole-sample granularity maps an entire
    encoded row to one vector. An optional PCA projection reduces either
    kind; the reduced space is fit over all table rows pooled (per-feature)
    or over supplied training vectors (whole-sample).
    """

    def __init__(self, source: str, granularity: str, dim: int, *,
                 model=None, tables=None, pca: PcaProjection | None = None):
        self.source = source
        self.granularity = granularity
        self.dim = dim
        self.model = model
        self.tables = tables  # feature index -> (n_values, dim) array, discrete only
        self.pca = pca

    @classmethod
    def identity(cls, dim: int) -> "Embedder":
        return cls("identity", WHOLE_SAMPLE, dim)

    @property
    def out_dim(self) -> int:
        return self.pca.k if self.pca is not None else self.dim

    def with_pca(self, train_matrix=None, k: int | None = None,
                 variance_target: float = 0.95) -> "Embedder":
        """Attach a PCA reduction. Whole-sample embedders fit on the embeddings
        of `train_matrix` rows; per-feature embedders fit on pooled table rows."""
        if self.granularity == PER_FEATURE:
            vectors = np.vstack([t for t in self.tables.values()])
        else:
            if train_matrix is None:
                raise ValueError("whole-sample PCA needs training rows")
            vectors = self.embed_matrix(np.asarray(train_matrix, dtype=np.float64))
        proj = pca_fit(vectors, k) if k is not None else pca_fit_auto(vectors, variance_target)
        return Embedder(self.source, self.granularity, self.dim,
                        model=self.model, tables=self.tables, pca=proj)

    def _reduce(self, vectors: np.ndarray, reduced: bool) -> np.ndarray:
        if reduced:
            if self.pca is None:
                raise ValueError("embedder has no PCA projection")
            return self.pca.transform(vectors)
        return vectors

    def embed_matrix(self, x: np.ndarray, reduced: bool = False) -> np.ndarray:
        """Whole-sample embedding of encoded rows (n, features) -> (n, dim)."""
        if self.granularity != WHOLE_SAMPLE:
            raise GranularityError("per-feature embedder cannot embed whole samples")
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if self.source == "identity":
            out = x
        elif self.source == CLASSIFIER_TRANSFER:
            out = self.model.embedder.forward(x, False)
        elif self.source == AUTOENCODER_BOTTLENECK:
            out = self.model.encode_bottleneck(x)
        elif self.source == VAE_LATENT:
            out = self.model.encode_mu(x)
        else:
            raise ValueError(f"unknown source {self.source!r}")
        return self._reduce(out, reduced)

    def embed_feature_codes(self, feature_index: int, codes, reduced: bool = False) -> np.ndarray:
        """Per-feature embedding of integer value codes for one feature."""
        if self.granularity != PER_FEATURE:
            raise GranularityError("whole-sample embedder has no per-feature tables")
        table = self.tables.get(feature_index)
        if table is None:
            raise ValueError(f"feature {feature_index} is not discrete")
        vecs = table[np.asarray(codes, dtype=np.int64)]
        return self._reduce(vecs, reduced)


def export_embedder(model, source: str, granularity: str) -> Embedder:
    """Freeze an embedding mapping out of a trained model.

    The model state is copied, so later retraining cannot change exported
    embeddings. VAE embeddings are the posterior mean, keeping the mapping
    deterministic.
    """
    if source == CLASSIFIER_TRANSFER:
        if not isinstance(model, NNModel):
            raise TypeError("classifier_transfer requires the neural classifier")
        frozen = copy.deepcopy(model)
        if granularity == PER_FEATURE:
            tables = {j: p.value.copy() for j, p in frozen.embedder.tables.items()}
            return Embedder(source, PER_FEATURE, frozen.cfg.embedding_dim, tables=tables)
        return Embedder(source, WHOLE_SAMPLE, frozen.embedder.out_dim, model=frozen)
    if granularity == PER_FEATURE:
        raise GranularityError(f"{source} only supports whole-sample granularity")
    if source == AUTOENCODER_BOTTLENECK:
        if not isinstance(model, Autoencoder):
            raise TypeError("autoencoder_bottleneck requires an autoencoder")
        return Embedder(source, WHOLE_SAMPLE, model.bottleneck_dim, model=copy.deepcopy(model))
    if source == VAE_LATENT:
        if not isinstance(model, Vae):
            raise TypeError("vae_latent requires a variational autoencoder")
        return Embedder(source, WHOLE_SAMPLE, model.latent_dim, model=copy.deepcopy(model))
    raise ValueError(f"unknown source {source!r}")


def save_embedder(embedder: Embedder, path) -> None:
    """Persist an embedder next to its source model weights."""
    blob: dict = {
        "format": "sedg-embedder",
        "source": embedder.source,
        "granularity": embedder.granularity,
        "dim": embedder.dim,
    }
    if embedder.pca is not None:
        blob["pca"] = {
            "mean": embedder.pca.mean.tolist(),
            "components": embedder.pca.components.tolist(),
            "explained_variance": embedder.pca.explained_variance.tolist(),
            "explained_variance_ratio": embedder.pca.explained_variance_ratio.tolist(),
        }
    if embedder.tables is not None:
        blob["tables"] = {str(j): t.tolist() for j, t in embedder.tables.items()}
    if embedder.model is not None:
        tmp = Path(str(path) + ".model")
        save_checkpoint(embedder.model, tmp)
        blob["model"] = json.loads(tmp.read_text())
        tmp.unlink()
    Path(path).write_text(json.dumps(blob))


def load_embedder(path) -> Embedder:
    blob = json.loads(Path(path).read_text())
    if blob.get("format") != "sedg-embedder":
        raise ValueError(f"{path}: not an embedder file")
    pca = None
    if "pca" in blob:
        p = blob["pca"]
        pca = PcaProjection(
            np.asarray(p["mean"]), np.asarray(p["components"]),
            np.asarray(p["explained_variance"]), np.asarray(p["explained_variance_ratio"]),
        )
    tables = None
    if "tables" in blob:
        tables = {int(j): np.asarray(t, dtype=np.float64) for j, t in blob["tables"].items()}
    model = None
    if "model" in blob:
        tmp = Path(str(path) + ".model")
        tmp.write_text(json.dumps(blob["model"]))
        model = load_checkpoint(tmp)
        tmp.unlink()
    return Embedder(blob["source"], blob["granularity"], blob["dim"],
                    model=model, tables=tables, pca=pca)
