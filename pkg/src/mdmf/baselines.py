"""Ablation baselines: per-patch linear classification with hard voting, and
mean/max/top-k pooled patch-logit scoring.

Every patch inherits its image label and a single linear head is trained with
binary cross-entropy on the frozen embeddings, sharing the Adam machinery and
batch protocol of the main trainer.
"""

from dataclasses import dataclass

import numpy as np

from ._rng import TAG_SHUFFLE, stream
from .embeddings import EmbeddingDataset, PatchEmbeddingField
from .train import AdamState, TrainConfig

# Standard patch-threshold grid for the voting sweep.
VOTING_THRESHOLDS = (0.03, 0.05, 0.08, 0.10, 0.15, 0.20, 0.25, 0.30)
DEFAULT_TOP_K = 5


def dense_voting_grid(start: float = 0.01, stop: float = 0.50,
                      step: float = 0.01) -> np.ndarray:
    """Fine threshold grid for figure-style voting curves."""
    return np.round(np.arange(start, stop + step / 2, step), 10)


@dataclass
class PatchClassifier:
    """Single linear head on frozen patch embeddings."""

    weight: np.ndarray
    bias: float

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if self.weight.ndim != 1:
            raise ValueError("classifier weight must be a vector")
        if not (np.all(np.isfinite(self.weight)) and np.isfinite(self.bias)):
            raise ValueError("classifier parameters must be finite")

    def logits(self, field: PatchEmbeddingField) -> np.ndarray:
        return field.patches @ self.weight + self.bias


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def bce_loss_and_grad(weight, bias, patches, targets):
    """Mean binary cross-entropy over patches and its gradient."""
    logits = patches @ weight + bias
    probs = _sigmoid(logits)
    eps = 1e-12
    loss = -np.mean(targets * np.log(probs + eps) + (1 - targets) * np.log(1 - probs + eps))
    residual = (probs - targets) / len(targets)
    return float(loss), patches.T @ residual, float(residual.sum())


def train_patch_classifier(real: EmbeddingDataset, fake: EmbeddingDataset,
                           cfg: TrainConfig) -> PatchClassifier:
    """Logistic regression on patches, mirroring the main mini-batch protocol."""
    if (real.patch_count, real.embed_dim) != (fake.patch_count, fake.embed_dim):
        raise ValueError("real and fake pools must share (patch_count, embed_dim)")
    n_pairs = min(real.n_records, fake.n_records)
    if n_pairs < cfg.batch_size:
        raise ValueError(f"need at least {cfg.batch_size} records per class")

    weight = np.zeros(real.embed_dim)
    bias = 0.0
    state_w = AdamState(weight.shape)
    state_b = AdamState(())
    real_f64 = real.fields_f64()
    fake_f64 = fake.fields_f64()
    steps_per_epoch = n_pairs // cfg.batch_size
    t = 0
    for epoch in range(cfg.epochs):
        shuffle = stream(cfg.seed, TAG_SHUFFLE, epoch)
        order_real = shuffle.permutation(real.n_records)
        order_fake = shuffle.permutation(fake.n_records)
        for s in range(steps_per_epoch):
            take = slice(s * cfg.batch_size, (s + 1) * cfg.batch_size)
            batch = np.concatenate([real_f64[order_real[take]],
                                    fake_f64[order_fake[take]]])
            patches = batch.reshape(-1, real.embed_dim)
            targets = np.repeat([0.0, 1.0], cfg.batch_size * real.patch_count)
            _, g_w, g_b = bce_loss_and_grad(weight, bias, patches, targets)
            t += 1
            weight -= cfg.learning_rate * state_w.direction(g_w, t, cfg.adam_beta1,
                                                            cfg.adam_beta2)
            bias -= cfg.learning_rate * float(state_b.direction(np.float64(g_b), t,
                                                                cfg.adam_beta1,
                                                                cfg.adam_beta2))
    return PatchClassifier(weight, bias)


def voting_score(field: PatchEmbeddingField, clf: PatchClassifier,
                 theta_patch: float) -> float:
    """Fake-patch ratio: fraction of patches whose sigmoid exceeds theta_patch.

    Downstream evaluation treats the ratio as a continuous score and sweeps the
    image-level threshold, so no second cutoff is fixed here.
    """
    probs = _sigmoid(clf.logits(field))
    return float(np.mean(probs > theta_patch))


def pooled_score(field: PatchEmbeddingField, clf: PatchClassifier, mode: str = "mean",
                 top_k: int = DEFAULT_TOP_K) -> float:
    """Image score by mean, max, or mean-of-top-k aggregation of patch logits."""
    logits = clf.logits(field)
    if mode == "mean":
        return float(logits.mean())
    if mode == "max":
        return float(logits.max())
    if mode == "topk":
        if not 1 <= top_k <= logits.size:
            raise ValueError(f"top_k must be in [1, {logits.size}], got {top_k}")
        return float(np.sort(logits)[-top_k:].mean())
    raise ValueError(f"unknown pooling mode {mode!r}")
