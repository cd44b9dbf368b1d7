"""Mini-batch training of the PFS projection by test-power ascent.

Each step samples equal real/fake mini-batches without replacement within an
epoch, ascends the regularised test-power criterion with Adam, and applies
decoupled weight decay to the projection weight matrices only (never to biases
or the log bandwidth).  Identical seeds and inputs reproduce identical runs.
"""

from dataclasses import dataclass, field

import numpy as np

from ._rng import TAG_DROPOUT, TAG_SHUFFLE, stream
from .embeddings import EmbeddingDataset
from .kernel_mmd import DEFAULT_LAMBDA, objective_value_and_gradients
from .pfs import PFSGradients, PFSParams, dropout_mask, init_params

ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    """Optimisation hyper-parameters; defaults follow the reference recipe
    (AdamW-style, lr 1e-4, betas (0.9, 0.99), weight decay 0.01, batch 256,
    25 epochs, hidden width 256, scalar signatures, dropout 0.3)."""

    epochs: int = 25
    batch_size: int = 256
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.99
    weight_decay: float = 0.01
    lam: float = DEFAULT_LAMBDA
    seed: int = 0
    dropout_enabled: bool = True
    hidden_width: int = 256
    out_dim: int = 1
    dropout_rate: float = 0.3
    activation: str = "gelu"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 2:
            raise ValueError(f"batch size must be >= 2, got {self.batch_size}")
        if self.learning_rate < 0.0:
            raise ValueError(f"learning rate must be >= 0, got {self.learning_rate}")
        if not (0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0):
            raise ValueError("Adam betas must lie in [0, 1)")
        if not self.lam > 0.0:
            raise ValueError("the objective regulariser must be positive")


@dataclass(frozen=True)
class TrainStep:
    step: int
    objective: float
    mmd2: float
    variance: float
    gamma: float


@dataclass
class TrainHistory:
    steps: list[TrainStep] = field(default_factory=list)

    def append(self, record: TrainStep) -> None:
        if self.steps and record.step <= self.steps[-1].step:
            raise ValueError("history step indices must be strictly increasing")
        self.steps.append(record)

    def objectives(self) -> np.ndarray:
        return np.array([s.objective for s in self.steps])


class AdamState:
    """First/second moment accumulators for one parameter array."""

    def __init__(self, shape):
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)

    def direction(self, grad, t, beta1, beta2, eps=ADAM_EPS):
        """Bias-corrected update direction m_hat / (sqrt(v_hat) + eps) at step t >= 1."""
        self.m = beta1 * self.m + (1.0 - beta1) * grad
        self.v = beta2 * self.v + (1.0 - beta2) * grad * grad
        m_hat = self.m / (1.0 - beta1**t)
        v_hat = self.v / (1.0 - beta2**t)
        return m_hat / (np.sqrt(v_hat) + eps)


class PFSOptimizer:
    """Adam ascent over PFS parameters with decoupled decay on w1/w2 only."""

    def __init__(self, params: PFSParams, cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        self.state = {name: AdamState(getattr(params, name).shape)
                      for name in ("w1", "b1", "w2", "b2")}
        self.state["log_gamma"] = AdamState(())

    def step(self, params: PFSParams, grads: PFSGradients) -> None:
        cfg = self.cfg
        self.t += 1
        for name in ("w1", "b1", "w2", "b2"):
            value = getattr(params, name)
            direction = self.state[name].direction(getattr(grads, name), self.t,
                                                   cfg.adam_beta1, cfg.adam_beta2)
            value += cfg.learning_rate * direction
            if name in ("w1", "w2"):
                value -= cfg.learning_rate * cfg.weight_decay * value
        direction = self.state["log_gamma"].direction(np.float64(grads.log_gamma), self.t,
                                                      cfg.adam_beta1, cfg.adam_beta2)
        params.log_gamma = float(params.log_gamma + cfg.learning_rate * direction)


def train(real: EmbeddingDataset, fake: EmbeddingDataset, cfg: TrainConfig,
          init: PFSParams | None = None) -> tuple[PFSParams, TrainHistory]:
    """Train the projection and bandwidth on labelled embedding pools.

    Runs cfg.epochs passes; each epoch iterates min(pool sizes) // batch_size
    paired mini-batches sampled without replacement.  Returns the final
    parameters and the per-step history.
    """
    if (real.patch_count, real.embed_dim) != (fake.patch_count, fake.embed_dim):
        raise ValueError("real and fake pools must share (patch_count, embed_dim)")
    n_pairs = min(real.n_records, fake.n_records)
    if n_pairs < cfg.batch_size:
        raise ValueError(f"need at least {cfg.batch_size} records per class, "
                         f"got {real.n_records} real / {fake.n_records} fake")

    params = init.copy() if init is not None else init_params(
        real.embed_dim, cfg.hidden_width, cfg.out_dim, cfg.seed,
        dropout_rate=cfg.dropout_rate, activation=cfg.activation)
    optimizer = PFSOptimizer(params, cfg)
    history = TrainHistory()
    real_f64 = real.fields_f64()
    fake_f64 = fake.fields_f64()
    steps_per_epoch = n_pairs // cfg.batch_size
    use_dropout = cfg.dropout_enabled and params.dropout_rate > 0.0

    global_step = 0
    for epoch in range(cfg.epochs):
        shuffle = stream(cfg.seed, TAG_SHUFFLE, epoch)
        order_real = shuffle.permutation(real.n_records)
        order_fake = shuffle.permutation(fake.n_records)
        for s in range(steps_per_epoch):
            take = slice(s * cfg.batch_size, (s + 1) * cfg.batch_size)
            batch_x = real_f64[order_real[take]]
            batch_y = fake_f64[order_fake[take]]
            masks = None
            if use_dropout:
                drop = stream(cfg.seed, TAG_DROPOUT, global_step)
                shape = (cfg.batch_size, real.patch_count, params.hidden_width)
                masks = (dropout_mask(params, shape, drop),
                         dropout_mask(params, shape, drop))
            value, stats, grads = objective_value_and_gradients(
                batch_x, batch_y, params, cfg.lam, masks)
            optimizer.step(params, grads)
            history.append(TrainStep(global_step, value, stats["mmd2"],
                                     stats["variance"], stats["gamma"]))
            global_step += 1
    return params, history
