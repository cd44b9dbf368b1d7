"""Learnable patch forensic signature projection.

A one-hidden-layer MLP maps each D-dimensional patch embedding to a tanh-bounded
d-dimensional signature.  The hidden activation must be smooth (non-zero Hessian
at the origin), so the choices are gelu and tanh; piecewise-linear activations
are deliberately unsupported.  Forward/backward are hand-rolled numpy so the
test-power objective can be differentiated exactly.
"""

import struct
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import erf

from ._rng import TAG_INIT, stream
from .embeddings import PatchEmbeddingField

CHECKPOINT_MAGIC = b"MDMP"
CHECKPOINT_VERSION = 1

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _gelu(x):
    return 0.5 * x * (1.0 + erf(x * _INV_SQRT2))


def _gelu_prime(x):
    return 0.5 * (1.0 + erf(x * _INV_SQRT2)) + x * np.exp(-0.5 * x * x) * _INV_SQRT2PI


def _tanh_prime(x):
    t = np.tanh(x)
    return 1.0 - t * t


_ACTIVATIONS = {"gelu": (_gelu, _gelu_prime), "tanh": (np.tanh, _tanh_prime)}


class CheckpointFormatError(ValueError):
    """Raised when a .pfsp byte stream violates the checkpoint contract."""


@dataclass
class PFSParams:
    """Projection weights plus the log kernel bandwidth.

    w1: (embed_dim, hidden), b1: (hidden,), w2: (hidden, out_dim), b2: (out_dim,).
    The bandwidth is stored as log_gamma so gamma = exp(log_gamma) stays positive
    under unconstrained updates.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    log_gamma: float
    dropout_rate: float = 0.3
    activation: str = "gelu"

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.w2 = np.asarray(self.w2, dtype=np.float64)
        self.b2 = np.asarray(self.b2, dtype=np.float64)
        if self.w1.ndim != 2 or self.w2.ndim != 2:
            raise ValueError("weight matrices must be 2-D")
        d_in, hidden = self.w1.shape
        hidden2, d_out = self.w2.shape
        if hidden != hidden2 or self.b1.shape != (hidden,) or self.b2.shape != (d_out,):
            raise ValueError("inconsistent layer shapes")
        if d_in < 1 or hidden < 1 or d_out < 1:
            raise ValueError("all layer dimensions must be positive")
        for arr in (self.w1, self.b1, self.w2, self.b2):
            if not np.all(np.isfinite(arr)):
                raise ValueError("parameters contain non-finite values")
        if not np.isfinite(self.log_gamma):
            raise ValueError("log_gamma must be finite")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {self.dropout_rate}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}; "
                             f"choose from {sorted(_ACTIVATIONS)}")

    @property
    def embed_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_width(self) -> int:
        return self.w1.shape[1]

    @property
    def out_dim(self) -> int:
        return self.w2.shape[1]

    @property
    def gamma(self) -> float:
        return float(np.exp(self.log_gamma))

    def copy(self) -> "PFSParams":
        return replace(self, w1=self.w1.copy(), b1=self.b1.copy(),
                       w2=self.w2.copy(), b2=self.b2.copy())


@dataclass
class PFSGradients:
    """Gradient container matching the PFSParams layout."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    log_gamma: float


def init_params(embed_dim: int, hidden_width: int, out_dim: int, seed: int, *,
                dropout_rate: float = 0.3, activation: str = "gelu") -> PFSParams:
    """Fan-in scaled symmetric-uniform weights, zero biases, gamma = 1."""
    if embed_dim < 1 or hidden_width < 1 or out_dim < 1:
        raise ValueError("dimensions must be positive")
    rng = stream(seed, TAG_INIT)
    bound1 = 1.0 / np.sqrt(embed_dim)
    bound2 = 1.0 / np.sqrt(hidden_width)
    return PFSParams(
        w1=rng.uniform(-bound1, bound1, size=(embed_dim, hidden_width)),
        b1=np.zeros(hidden_width),
        w2=rng.uniform(-bound2, bound2, size=(hidden_width, out_dim)),
        b2=np.zeros(out_dim),
        log_gamma=float(np.log(1.0)),
        dropout_rate=dropout_rate,
        activation=activation,
    )


def dropout_mask(params: PFSParams, shape, rng: np.random.Generator) -> np.ndarray:
    """Inverted-scaling dropout mask: zeros with prob p, survivors scaled 1/(1-p)."""
    p = params.dropout_rate
    if p == 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= p) / (1.0 - p)


def project_batch(fields: np.ndarray, params: PFSParams, mask: np.ndarray | None = None,
                  with_cache: bool = False):
    """Map a batch of patch fields (..., K, embed_dim) to signatures (..., K, out_dim).

    ``mask``, when given, multiplies the hidden layer (dropout already folded
    into the mask values).  with_cache returns the intermediates needed by
    project_batch_backward.
    """
    fields = np.asarray(fields, dtype=np.float64)
    if fields.shape[-1] != params.embed_dim:
        raise ValueError(f"embedding dimension {fields.shape[-1]} does not match "
                         f"projection input {params.embed_dim}")
    act, _ = _ACTIVATIONS[params.activation]
    pre1 = fields @ params.w1 + params.b1
    hidden = act(pre1)
    if mask is not None:
        hidden = hidden * mask
    sigs = np.tanh(hidden @ params.w2 + params.b2)
    if with_cache:
        return sigs, (fields, pre1, hidden, mask)
    return sigs


def project_batch_backward(d_sigs: np.ndarray, sigs: np.ndarray, cache,
                           params: PFSParams):
    """Accumulate parameter gradients from signature gradients.

    Returns a PFSGradients with log_gamma left at 0 (the kernel side owns it).
    """
    fields, pre1, hidden, mask = cache
    _, act_prime = _ACTIVATIONS[params.activation]
    d_pre2 = d_sigs * (1.0 - sigs * sigs)
    flat_h = hidden.reshape(-1, params.hidden_width)
    flat_d2 = d_pre2.reshape(-1, params.out_dim)
    g_w2 = flat_h.T @ flat_d2
    g_b2 = flat_d2.sum(axis=0)
    d_hidden = d_pre2 @ params.w2.T
    if mask is not None:
        d_hidden = d_hidden * mask
    d_pre1 = d_hidden * act_prime(pre1)
    flat_e = fields.reshape(-1, params.embed_dim)
    flat_d1 = d_pre1.reshape(-1, params.hidden_width)
    g_w1 = flat_e.T @ flat_d1
    g_b1 = flat_d1.sum(axis=0)
    return PFSGradients(g_w1, g_b1, g_w2, g_b2, 0.0)


def signature_input_gradient(embedding: np.ndarray, params: PFSParams,
                             output_index: int = 0) -> np.ndarray:
    """Gradient of one signature coordinate with respect to the input embedding."""
    embedding = np.asarray(embedding, dtype=np.float64)
    act, act_prime = _ACTIVATIONS[params.activation]
    pre1 = embedding @ params.w1 + params.b1
    z = np.tanh(act(pre1) @ params.w2 + params.b2)
    d_pre2 = 1.0 - z[output_index] ** 2
    d_hidden = d_pre2 * params.w2[:, output_index]
    return params.w1 @ (d_hidden * act_prime(pre1))


def pfs_forward(field: PatchEmbeddingField, params: PFSParams, mode: str = "eval",
                rng: np.random.Generator | None = None) -> np.ndarray:
    """Project one field to its signature matrix (patch_count, out_dim).

    mode='train' applies dropout (needs an rng when dropout_rate > 0);
    mode='eval' is deterministic.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    mask = None
    if mode == "train" and params.dropout_rate > 0.0:
        if rng is None:
            raise ValueError("train-mode forward with dropout needs an rng")
        mask = dropout_mask(params, (field.patch_count, params.hidden_width), rng)
    return project_batch(field.patches, params, mask)


def save_params(params: PFSParams, sink) -> None:
    """Serialise params to the .pfsp checkpoint format (float64, round-trip exact).

    The activation choice is a library-level setting and is not stored;
    checkpoints are assumed to use the activation they were trained with.
    """
    sink.write(CHECKPOINT_MAGIC)
    sink.write(struct.pack("<IIII", CHECKPOINT_VERSION, params.embed_dim,
                           params.hidden_width, params.out_dim))
    sink.write(struct.pack("<dd", params.dropout_rate, params.log_gamma))
    for arr in (params.w1, params.b1, params.w2, params.b2):
        sink.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_params(source, activation: str = "gelu") -> PFSParams:
    """Parse a .pfsp checkpoint."""
    magic = source.read(4)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
    head = source.read(16)
    if len(head) != 16:
        raise CheckpointFormatError("truncated checkpoint header")
    version, embed_dim, hidden, out_dim = struct.unpack("<IIII", head)
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    scalars = source.read(16)
    if len(scalars) != 16:
        raise CheckpointFormatError("truncated checkpoint scalars")
    dropout_rate, log_gamma = struct.unpack("<dd", scalars)

    def block(rows, cols, name):
        n = 8 * rows * cols
        raw = source.read(n)
        if len(raw) != n:
            raise CheckpointFormatError(f"truncated {name} block")
        return np.frombuffer(raw, dtype="<f8").reshape(rows, cols).copy()

    w1 = block(embed_dim, hidden, "layer-1 weight")
    b1 = block(1, hidden, "layer-1 bias").ravel()
    w2 = block(hidden, out_dim, "layer-2 weight")
    b2 = block(1, out_dim, "layer-2 bias").ravel()
    if source.read(1):
        raise CheckpointFormatError("trailing bytes after checkpoint payload")
    return PFSParams(w1, b1, w2, b2, log_gamma, dropout_rate, activation)
