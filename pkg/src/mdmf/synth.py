"""Synthetic real/fake patch fields from the sparse defect model.

Real patches are isotropic Gaussian noise.  Fake patches add a Bernoulli-gated,
sign-randomised mean perturbation, so the fake population mean stays zero while
second-order energy rises.  Sampling is counter-based per record: field i of a
run depends only on (seed, start_index + i), never on scheduling.
"""

from dataclasses import dataclass

import numpy as np

from ._rng import TAG_RECORD, stream
from .embeddings import PatchEmbeddingField


@dataclass(frozen=True)
class SyntheticConfig:
    """Parameters of the sparse-defect generator.

    dilution_scale/dilution_exponent, when set, shrink the defect with patch
    refinement: the effective defect is scale * K^(-exponent) * defect_vector,
    and defect_vector must then be unit-norm.  sign_corr > 0 turns on AR(1)
    correlation of defect signs along the row-major patch sequence.
    """

    embed_dim: int
    patch_count: int
    noise_std: float
    defect_prob: float
    defect_vector: np.ndarray
    dilution_scale: float | None = None
    dilution_exponent: float | None = None
    sign_corr: float = 0.0
    seed: int = 0

    def __post_init__(self):
        vec = np.asarray(self.defect_vector, dtype=np.float64)
        if vec.shape != (self.embed_dim,):
            raise ValueError(f"defect vector has shape {vec.shape}, expected ({self.embed_dim},)")
        object.__setattr__(self, "defect_vector", vec)
        if self.embed_dim < 1 or self.patch_count < 1:
            raise ValueError("embed_dim and patch_count must be positive")
        if not 0.0 <= self.defect_prob <= 1.0:
            raise ValueError(f"defect probability must be in [0, 1], got {self.defect_prob}")
        if not self.noise_std > 0.0:
            raise ValueError(f"noise std must be positive, got {self.noise_std}")
        if (self.dilution_scale is None) != (self.dilution_exponent is None):
            raise ValueError("dilution needs both a scale and an exponent")
        if self.dilution_scale is not None:
            if not self.dilution_scale > 0.0 or self.dilution_exponent < 0.0:
                raise ValueError("dilution requires scale > 0 and exponent >= 0")
        if not 0.0 <= self.sign_corr < 1.0:
            raise ValueError(f"sign correlation must be in [0, 1), got {self.sign_corr}")

    def effective_defect(self) -> np.ndarray:
        """Defect vector actually applied to defective patches."""
        if self.dilution_scale is None:
            return self.defect_vector
        return diluted_defect(self.patch_count, self.dilution_scale,
                              self.dilution_exponent, self.defect_vector)


def diluted_defect(patch_count: int, scale: float, exponent: float,
                   direction: np.ndarray) -> np.ndarray:
    """Power-law diluted defect: scale * patch_count^(-exponent) * direction."""
    direction = np.asarray(direction, dtype=np.float64)
    if patch_count < 1:
        raise ValueError(f"patch count must be >= 1, got {patch_count}")
    norm = np.linalg.norm(direction)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"dilution direction must be unit-norm, got |v| = {norm}")
    return scale * float(patch_count) ** (-exponent) * direction


def _base_noise(rng: np.random.Generator, cfg: SyntheticConfig) -> np.ndarray:
    return cfg.noise_std * rng.standard_normal((cfg.patch_count, cfg.embed_dim))


def _defect_signs(rng: np.random.Generator, cfg: SyntheticConfig) -> np.ndarray:
    """Rademacher signs, AR(1)-correlated along the patch sequence if configured."""
    flips = rng.random(cfg.patch_count)
    if cfg.sign_corr == 0.0:
        return np.where(flips < 0.5, 1.0, -1.0)
    # Markov chain on {-1, +1} with stay probability (1 + corr) / 2 gives
    # lag-l sign correlation corr^l.
    stay = (1.0 + cfg.sign_corr) / 2.0
    signs = np.empty(cfg.patch_count)
    signs[0] = 1.0 if flips[0] < 0.5 else -1.0
    for i in range(1, cfg.patch_count):
        signs[i] = signs[i - 1] if flips[i] < stay else -signs[i - 1]
    return signs


def sample_real_fields(cfg: SyntheticConfig, n: int, *, seed: int | None = None,
                       start_index: int = 0) -> list[PatchEmbeddingField]:
    """Draw n real fields: every patch is N(0, noise_std^2 * I)."""
    seed = cfg.seed if seed is None else seed
    out = []
    for i in range(n):
        rng = stream(seed, TAG_RECORD, start_index + i)
        out.append(PatchEmbeddingField(_base_noise(rng, cfg)))
    return out


def sample_fake_fields(cfg: SyntheticConfig, n: int, *, seed: int | None = None,
                       start_index: int = 0) -> list[PatchEmbeddingField]:
    """Draw n fake fields: base noise plus gate * sign * effective defect per patch.

    The base noise consumes the stream first, so with defect_prob = 0 the output
    is bitwise identical to sample_real_fields at the same seed and indices.
    """
    seed = cfg.seed if seed is None else seed
    defect = cfg.effective_defect()
    out = []
    for i in range(n):
        rng = stream(seed, TAG_RECORD, start_index + i)
        noise = _base_noise(rng, cfg)
        gates = (rng.random(cfg.patch_count) < cfg.defect_prob).astype(np.float64)
        signs = _defect_signs(rng, cfg)
        out.append(PatchEmbeddingField(noise + np.outer(gates * signs, defect)))
    return out
