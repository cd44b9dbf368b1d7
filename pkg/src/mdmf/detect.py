"""Single-sample detection against a bank of real references.

A test image's score is the biased squared MMD between the reference signature
fields and the single test field; generated images score higher.  The threshold
either comes from a validation sweep upstream or from real-only calibration
(mean plus a multiple of the standard deviation of reference scores).
"""

from dataclasses import dataclass

import numpy as np

from .embeddings import LABEL_GENERATED, LABEL_REAL, EmbeddingDataset, PatchEmbeddingField
from .kernel_mmd import _kernel, _pairwise_sq_dists
from .pfs import PFSParams, project_batch

DEFAULT_CALIBRATION_ALPHA = 3.0


@dataclass(frozen=True)
class ReferenceBank:
    """Projected real references plus the cached pairwise self-similarity term."""

    signatures: np.ndarray  # (R, patch_count, out_dim)
    self_term: float
    gamma: float

    @property
    def size(self) -> int:
        return self.signatures.shape[0]


@dataclass
class DetectionReport:
    source_ids: list[str]
    scores: np.ndarray
    labels: list[str]
    threshold: float
    reference_size: int

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("detection scores must be finite")


def build_reference_bank(refs: EmbeddingDataset, params: PFSParams) -> ReferenceBank:
    """Project all references in eval mode and cache the mean pairwise kernel."""
    if refs.n_records < 1:
        raise ValueError("reference set is empty")
    if refs.labels is not None and any(lb != LABEL_REAL for lb in refs.labels):
        raise ValueError("reference set must contain only real images")
    signatures = project_batch(refs.fields_f64(), params)
    flat = signatures.reshape(refs.n_records, -1)
    gamma = params.gamma
    self_term = float(_kernel(_pairwise_sq_dists(flat, flat), gamma).mean())
    return ReferenceBank(signatures, self_term, gamma)


def mdmf_score(bank: ReferenceBank, test: PatchEmbeddingField, params: PFSParams) -> float:
    """Biased squared MMD between the reference bank and one test image.

    self_term + k(test, test) - (2/R) * sum_r k(ref_r, test), with
    k(test, test) = 1 exactly for the Gaussian kernel; never negative.
    """
    test_sig = project_batch(test.patches, params)
    return _score_signature(bank, test_sig.reshape(1, -1))


def _score_signature(bank: ReferenceBank, flat_test: np.ndarray) -> float:
    flat_refs = bank.signatures.reshape(bank.size, -1)
    if flat_test.shape[1] != flat_refs.shape[1]:
        raise ValueError(f"test signature has {flat_test.shape[1]} entries, "
                         f"references have {flat_refs.shape[1]}")
    cross = _kernel(_pairwise_sq_dists(flat_refs, flat_test), bank.gamma).mean()
    return float(max(bank.self_term + 1.0 - 2.0 * cross, 0.0))


def calibrate_threshold_real_only(real_scores, alpha: float = DEFAULT_CALIBRATION_ALPHA) -> float:
    """Threshold from real scores alone: mean + alpha * sample std (N-1)."""
    scores = np.asarray(real_scores, dtype=np.float64)
    if scores.size < 2:
        raise ValueError(f"calibration needs at least 2 scores, got {scores.size}")
    return float(scores.mean() + alpha * scores.std(ddof=1))


def classify(score: float, tau: float) -> str:
    """Generated iff score strictly exceeds the threshold; ties are real."""
    return LABEL_GENERATED if score > tau else LABEL_REAL


def batch_detect(bank: ReferenceBank, tests: EmbeddingDataset, params: PFSParams,
                 tau: float, workers: int = 1) -> DetectionReport:
    """Score every test record against the bank, preserving input order.

    Per-test scoring is independent, so ``workers`` > 1 may fan out over a
    thread pool; results are placed by index and identical at any worker count.
    """
    n = tests.n_records
    scores = np.zeros(n)
    if n:
        flat_tests = project_batch(tests.fields_f64(), params).reshape(n, -1)
        if workers > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=workers) as pool:
                for i, value in enumerate(pool.map(
                        lambda row: _score_signature(bank, row[None, :]), flat_tests)):
                    scores[i] = value
        else:
            for i in range(n):
                scores[i] = _score_signature(bank, flat_tests[i][None, :])
    labels = [classify(s, tau) for s in scores]
    return DetectionReport(list(tests.source_ids), scores, labels, tau, bank.size)


def score_reference_bank(bank: ReferenceBank) -> np.ndarray:
    """Score each reference against the full bank (itself included).

    Used for real-only calibration; keeping the scored image in the bank
    shifts each score by O(1/R), which the alpha multiplier absorbs.
    """
    flat = bank.signatures.reshape(bank.size, -1)
    return np.array([_score_signature(bank, flat[i][None, :]) for i in range(bank.size)])
