"""Counter-based random streams.

Every stochastic operation in the package draws from a Philox stream keyed by
``(seed, purpose, index)``.  Streams for distinct keys are statistically
independent, so work split across records, epochs, or trials produces the same
bits regardless of scheduling or thread count.
"""

import numpy as np

# Purpose tags keep unrelated uses of the same seed on disjoint streams.
TAG_RECORD = 0  # per-record synthetic sampling
TAG_INIT = 1  # parameter initialisation
TAG_SHUFFLE = 2  # per-epoch batch shuffling
TAG_DROPOUT = 3  # per-step dropout masks
TAG_TRIAL = 4  # per-trial Monte-Carlo draws

_INDEX_BITS = 48


def stream(seed: int, tag: int, index: int = 0) -> np.random.Generator:
    """Return the Generator for stream ``(seed, tag, index)``."""
    if not 0 <= index < (1 << _INDEX_BITS):
        raise ValueError(f"stream index out of range: {index}")
    if not 0 <= tag < (1 << (64 - _INDEX_BITS)):
        raise ValueError(f"stream tag out of range: {tag}")
    key = np.array([np.uint64(seed) & np.uint64(2**64 - 1),
                    (np.uint64(tag) << np.uint64(_INDEX_BITS)) | np.uint64(index)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
