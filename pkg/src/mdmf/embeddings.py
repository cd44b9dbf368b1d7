"""Patch-embedding data model, the .pfse binary format, and token-grid pooling.

A record is one image's K x D grid of backbone patch embeddings plus a label
and a source id.  Files store the payload as little-endian float32; in-memory
math elsewhere in the package is done in float64.
"""

import io
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"MDMF"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIII")  # magic, version, n_records, K, D, flags

FLAG_LABELS = 1 << 0
FLAG_SOURCE_IDS = 1 << 1

LABEL_REAL = "real"
LABEL_GENERATED = "generated"
_LABEL_BYTES = {LABEL_REAL: 0, LABEL_GENERATED: 1}
_BYTE_LABELS = {0: LABEL_REAL, 1: LABEL_GENERATED}


class EmbeddingFormatError(ValueError):
    """Raised when a .pfse byte stream violates the format contract."""


@dataclass(frozen=True)
class PatchEmbeddingField:
    """One image's grid of patch embeddings, shape (patch_count, embed_dim)."""

    patches: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.patches, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"patch field must be 2-D and non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("patch field contains non-finite values")
        object.__setattr__(self, "patches", arr)

    @property
    def patch_count(self) -> int:
        return self.patches.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.patches.shape[1]


@dataclass(frozen=True)
class TokenGrid:
    """Square G x G grid of raw backbone tokens, pre pooling."""

    tokens: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.tokens, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"token grid must be square (G, G, D), got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("token grid contains non-finite values")
        object.__setattr__(self, "tokens", arr)

    @property
    def side(self) -> int:
        return self.tokens.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.tokens.shape[2]


@dataclass
class EmbeddingDataset:
    """Labelled collection of patch fields sharing one (patch_count, embed_dim).

    ``patches`` mirrors the storage format (float32, shape (N, K, D));
    ``labels`` may be None for unlabeled files (flag bit 0 clear).
    """

    patches: np.ndarray
    labels: list[str] | None
    source_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.patches, dtype=np.float32)
        if arr.ndim != 3:
            raise ValueError(f"dataset payload must have shape (N, K, D), got {arr.shape}")
        if arr.shape[1] < 1 or arr.shape[2] < 1:
            raise ValueError("dataset needs positive patch count and embedding dimension")
        if not np.all(np.isfinite(arr)):
            raise ValueError("dataset contains non-finite values")
        self.patches = arr
        n = arr.shape[0]
        if self.labels is not None:
            if len(self.labels) != n:
                raise ValueError(f"{len(self.labels)} labels for {n} records")
            bad = sorted({lb for lb in self.labels if lb not in _LABEL_BYTES})
            if bad:
                raise ValueError(f"labels must be 'real' or 'generated', got {bad}")
        if not self.source_ids:
            self.source_ids = [""] * n
        elif len(self.source_ids) != n:
            raise ValueError(f"{len(self.source_ids)} source ids for {n} records")

    @property
    def n_records(self) -> int:
        return self.patches.shape[0]

    @property
    def patch_count(self) -> int:
        return self.patches.shape[1]

    @property
    def embed_dim(self) -> int:
        return self.patches.shape[2]

    def field(self, i: int) -> PatchEmbeddingField:
        return PatchEmbeddingField(self.patches[i].astype(np.float64))

    def fields_f64(self) -> np.ndarray:
        """All records as one float64 array, shape (N, K, D)."""
        return self.patches.astype(np.float64)

    def records(self):
        labels = self.labels if self.labels is not None else [None] * self.n_records
        for i in range(self.n_records):
            yield self.field(i), labels[i], self.source_ids[i]

    @classmethod
    def from_fields(cls, fields, labels, source_ids=None, patch_count=None, embed_dim=None):
        """Assemble a dataset from PatchEmbeddingFields (or (K, D) arrays).

        patch_count/embed_dim pin the shared shape for empty datasets.
        """
        arrays = [f.patches if isinstance(f, PatchEmbeddingField) else np.asarray(f)
                  for f in fields]
        if arrays:
            shapes = {a.shape for a in arrays}
            if len(shapes) != 1:
                raise ValueError(f"records disagree on (K, D): {sorted(shapes)}")
            payload = np.stack(arrays).astype(np.float32)
        else:
            if patch_count is None or embed_dim is None:
                raise ValueError("empty dataset needs explicit patch_count and embed_dim")
            payload = np.zeros((0, patch_count, embed_dim), dtype=np.float32)
        return cls(payload, list(labels) if labels is not None else None,
                   list(source_ids) if source_ids else [])


def write_embedding_file(dataset: EmbeddingDataset, sink) -> None:
    """Serialise ``dataset`` to a binary sink in .pfse format (byte-exact)."""
    flags = 0
    if dataset.labels is not None:
        flags |= FLAG_LABELS
    has_ids = any(dataset.source_ids)
    if has_ids:
        flags |= FLAG_SOURCE_IDS
    sink.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dataset.n_records,
                            dataset.patch_count, dataset.embed_dim, flags))
    sink.write(np.ascontiguousarray(dataset.patches, dtype="<f4").tobytes())
    if dataset.labels is not None:
        sink.write(bytes(_LABEL_BYTES[lb] for lb in dataset.labels))
    if has_ids:
        for sid in dataset.source_ids:
            raw = sid.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise ValueError(f"source id exceeds 65535 bytes: {sid[:40]!r}...")
            sink.write(struct.pack("<H", len(raw)))
            sink.write(raw)


def write_embedding_bytes(dataset: EmbeddingDataset) -> bytes:
    buf = io.BytesIO()
    write_embedding_file(dataset, buf)
    return buf.getvalue()


def _read_exact(source, n: int, what: str) -> bytes:
    data = source.read(n)
    if len(data) != n:
        raise EmbeddingFormatError(f"truncated file: expected {n} bytes of {what}, got {len(data)}")
    return data


def read_embedding_file(source) -> EmbeddingDataset:
    """Parse a .pfse byte source, validating magic, version, and payload size."""
    header = _read_exact(source, _HEADER.size, "header")
    magic, version, n, patch_count, embed_dim, flags = _HEADER.unpack(header)
    if magic != MAGIC:
        raise EmbeddingFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise EmbeddingFormatError(f"unsupported format version {version}")
    if patch_count < 1 or embed_dim < 1:
        raise EmbeddingFormatError(f"invalid dimensions K={patch_count}, D={embed_dim}")
    payload = _read_exact(source, 4 * n * patch_count * embed_dim, "payload")
    patches = np.frombuffer(payload, dtype="<f4").reshape(n, patch_count, embed_dim).copy()
    if not np.all(np.isfinite(patches)):
        raise EmbeddingFormatError("payload contains non-finite values (corrupt input)")

    labels = None
    if flags & FLAG_LABELS:
        raw = _read_exact(source, n, "label table")
        try:
            labels = [_BYTE_LABELS[b] for b in raw]
        except KeyError as exc:
            raise EmbeddingFormatError(f"invalid label byte {exc.args[0]}") from None

    source_ids = []
    if flags & FLAG_SOURCE_IDS:
        for i in range(n):
            (length,) = struct.unpack("<H", _read_exact(source, 2, f"id length {i}"))
            raw = _read_exact(source, length, f"id bytes {i}")
            try:
                source_ids.append(raw.decode("utf-8"))
            except UnicodeDecodeError:
                raise EmbeddingFormatError(f"source id {i} is not valid UTF-8") from None

    trailing = source.read(1)
    if trailing:
        raise EmbeddingFormatError("trailing bytes after declared payload")
    return EmbeddingDataset(patches, labels, source_ids)


def read_embedding_bytes(data: bytes) -> EmbeddingDataset:
    return read_embedding_file(io.BytesIO(data))


def pool_token_grid(grid: TokenGrid, target_patch_count: int) -> PatchEmbeddingField:
    """Mean-pool a G x G token grid down to k x k patches (K = k*k).

    Each output patch is the arithmetic mean of the (G/k) x (G/k) block of
    tokens it covers, so the global mean is preserved.  K = G*G is the
    identity.  Patches are ordered row-major over the k x k grid.
    """
    k = np.sqrt(target_patch_count)
    if k != int(k):
        raise ValueError(f"target patch count {target_patch_count} is not a perfect square")
    k = int(k)
    side = grid.side
    if side % k != 0:
        raise ValueError(f"grid side {side} is not divisible by {k}")
    block = side // k
    pooled = grid.tokens.reshape(k, block, k, block, grid.embed_dim).mean(axis=(1, 3))
    return PatchEmbeddingField(pooled.reshape(k * k, grid.embed_dim))
