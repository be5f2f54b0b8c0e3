"""Embedding container (``SPB1`` binary format) and temporal average pooling.

Layout, all little-endian: magic ``SPB1``, u32 record count, u32 feature
dim D; per record: u16 trial_id byte length, trial_id (UTF-8), u32 frame
count T, then T*D IEEE-754 float32 values.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"SPB1"


class StoreFormatError(ValueError):
    pass


class BadMagicError(StoreFormatError):
    pass


class TruncatedStoreError(StoreFormatError):
    pass


class DimMismatchError(StoreFormatError):
    pass


@dataclass
class EmbeddingRecord:
    trial_id: str
    data: np.ndarray  # (T, D)

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data))
        if self.data.ndim != 2 or self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise StoreFormatError(f"record {self.trial_id!r}: data must be a TxD matrix")
        if not np.all(np.isfinite(self.data)):
            raise StoreFormatError(f"record {self.trial_id!r}: non-finite value")

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass
class EmbeddingStore:
    records: list[EmbeddingRecord] = field(default_factory=list)

    def __post_init__(self):
        dims = {r.dim for r in self.records}
        if len(dims) > 1:
            raise DimMismatchError(f"records disagree on dim: {sorted(dims)}")
        ids = [r.trial_id for r in self.records]
        if len(set(ids)) != len(ids):
            raise StoreFormatError("duplicate trial_id in store")

    @property
    def dim(self) -> int:
        if not self.records:
            raise StoreFormatError("empty store has no dim")
        return self.records[0].dim

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_id(self) -> dict[str, EmbeddingRecord]:
        return {r.trial_id: r for r in self.records}

    def matrix(self, trial_ids=None) -> np.ndarray:
        """Stack pooled records into an (n, D) float64 matrix."""
        index = self.by_id()
        if trial_ids is None:
            trial_ids = [r.trial_id for r in self.records]
        rows = []
        for tid in trial_ids:
            rec = index.get(tid)
            if rec is None:
                raise KeyError(f"trial {tid!r} not in store")
            if rec.frames != 1:
                raise StoreFormatError(f"record {tid!r} is not pooled (T={rec.frames})")
            rows.append(rec.data[0])
        return np.asarray(rows, dtype=np.float64)


def average_pool(record: EmbeddingRecord) -> EmbeddingRecord:
    """Collapse a TxD record to 1xD by per-dimension mean over frames.
    Accumulation is float64 regardless of storage dtype."""
    pooled = record.data.astype(np.float64).mean(axis=0, keepdims=True)
    return EmbeddingRecord(record.trial_id, pooled)


def pool_store(store: EmbeddingStore) -> EmbeddingStore:
    return EmbeddingStore([average_pool(r) for r in store])


def write_store(store: EmbeddingStore, path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", len(store.records), store.dim if store.records else 0))
        for rec in store.records:
            tid = rec.trial_id.encode("utf-8")
            if len(tid) > 0xFFFF:
                raise StoreFormatError(f"trial_id too long: {rec.trial_id[:32]!r}...")
            fh.write(struct.pack("<H", len(tid)))
            fh.write(tid)
            fh.write(struct.pack("<I", rec.frames))
            fh.write(np.ascontiguousarray(rec.data, dtype="<f4").tobytes())


def read_store(path) -> EmbeddingStore:
    with open(path, "rb") as fh:
        buf = fh.read()

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(buf):
            raise TruncatedStoreError(f"truncated store: expected {what} at byte {offset}")
        chunk = buf[offset : offset + n]
        offset += n
        return chunk

    offset = 0
    if take(4, "magic") != MAGIC:
        raise BadMagicError(f"bad magic in {path}: expected {MAGIC!r}")
    count, dim = struct.unpack("<II", take(8, "header"))
    records = []
    for _ in range(count):
        (tid_len,) = struct.unpack("<H", take(2, "trial_id length"))
        tid = take(tid_len, "trial_id").decode("utf-8")
        (frames,) = struct.unpack("<I", take(4, "frame count"))
        raw = take(4 * frames * dim, f"payload of {tid!r}")
        data = np.frombuffer(raw, dtype="<f4").reshape(frames, dim)
        records.append(EmbeddingRecord(tid, data))
    if offset != len(buf):
        raise StoreFormatError(f"{len(buf) - offset} trailing bytes after last record")
    store = EmbeddingStore(records)
    if store.records and store.dim != dim:
        raise DimMismatchError(f"header dim {dim} != record dim {store.dim}")
    return store
