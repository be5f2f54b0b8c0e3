"""Writer for the SPB1 embedding container.

Layout (little-endian): magic ``SPB1``, u32 record count, u32 dim; per
record: u16 trial_id byte length, UTF-8 trial_id, u32 frame count T,
then T*dim float32 values row-major.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"SPB1"


class Spb1Error(ValueError):
    pass


def write_spb1(records: list[tuple[str, np.ndarray]], path) -> None:
    """Write (trial_id, TxD float array) pairs. All records must share D
    and trial_ids must be unique."""
    if not records:
        raise Spb1Error("refusing to write an empty store")
    dim = int(np.asarray(records[0][1]).shape[1])
    seen: set[str] = set()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", len(records), dim))
        for trial_id, data in records:
            data = np.asarray(data)
            if data.ndim != 2 or data.shape[1] != dim:
                raise Spb1Error(
                    f"record {trial_id!r}: expected Tx{dim} array, got {data.shape}"
                )
            if not np.all(np.isfinite(data)):
                raise Spb1Error(f"record {trial_id!r}: non-finite value")
            if trial_id in seen:
                raise Spb1Error(f"duplicate trial_id {trial_id!r}")
            seen.add(trial_id)
            tid = trial_id.encode("utf-8")
            fh.write(struct.pack("<H", len(tid)))
            fh.write(tid)
            fh.write(struct.pack("<I", data.shape[0]))
            fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())
