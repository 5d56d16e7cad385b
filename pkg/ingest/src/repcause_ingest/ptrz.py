"""Writer for the PTRZ representation file format.

Layout (little-endian): magic ``PTRZ``, version byte 0x01, u32 n, u32 d,
flags byte (bit0 treatment, bit1 outcome, bit2 label), then the n*d
float32 row-major feature block and the optional per-row columns.  The
ingest tool only ever emits features plus labels, so treatment/outcome
flags stay clear.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"PTRZ"
VERSION = 1

FLAG_T = 1
FLAG_Y = 2
FLAG_LABEL = 4


def ptrz_bytes(features: np.ndarray, labels: np.ndarray | None = None) -> bytes:
    features = np.asarray(features, dtype=np.float32)
    if features.ndim != 2:
        raise ValueError("features must be a 2-d matrix")
    n, d = features.shape
    if n < 2:
        raise ValueError("PTRZ files need at least 2 rows")
    if not np.all(np.isfinite(features)):
        raise ValueError("features contain non-finite values")
    flags = 0
    payload = [MAGIC, bytes([VERSION]), struct.pack("<II", n, d)]
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != (n,):
            raise ValueError("labels must align with feature rows")
        if not np.all(np.isin(labels, (0, 1))):
            raise ValueError("labels must be 0/1")
        flags |= FLAG_LABEL
    payload.append(bytes([flags]))
    payload.append(np.ascontiguousarray(features, dtype="<f4").tobytes())
    if labels is not None:
        payload.append(labels.astype(np.uint8).tobytes())
    return b"".join(payload)


def write_ptrz(path: str | Path, features: np.ndarray,
               labels: np.ndarray | None = None) -> None:
    data = ptrz_bytes(features, labels)
    Path(path).write_bytes(data)
