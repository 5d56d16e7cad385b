"""Dataset model, the PTRZ representation file format, and fold assignment.

A :class:`RepresentationSet` holds latent features ``z`` (n rows, d columns)
with aligned treatment ``t``, outcome ``y`` and an optional binary ``label``
column that only oracle-style estimators may consume.  Sets are validated at
construction and immutable afterwards.

PTRZ binary layout (little-endian throughout)::

    magic   b"PTRZ"                      4 bytes
    version 0x01                         1 byte
    n       u32                          4 bytes
    d       u32                          4 bytes
    flags   bit0: t, bit1: y, bit2: label is present
    z       n*d float32, row-major
    t       n bytes (if present)
    y       n float64 (if present)
    label   n bytes (if present)

``z`` is stored as float32 (the precision embeddings typically ship with)
and promoted to float64 in memory so downstream numerics are stable.  The
CSV fallback uses a ``z0,...,z{d-1},t,y[,label]`` header.
"""
from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    InvalidFoldCountError,
    InvalidLabelError,
    InvalidTreatmentError,
    LoadError,
    MissingFieldError,
    NonFiniteValueError,
    TruncatedPayloadError,
    UnsupportedVersionError,
    ValidationError,
)

PTRZ_MAGIC = b"PTRZ"
PTRZ_VERSION = 1

_FLAG_T = 1
_FLAG_Y = 2
_FLAG_LABEL = 4


def _as_binary(values, name: str, error) -> np.ndarray:
    arr = np.asarray(values)
    if not np.all(np.isfinite(arr.astype(np.float64))):
        raise error(f"{name} contains non-finite entries")
    as_int = arr.astype(np.int64)
    if np.any(as_int.astype(np.float64) != arr.astype(np.float64)) or not np.all(
        (as_int == 0) | (as_int == 1)
    ):
        raise error(f"{name} entries must all be 0 or 1")
    return as_int.astype(np.uint8)


@dataclass(frozen=True)
class RepresentationSet:
    """Latent features with aligned treatment/outcome columns.

    ``t`` and ``y`` may be absent (``None``) when a file only carries
    features, e.g. for intrinsic-dimension estimation; estimators that need
    them raise :class:`MissingFieldError`.
    """

    z: np.ndarray
    t: np.ndarray | None = None
    y: np.ndarray | None = None
    label: np.ndarray | None = None

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.float64)
        if z.ndim != 2:
            raise ValidationError(f"z must be 2-dimensional, got ndim={z.ndim}")
        n, d = z.shape
        if n < 2:
            raise ValidationError(f"need at least 2 rows, got {n}")
        if d < 1:
            raise ValidationError("need at least 1 feature column")
        if not np.all(np.isfinite(z)):
            raise NonFiniteValueError("z contains non-finite entries")
        object.__setattr__(self, "z", z)

        t = self.t
        if t is not None:
            t = _as_binary(t, "t", InvalidTreatmentError)
            if t.shape != (n,):
                raise ValidationError(f"t has {t.shape[0]} rows, z has {n}")
            object.__setattr__(self, "t", t)

        y = self.y
        if y is not None:
            y = np.asarray(y, dtype=np.float64)
            if y.shape != (n,):
                raise ValidationError(f"y has {y.shape[0]} rows, z has {n}")
            if not np.all(np.isfinite(y)):
                raise NonFiniteValueError("y contains non-finite entries")
            object.__setattr__(self, "y", y)

        label = self.label
        if label is not None:
            label = _as_binary(label, "label", InvalidLabelError)
            if label.shape != (n,):
                raise ValidationError(f"label has {label.shape[0]} rows, z has {n}")
            object.__setattr__(self, "label", label)

        for arr in (self.z, self.t, self.y, self.label):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def d(self) -> int:
        return self.z.shape[1]

    def require_ty(self) -> tuple[np.ndarray, np.ndarray]:
        if self.t is None or self.y is None:
            raise MissingFieldError("dataset lacks treatment and/or outcome columns")
        return self.t, self.y

    def with_z(self, z: np.ndarray) -> "RepresentationSet":
        """Same rows, replaced feature matrix."""
        return RepresentationSet(z=z, t=self.t, y=self.y, label=self.label)

    def subset(self, idx: np.ndarray) -> "RepresentationSet":
        take = lambda a: None if a is None else a[idx]
        return RepresentationSet(
            z=self.z[idx], t=take(self.t), y=take(self.y), label=take(self.label)
        )


@dataclass(frozen=True)
class FoldAssignment:
    """Partition of ``{0,...,n-1}`` into k folds of near-equal size."""

    k: int
    assignment: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        sizes = np.bincount(a, minlength=self.k)
        if len(sizes) != self.k or sizes.min() == 0:
            raise ValidationError("every fold must be non-empty")
        if sizes.max() - sizes.min() > 1:
            raise ValidationError("fold sizes may differ by at most 1")
        object.__setattr__(self, "assignment", a)
        a.setflags(write=False)

    def indices(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignment == fold)[0]

    def complement(self, fold: int) -> np.ndarray:
        return np.nonzero(self.assignment != fold)[0]


def make_folds(n: int, k: int, seed: int) -> FoldAssignment:
    """Uniformly shuffled balanced fold assignment; deterministic in seed."""
    if k < 2 or k > n:
        raise InvalidFoldCountError(f"need 2 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    assignment[perm] = np.arange(n) % k
    return FoldAssignment(k=k, assignment=assignment)


# --- PTRZ / CSV serialization ----------------------------------------------


def _ptrz_bytes(s: RepresentationSet) -> bytes:
    flags = 0
    if s.t is not None:
        flags |= _FLAG_T
    if s.y is not None:
        flags |= _FLAG_Y
    if s.label is not None:
        flags |= _FLAG_LABEL
    out = io.BytesIO()
    out.write(PTRZ_MAGIC)
    out.write(bytes([PTRZ_VERSION]))
    out.write(struct.pack("<II", s.n, s.d))
    out.write(bytes([flags]))
    out.write(np.ascontiguousarray(s.z, dtype="<f4").tobytes())
    if s.t is not None:
        out.write(s.t.astype(np.uint8).tobytes())
    if s.y is not None:
        out.write(np.ascontiguousarray(s.y, dtype="<f8").tobytes())
    if s.label is not None:
        out.write(s.label.astype(np.uint8).tobytes())
    return out.getvalue()


def _parse_ptrz(raw: bytes, origin: str) -> RepresentationSet:
    if len(raw) < 4 or raw[:4] != PTRZ_MAGIC:
        raise BadMagicError(f"{origin}: bad magic bytes {raw[:4]!r}")
    if len(raw) < 14:
        raise TruncatedPayloadError(f"{origin}: header truncated at {len(raw)} bytes")
    version = raw[4]
    if version != PTRZ_VERSION:
        raise UnsupportedVersionError(f"{origin}: unsupported version {version}")
    n, d = struct.unpack_from("<II", raw, 5)
    flags = raw[13]
    expected = 14 + n * d * 4
    if flags & _FLAG_T:
        expected += n
    if flags & _FLAG_Y:
        expected += n * 8
    if flags & _FLAG_LABEL:
        expected += n
    if len(raw) != expected:
        raise TruncatedPayloadError(
            f"{origin}: expected {expected} bytes for n={n}, d={d}, "
            f"flags={flags:#04x}, got {len(raw)}"
        )
    off = 14
    z32 = np.frombuffer(raw, dtype="<f4", count=n * d, offset=off).reshape(n, d)
    off += n * d * 4
    t = y = label = None
    if flags & _FLAG_T:
        t = np.frombuffer(raw, dtype=np.uint8, count=n, offset=off).copy()
        off += n
    if flags & _FLAG_Y:
        y = np.frombuffer(raw, dtype="<f8", count=n, offset=off).copy()
        off += n * 8
    if flags & _FLAG_LABEL:
        label = np.frombuffer(raw, dtype=np.uint8, count=n, offset=off).copy()
    # constructed last so no partially populated set can escape on bad input
    return RepresentationSet(z=z32.astype(np.float64), t=t, y=y, label=label)


def _parse_csv(text: str, origin: str) -> RepresentationSet:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise TruncatedPayloadError(f"{origin}: empty CSV") from None
    header = [h.strip() for h in header]
    d = sum(1 for h in header if h.startswith("z"))
    expected = [f"z{i}" for i in range(d)] + ["t", "y"]
    has_label = header == expected + ["label"]
    if not has_label and header != expected:
        raise LoadError(
            f"{origin}: CSV header must be z0,...,z{{d-1}},t,y[,label], got {header}"
        )
    rows = [r for r in reader if r]
    if not rows:
        raise TruncatedPayloadError(f"{origin}: CSV has a header but no rows")
    try:
        data = np.array([[float(v) for v in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise LoadError(f"{origin}: non-numeric CSV cell ({exc})") from None
    if data.shape[1] != len(header):
        raise LoadError(f"{origin}: ragged CSV rows")
    z = data[:, :d]
    t = data[:, d]
    y = data[:, d + 1]
    label = data[:, d + 2] if has_label else None
    return RepresentationSet(z=z, t=t, y=y, label=label)


def load_representations(path: str | Path) -> RepresentationSet:
    """Load a PTRZ or CSV representation file into a validated set."""
    path = Path(path)
    raw = path.read_bytes()
    if path.suffix.lower() == ".csv":
        return _parse_csv(raw.decode("utf-8"), str(path))
    return _parse_ptrz(raw, str(path))


def save_representations(s: RepresentationSet, path: str | Path) -> None:
    """Write PTRZ (or CSV for ``.csv`` paths); PTRZ round-trips bit-exactly
    for the float32 z payload and exactly for t, y and label."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if s.t is None or s.y is None:
            raise MissingFieldError("CSV output requires t and y columns")
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            header = [f"z{i}" for i in range(s.d)] + ["t", "y"]
            if s.label is not None:
                header.append("label")
            writer.writerow(header)
            for i in range(s.n):
                row = [repr(float(v)) for v in s.z[i]]
                row.append(str(int(s.t[i])))
                row.append(repr(float(s.y[i])))
                if s.label is not None:
                    row.append(str(int(s.label[i])))
                writer.writerow(row)
        return
    path.write_bytes(_ptrz_bytes(s))
