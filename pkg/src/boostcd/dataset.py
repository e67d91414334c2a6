"""LIBSVM ingestion and the signed margin matrix A (A[j, i] = y[j] * M[j, i])."""

from __future__ import annotations

import hashlib
import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

CACHE_MAGIC = b"BOOSTCD\x00"
CACHE_VERSION = 1
CACHE_ENV = "BOOSTCD_CACHE_DIR"
# Lipschitz constant for columns with no stored entries; keeps -g/(beta*L) at 0.
EMPTY_COLUMN_L = math.inf


class DatasetError(ValueError):
    """Malformed or unusable input data."""


@dataclass(frozen=True)
class LabeledDataset:
    m: int
    n: int
    features: sp.csr_matrix
    labels: np.ndarray

    def __post_init__(self):
        if self.features.shape != (self.m, self.n):
            raise DatasetError(f"feature shape {self.features.shape} != ({self.m}, {self.n})")
        if self.labels.shape != (self.m,):
            raise DatasetError("label vector length does not match m")
        if not np.all(np.abs(self.labels) == 1.0):
            raise DatasetError("labels must be exactly -1 or +1")
        if not np.all(np.isfinite(self.features.data)):
            raise DatasetError("non-finite feature value")


@dataclass(frozen=True, eq=False)
class MarginMatrix:
    """A in both compressed layouts.

    The column view (``col_ptr``/``col_row``/``col_val``) serves coordinate
    updates; the row view (``row_ptr``/``row_col``/``row_val``) serves residual
    recomputation. Both hold the same entries and are never mutated.
    """

    m: int
    n: int
    col_ptr: np.ndarray
    col_row: np.ndarray
    col_val: np.ndarray
    row_ptr: np.ndarray
    row_col: np.ndarray
    row_val: np.ndarray
    omega: int

    @property
    def nnz(self) -> int:
        return int(self.col_val.shape[0])

    def column(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.col_ptr[i], self.col_ptr[i + 1]
        return self.col_row[lo:hi], self.col_val[lo:hi]

    def row(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.row_ptr[j], self.row_ptr[j + 1]
        return self.row_col[lo:hi], self.row_val[lo:hi]

    def column_nnz(self) -> np.ndarray:
        return np.diff(self.col_ptr)

    def active_coordinates(self) -> np.ndarray:
        """Columns with at least one stored entry (the sampling domain)."""
        return np.flatnonzero(self.column_nnz() > 0).astype(np.int64)

    def to_scipy(self) -> sp.csc_matrix:
        return sp.csc_matrix((self.col_val, self.col_row, self.col_ptr), shape=(self.m, self.n))

    def toarray(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(struct.pack("<qq", self.m, self.n))
        for a in (self.col_ptr, self.col_row, self.col_val):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()

    @classmethod
    def from_sparse(cls, A) -> "MarginMatrix":
        """Wrap any scipy sparse (or dense) matrix; explicit zeros are dropped."""
        csc = sp.csc_matrix(A, dtype=np.float64, copy=True)
        csc.eliminate_zeros()
        csc.sum_duplicates()
        csc.sort_indices()
        if not np.all(np.isfinite(csc.data)):
            raise DatasetError("non-finite matrix entry")
        csr = csc.tocsr()
        csr.sort_indices()
        row_nnz = np.diff(csr.indptr)
        omega = int(row_nnz.max()) if row_nnz.size else 0
        m, n = csc.shape
        return cls(
            m=int(m),
            n=int(n),
            col_ptr=csc.indptr.astype(np.int64),
            col_row=csc.indices.astype(np.int64),
            col_val=csc.data.astype(np.float64),
            row_ptr=csr.indptr.astype(np.int64),
            row_col=csr.indices.astype(np.int64),
            row_val=csr.data.astype(np.float64),
            omega=omega,
        )


def parse_libsvm(path, n_features: int | None = None, strict_labels: bool = False) -> LabeledDataset:
    """Read a LIBSVM/svmlight text file.

    Labels > 0 become +1 and everything else -1, unless ``strict_labels`` is
    set, in which case any label other than +-1 is an error. Feature indices
    are 1-based in the file and must increase strictly along each line.
    """
    path = Path(path)
    labels: list[float] = []
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    max_idx = 0
    with open(path, "r", encoding="ascii", errors="strict") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: bad label {tokens[0]!r}") from None
            if not math.isfinite(label):
                raise DatasetError(f"{path}:{lineno}: non-finite label")
            if strict_labels:
                if label not in (1.0, -1.0):
                    raise DatasetError(f"{path}:{lineno}: label {tokens[0]!r} is not +1/-1")
            labels.append(1.0 if label > 0 else -1.0)
            prev = 0
            for tok in tokens[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise DatasetError(f"{path}:{lineno}: expected idx:value, got {tok!r}")
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise DatasetError(f"{path}:{lineno}: cannot parse {tok!r}") from None
                if idx < 1:
                    raise DatasetError(f"{path}:{lineno}: feature index {idx} < 1")
                if idx <= prev:
                    raise DatasetError(f"{path}:{lineno}: feature indices not strictly increasing")
                if not math.isfinite(val):
                    raise DatasetError(f"{path}:{lineno}: non-finite value {val_s!r}")
                prev = idx
                indices.append(idx - 1)
                values.append(val)
            max_idx = max(max_idx, prev)
            indptr.append(len(indices))
    if not labels:
        raise DatasetError(f"{path}: empty file")
    n = max_idx
    if n_features is not None:
        if n_features < max_idx:
            raise DatasetError(f"{path}: n_features={n_features} but index {max_idx} present")
        n = n_features
    m = len(labels)
    M = sp.csr_matrix(
        (np.asarray(values, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(m, n),
    )
    return LabeledDataset(m=m, n=n, features=M, labels=np.asarray(labels, dtype=np.float64))


def write_libsvm(path, A, labels=None) -> None:
    """Write rows of ``A`` (any scipy sparse matrix or MarginMatrix) as LIBSVM text."""
    if isinstance(A, MarginMatrix):
        A = A.to_scipy()
    csr = sp.csr_matrix(A)
    csr.sort_indices()
    m = csr.shape[0]
    if labels is None:
        labels = np.ones(m)
    with open(path, "w", encoding="ascii") as fh:
        for j in range(m):
            lo, hi = csr.indptr[j], csr.indptr[j + 1]
            feats = " ".join(f"{i + 1}:{v!r}" for i, v in zip(csr.indices[lo:hi].tolist(), csr.data[lo:hi].tolist()))
            lab = "+1" if labels[j] > 0 else "-1"
            fh.write(f"{lab} {feats}\n" if feats else f"{lab}\n")


def build_margin_matrix(ds: LabeledDataset) -> MarginMatrix:
    """Fold the labels into the features and build both sparse views."""
    A = sp.diags(ds.labels) @ ds.features
    return MarginMatrix.from_sparse(A)


def coordinate_lipschitz(A: MarginMatrix) -> np.ndarray:
    """L[i] = max_j A[j, i]**2; ``EMPTY_COLUMN_L`` for empty columns."""
    L = np.full(A.n, EMPTY_COLUMN_L)
    nnz = A.column_nnz()
    active = nnz > 0
    if A.nnz:
        sq = A.col_val**2
        starts = A.col_ptr[:-1][active]
        L[active] = np.maximum.reduceat(sq, starts)
    return L


# binary cache ---------------------------------------------------------------

_HEADER = struct.Struct("<8sIqqqqqB")


def _cache_path(path: Path, n_features, strict_labels) -> Path:
    tag = f"{n_features if n_features is not None else 'auto'}-{'s' if strict_labels else 'l'}"
    name = f"{path.name}.{tag}.bcd"
    cache_dir = os.environ.get(CACHE_ENV)
    if cache_dir:
        return Path(cache_dir) / name
    return path.with_name(name)


def write_cache(cache_file, ds: LabeledDataset, source: Path | None = None) -> None:
    csr = ds.features
    src_size, src_mtime = (0, 0)
    if source is not None:
        st = source.stat()
        src_size, src_mtime = st.st_size, st.st_mtime_ns
    payload = b"".join(
        np.ascontiguousarray(a).tobytes()
        for a in (
            csr.indptr.astype(np.int64),
            csr.indices.astype(np.int64),
            csr.data.astype(np.float64),
            ds.labels.astype(np.float64),
        )
    )
    header = _HEADER.pack(CACHE_MAGIC, CACHE_VERSION, ds.m, ds.n, csr.nnz, src_size, src_mtime, 0)
    digest = hashlib.sha256(header + payload).digest()
    tmp = Path(str(cache_file) + ".tmp")
    tmp.parent.mkdir(parents=True, exist_ok=True)
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        fh.write(digest)
    os.replace(tmp, cache_file)


def read_cache(cache_file, source: Path | None = None) -> LabeledDataset | None:
    """Return the cached dataset, or None if the cache is stale, foreign or corrupt."""
    try:
        blob = Path(cache_file).read_bytes()
    except OSError:
        return None
    if len(blob) < _HEADER.size + 32:
        return None
    magic, version, m, n, nnz, src_size, src_mtime, _ = _HEADER.unpack_from(blob)
    if magic != CACHE_MAGIC or version != CACHE_VERSION:
        return None
    if hashlib.sha256(blob[:-32]).digest() != blob[-32:]:
        return None
    if source is not None:
        st = source.stat()
        if (st.st_size, st.st_mtime_ns) != (src_size, src_mtime):
            return None
    off = _HEADER.size
    arrays = []
    for count, dtype in ((m + 1, np.int64), (nnz, np.int64), (nnz, np.float64), (m, np.float64)):
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=off)
        off += arr.nbytes
        arrays.append(arr.copy())
    indptr, indices, data, labels = arrays
    M = sp.csr_matrix((data, indices, indptr), shape=(m, n))
    return LabeledDataset(m=int(m), n=int(n), features=M, labels=labels)


def load_dataset(path, n_features: int | None = None, strict_labels: bool = False, use_cache: bool = True) -> LabeledDataset:
    """parse_libsvm with a binary cache beside the source (or in $BOOSTCD_CACHE_DIR)."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"{path}: no such file")
    cache_file = _cache_path(path, n_features, strict_labels)
    if use_cache:
        ds = read_cache(cache_file, source=path)
        if ds is not None:
            return ds
    ds = parse_libsvm(path, n_features=n_features, strict_labels=strict_labels)
    if use_cache:
        try:
            write_cache(cache_file, ds, source=path)
        except OSError:
            pass  # read-only location: run uncached
    return ds


def file_checksum(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
