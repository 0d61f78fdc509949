"""LIBSVM ingestion, column-compressed storage, and feature partitioning.

Datasets are stored column-major because every solver in this package
partitions the *feature* axis across nodes: a node owns a contiguous set
of columns of X and never needs the others.

LIBSVM text format, one example per line::

    <label> <index>:<value> <index>:<value> ...

Indices are 1-based and strictly increasing within a line.  Labels with
value > 0 map to +1, labels < 0 map to -1, and a label of exactly 0 is a
format error.  Explicitly stored zero values are kept.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DataFormatError
from .model import LOSSES

__all__ = [
    "SparseMatrix",
    "Dataset",
    "Partition",
    "parse_libsvm",
    "load_libsvm",
    "to_libsvm",
    "partition_features",
    "column_stats",
]


class SparseMatrix:
    """An n x m sparse matrix in CSC layout with per-column statistics.

    ``indptr`` has length m+1; column j owns ``rows[indptr[j]:indptr[j+1]]``
    and ``vals`` alike, with strictly increasing row indices per column.
    """

    __slots__ = ("n", "m", "indptr", "rows", "vals", "col_sq_norm", "col_nnz", "_csc")

    def __init__(self, n, m, indptr, rows, vals, validate=True):
        self.n = int(n)
        self.m = int(m)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.rows = np.asarray(rows, dtype=np.int64)
        self.vals = np.asarray(vals, dtype=np.float64)
        if validate:
            self._validate()
        self._csc = sp.csc_matrix(
            (self.vals, self.rows, self.indptr), shape=(self.n, self.m)
        )
        self.col_nnz = np.diff(self.indptr).astype(np.int64)
        if self.vals.size:
            sq = np.asarray(self._csc.power(2).sum(axis=0)).ravel()
        else:
            sq = np.zeros(self.m)
        self.col_sq_norm = sq

    def _validate(self):
        if self.n < 0 or self.m < 0:
            raise DataFormatError("matrix dimensions must be nonnegative")
        if self.indptr.shape != (self.m + 1,):
            raise DataFormatError("indptr must have length m + 1")
        if self.indptr[0] != 0 or self.indptr[-1] != self.rows.size:
            raise DataFormatError("indptr endpoints do not match entry count")
        if np.any(np.diff(self.indptr) < 0):
            raise DataFormatError("indptr must be nondecreasing")
        if self.rows.size != self.vals.size:
            raise DataFormatError("rows and vals length mismatch")
        if self.rows.size:
            if self.rows.min() < 0 or self.rows.max() >= self.n:
                raise DataFormatError("row index out of range")
            # strictly increasing rows within each column
            diffs = np.diff(self.rows)
            starts = self.indptr[1:-1]  # positions where a new column begins
            ok = diffs > 0
            ok[starts[(starts > 0) & (starts < self.rows.size)] - 1] = True
            if not np.all(ok):
                raise DataFormatError("row indices must strictly increase per column")

    @classmethod
    def from_csc(cls, X) -> "SparseMatrix":
        X = sp.csc_matrix(X)
        X.sort_indices()
        return cls(X.shape[0], X.shape[1], X.indptr, X.indices, X.data)

    def tocsc(self) -> sp.csc_matrix:
        return self._csc

    def column(self, j):
        """(row indices, values) views for column j."""
        lo, hi = self.indptr[j], self.indptr[j + 1]
        return self.rows[lo:hi], self.vals[lo:hi]

    @property
    def nnz(self) -> int:
        return int(self.rows.size)

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.n == other.n
            and self.m == other.m
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.vals, other.vals)
        )

    def __repr__(self):
        return f"SparseMatrix(n={self.n}, m={self.m}, nnz={self.nnz})"


@dataclass
class Dataset:
    """Design matrix, labels in {-1, +1}, and the loss the data is meant for."""

    matrix: SparseMatrix
    labels: np.ndarray
    loss: str = "logistic"

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.labels.shape != (self.matrix.n,):
            raise DataFormatError(
                f"expected {self.matrix.n} labels, got {self.labels.shape}"
            )
        if self.labels.size and not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise DataFormatError("labels must be -1 or +1")
        if self.loss not in LOSSES:
            raise ConfigurationError(
                f"unknown loss {self.loss!r}; expected one of {sorted(LOSSES)}"
            )

    @property
    def n(self) -> int:
        return self.matrix.n

    @property
    def m(self) -> int:
        return self.matrix.m


@dataclass
class Partition:
    """Disjoint feature blocks covering range(m), one block per node."""

    blocks: list
    seed: int = 0

    def __post_init__(self):
        self.blocks = [np.asarray(b, dtype=np.int64) for b in self.blocks]

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def validate(self, m: int):
        merged = np.concatenate([b for b in self.blocks]) if self.blocks else np.array([])
        if sorted(merged.tolist()) != list(range(m)):
            raise ConfigurationError("blocks do not partition range(m)")
        sizes = [len(b) for b in self.blocks]
        if sizes and max(sizes) - min(sizes) > 1:
            raise ConfigurationError("block sizes may differ by at most one")


def _parse_line(lineno: int, line: str, n_features):
    toks = line.split()
    try:
        raw = float(toks[0])
    except ValueError:
        raise DataFormatError(f"line {lineno}: invalid label {toks[0]!r}") from None
    if raw == 0.0:
        raise DataFormatError(f"line {lineno}: label 0 is not allowed")
    label = 1.0 if raw > 0 else -1.0

    idxs = np.empty(len(toks) - 1, dtype=np.int64)
    vals = np.empty(len(toks) - 1, dtype=np.float64)
    prev = 0
    for k, tok in enumerate(toks[1:]):
        pos = tok.find(":")
        if pos <= 0:
            raise DataFormatError(f"line {lineno}: invalid token {tok!r}")
        try:
            idx = int(tok[:pos])
            val = float(tok[pos + 1 :])
        except ValueError:
            raise DataFormatError(f"line {lineno}: invalid token {tok!r}") from None
        if idx < 1:
            raise DataFormatError(f"line {lineno}: feature index {idx} < 1")
        if idx <= prev:
            raise DataFormatError(
                f"line {lineno}: feature indices must strictly increase"
            )
        if n_features is not None and idx > n_features:
            raise DataFormatError(
                f"line {lineno}: feature index {idx} exceeds declared dimension"
                f" {n_features}"
            )
        prev = idx
        idxs[k] = idx - 1
        vals[k] = val
    return label, idxs, vals


def parse_libsvm(source, n_features=None, loss="logistic") -> Dataset:
    """Parse LIBSVM text into a Dataset.

    ``source`` may be a string or any iterable of lines (e.g. an open
    file).  ``n_features`` pins the feature dimension, which is otherwise
    the largest index seen; it is an error for a line to exceed a pinned
    dimension.  Blank lines are skipped.
    """
    if isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = source

    labels = []
    per_line = []
    max_col = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        label, idxs, vals = _parse_line(lineno, line, n_features)
        labels.append(label)
        per_line.append((idxs, vals))
        if idxs.size:
            max_col = max(max_col, int(idxs[-1]) + 1)

    n = len(labels)
    m = int(n_features) if n_features is not None else max_col

    counts = np.zeros(m + 1, dtype=np.int64)
    for idxs, _ in per_line:
        np.add.at(counts, idxs + 1, 1)
    indptr = np.cumsum(counts)
    rows = np.empty(indptr[-1], dtype=np.int64)
    vals_out = np.empty(indptr[-1], dtype=np.float64)
    cursor = indptr[:-1].copy()
    for i, (idxs, vals) in enumerate(per_line):
        at = cursor[idxs]
        rows[at] = i
        vals_out[at] = vals
        cursor[idxs] += 1

    matrix = SparseMatrix(n, m, indptr, rows, vals_out)
    return Dataset(matrix, np.asarray(labels), loss=loss)


def load_libsvm(path, n_features=None, loss="logistic") -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_libsvm(fh, n_features=n_features, loss=loss)


def to_libsvm(dataset: Dataset, target) -> None:
    """Write a Dataset back to LIBSVM text; round-trips entry-exactly.

    ``target`` is a path or a writable text stream.  Values are written
    with shortest round-trip float formatting.
    """
    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", encoding="utf-8") as fh:
            to_libsvm(dataset, fh)
        return
    csr = dataset.matrix.tocsc().tocsr()
    csr.sort_indices()
    for i in range(dataset.n):
        lo, hi = csr.indptr[i], csr.indptr[i + 1]
        parts = [str(int(dataset.labels[i]))]
        for j, v in zip(csr.indices[lo:hi], csr.data[lo:hi]):
            parts.append(f"{j + 1}:{float(v)!r}")
        target.write(" ".join(parts) + "\n")


def partition_features(m: int, n_nodes: int, seed: int = 0) -> Partition:
    """Randomly partition features into n_nodes near-equal blocks.

    A seeded PCG64 permutation is split into contiguous chunks of size
    ceil(m / P) or floor(m / P) (earlier blocks take the larger size);
    block contents are kept sorted.
    """
    if n_nodes < 1:
        raise ConfigurationError(f"need at least one node, got {n_nodes}")
    if n_nodes > m:
        raise ConfigurationError(f"cannot split {m} features over {n_nodes} nodes")
    rng = np.random.Generator(np.random.PCG64(seed))
    perm = rng.permutation(m)
    blocks = [np.sort(chunk) for chunk in np.array_split(perm, n_nodes)]
    return Partition(blocks=blocks, seed=seed)


def column_stats(matrix: SparseMatrix):
    """(squared l2 norm, stored-entry count) per column."""
    return matrix.col_sq_norm.copy(), matrix.col_nnz.copy()
