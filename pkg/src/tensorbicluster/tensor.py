"""Dense third-order tensors and the slicing/index machinery built on them.

A :class:`Tensor3` holds an (individuals x features x time) array.  Storage is
C-contiguous float64 with the time index fastest, so the trajectory of one
(j1, j2) pair is a contiguous stretch of memory.  All operations are pure:
tensors are never mutated after construction.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

__all__ = [
    "IndexSet",
    "Tensor3",
    "TrajectoryMatrix",
    "TnsFormatError",
    "atomic_write_text",
    "read_tns",
    "write_tns",
]


class TnsFormatError(Exception):
    """A ``.tns`` file could not be parsed."""


@dataclass(frozen=True)
class IndexSet:
    """Strictly increasing, duplicate-free indices below an exclusive bound."""

    indices: tuple[int, ...]
    bound: int

    def __post_init__(self):
        if self.bound < 0:
            raise ValueError(f"bound must be non-negative, got {self.bound}")
        prev = -1
        for i in self.indices:
            if i <= prev:
                raise ValueError("indices must be strictly increasing with no duplicates")
            prev = i
        if self.indices and (self.indices[0] < 0 or self.indices[-1] >= self.bound):
            raise ValueError(f"indices must lie in [0, {self.bound})")

    @classmethod
    def of(cls, indices, bound: int) -> IndexSet:
        """Build from any iterable of ints; sorts and rejects out-of-range values."""
        return cls(tuple(sorted({int(i) for i in indices})), bound)

    @classmethod
    def full(cls, bound: int) -> IndexSet:
        return cls(tuple(range(bound)), bound)

    @classmethod
    def empty(cls, bound: int) -> IndexSet:
        return cls((), bound)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i) -> bool:
        return i in self.indices

    def _check_same_bound(self, other: IndexSet):
        if self.bound != other.bound:
            raise ValueError(f"index sets have different bounds: {self.bound} vs {other.bound}")

    def intersection(self, other: IndexSet) -> IndexSet:
        self._check_same_bound(other)
        return IndexSet.of(set(self.indices) & set(other.indices), self.bound)

    def union(self, other: IndexSet) -> IndexSet:
        self._check_same_bound(other)
        return IndexSet.of(set(self.indices) | set(other.indices), self.bound)

    def complement(self) -> IndexSet:
        inside = set(self.indices)
        return IndexSet(tuple(i for i in range(self.bound) if i not in inside), self.bound)

    def to_array(self) -> np.ndarray:
        return np.fromiter(self.indices, dtype=np.intp, count=len(self.indices))


@dataclass(frozen=True, eq=False)
class TrajectoryMatrix:
    """Trajectories laid out as columns.

    ``values`` has shape (m, count); column i is the mode-3 fiber of the
    (j1, j2) pair recorded in ``keys[i]``.
    """

    values: np.ndarray
    keys: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError("values must be a 2-d array")
        if self.values.shape[1] != len(self.keys):
            raise ValueError("one key per column required")
        if len(set(self.keys)) != len(self.keys):
            raise ValueError("column keys must be pairwise distinct")

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def count(self) -> int:
        return self.values.shape[1]

    def frobenius_sq(self) -> float:
        return float(np.sum(self.values * self.values))


def _check_index(j: int, bound: int, name: str):
    if not 0 <= j < bound:
        raise IndexError(f"{name}={j} out of range [0, {bound})")


class Tensor3:
    """Immutable dense real tensor of shape (n1, n2, m)."""

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"expected a 3-d array, got {arr.ndim} dimensions")
        if min(arr.shape) < 1:
            raise ValueError(f"all dimensions must be >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor entries must be finite")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        self.data = arr

    @classmethod
    def zeros(cls, n1: int, n2: int, m: int) -> Tensor3:
        return cls(np.zeros((n1, n2, m)))

    @classmethod
    def from_flat(cls, n1: int, n2: int, m: int, values) -> Tensor3:
        """Build from a flat row-major value sequence (j1 slowest, t fastest)."""
        flat = np.asarray(values, dtype=np.float64).ravel()
        if flat.size != n1 * n2 * m:
            raise ValueError(f"expected {n1 * n2 * m} values, got {flat.size}")
        return cls(flat.reshape(n1, n2, m))

    @property
    def n1(self) -> int:
        return self.data.shape[0]

    @property
    def n2(self) -> int:
        return self.data.shape[1]

    @property
    def m(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor3(n1={self.n1}, n2={self.n2}, m={self.m})"

    def horizontal_slice(self, j1: int) -> np.ndarray:
        """The (n2, m) matrix of all trajectories of individual ``j1``."""
        _check_index(j1, self.n1, "j1")
        return self.data[j1]

    def lateral_slice(self, j2: int) -> np.ndarray:
        """The (n1, m) matrix of all trajectories of feature ``j2``."""
        _check_index(j2, self.n2, "j2")
        return self.data[:, j2, :]

    def fiber(self, j1: int, j2: int) -> np.ndarray:
        """The length-m trajectory of the (j1, j2) pair."""
        _check_index(j1, self.n1, "j1")
        _check_index(j2, self.n2, "j2")
        return self.data[j1, j2, :]

    def _check_sets(self, rows: IndexSet, cols: IndexSet):
        if rows.bound != self.n1:
            raise ValueError(f"row set bound {rows.bound} does not match n1={self.n1}")
        if cols.bound != self.n2:
            raise ValueError(f"column set bound {cols.bound} does not match n2={self.n2}")

    def unfold_block(self, rows: IndexSet, cols: IndexSet) -> TrajectoryMatrix:
        """Collect the trajectories of ``rows x cols`` as matrix columns.

        Columns are ordered lexicographically by (j1, j2).
        """
        self._check_sets(rows, cols)
        if len(rows) == 0 or len(cols) == 0:
            raise ValueError("unfold_block requires non-empty index sets")
        block = self.data[np.ix_(rows.to_array(), cols.to_array())]
        values = block.reshape(len(rows) * len(cols), self.m).T.copy()
        values.flags.writeable = False
        keys = tuple((j1, j2) for j1 in rows for j2 in cols)
        return TrajectoryMatrix(values, keys)

    def zero_block(self, rows: IndexSet, cols: IndexSet) -> Tensor3:
        """A copy of the tensor with every trajectory of ``rows x cols`` zeroed."""
        self._check_sets(rows, cols)
        out = self.data.copy()
        out[np.ix_(rows.to_array(), cols.to_array())] = 0.0
        return Tensor3(out)

    def frobenius_sq(self) -> float:
        """Sum of squared entries."""
        return float(np.sum(self.data * self.data))


def atomic_write_text(path, text: str):
    """Write ``text`` to ``path`` via a temp file and rename, so readers never
    observe a partial file."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_tns(path, t: Tensor3):
    """Write the text tensor format: ``tns3 n1 n2 m`` then row-major values,
    one trajectory per line."""
    flat = t.data.reshape(t.n1 * t.n2, t.m)
    lines = [f"tns3 {t.n1} {t.n2} {t.m}"]
    for row in flat:
        lines.append(" ".join(repr(x) for x in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_tns(path) -> Tensor3:
    """Parse a ``.tns`` file, rejecting wrong counts and non-finite tokens."""
    with open(path) as handle:
        lines = handle.readlines()

    header_line = None
    for lineno, line in enumerate(lines, start=1):
        if line.strip():
            header_line = lineno
            break
    if header_line is None:
        raise TnsFormatError(f"{path}: empty file")

    fields = lines[header_line - 1].split()
    if len(fields) != 4 or fields[0] != "tns3":
        raise TnsFormatError(f"{path}: line {header_line}: expected header 'tns3 <n1> <n2> <m>'")
    try:
        n1, n2, m = (int(f) for f in fields[1:])
    except ValueError:
        raise TnsFormatError(f"{path}: line {header_line}: non-integer dimension in header") from None
    if min(n1, n2, m) < 1:
        raise TnsFormatError(f"{path}: line {header_line}: dimensions must be >= 1")

    expected = n1 * n2 * m
    values = np.empty(expected, dtype=np.float64)
    count = 0
    for lineno, line in enumerate(lines[header_line:], start=header_line + 1):
        for token in line.split():
            if count >= expected:
                raise TnsFormatError(f"{path}: line {lineno}: more than {expected} values")
            try:
                x = float(token)
            except ValueError:
                raise TnsFormatError(f"{path}: line {lineno}: bad value {token!r}") from None
            if not math.isfinite(x):
                raise TnsFormatError(f"{path}: line {lineno}: non-finite value {token!r}")
            values[count] = x
            count += 1
    if count != expected:
        raise TnsFormatError(f"{path}: expected {expected} values, found {count}")
    return Tensor3(values.reshape(n1, n2, m))
