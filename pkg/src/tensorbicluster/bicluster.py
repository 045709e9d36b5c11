"""Bicluster extraction: single fold+spectral, recursive deflation, and
simultaneous multi-eigenvector extraction with intersection sets."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .spectral import (
    DEFAULT_GAP_THETA,
    EigenPairs,
    eigen_sym,
    estimate_rank_by_gap,
    fold_covariance_cols,
    fold_covariance_rows,
    gap_ratios,
)
from .tensor import IndexSet, Tensor3

__all__ = [
    "Bicluster",
    "BiclusterSet",
    "auto_biclusters",
    "fs_single",
    "multiple_biclusters",
    "recursive_biclusters",
    "single_biclusters",
    "top_k_indices",
]

# A spectrum whose relevant eigenvalue is at or below this fraction of the
# trace cannot distinguish directions; results then fall back to tie-breaks.
DEGENERATE_EPS = 1e-12


@dataclass(frozen=True)
class Bicluster:
    """One (rows, cols) index-set pair with its provenance.

    ``rank_position`` is 1-based: the eigenvector position for the multiple
    method, the extraction stage for the recursive method (each stage uses
    the leading eigenvector of the deflated tensor), and 1 for single runs.
    """

    rows: IndexSet
    cols: IndexSet
    rank_position: int
    row_eigenvalue: float
    col_eigenvalue: float
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.rows) < 1 or len(self.cols) < 1:
            raise ValueError("bicluster index sets must be non-empty")


@dataclass(frozen=True)
class BiclusterSet:
    """An ordered collection of biclusters plus the intersections of all row
    sets and all column sets.

    For the multiple method the intersections are the trajectories shared by
    every bicluster; for single/recursive they are diagnostics computed the
    same way.
    """

    biclusters: tuple[Bicluster, ...]
    row_intersection: IndexSet
    col_intersection: IndexSet
    method: str
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.method not in ("single", "recursive", "multiple"):
            raise ValueError(f"unknown method tag {self.method!r}")
        if not self.biclusters:
            raise ValueError("bicluster set must contain at least one bicluster")

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "n1": self.biclusters[0].rows.bound,
            "n2": self.biclusters[0].cols.bound,
            "biclusters": [
                {
                    "rank_position": b.rank_position,
                    "rows": list(b.rows),
                    "cols": list(b.cols),
                    "row_eigenvalue": b.row_eigenvalue,
                    "col_eigenvalue": b.col_eigenvalue,
                    "warnings": list(b.warnings),
                }
                for b in self.biclusters
            ],
            "row_intersection": list(self.row_intersection),
            "col_intersection": list(self.col_intersection),
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    @classmethod
    def from_json_dict(cls, doc: dict) -> BiclusterSet:
        n1 = int(doc["n1"])
        n2 = int(doc["n2"])
        biclusters = tuple(
            Bicluster(
                rows=IndexSet.of(entry["rows"], n1),
                cols=IndexSet.of(entry["cols"], n2),
                rank_position=int(entry["rank_position"]),
                row_eigenvalue=float(entry["row_eigenvalue"]),
                col_eigenvalue=float(entry["col_eigenvalue"]),
                warnings=tuple(entry.get("warnings", ())),
            )
            for entry in doc["biclusters"]
        )
        return cls(
            biclusters=biclusters,
            row_intersection=IndexSet.of(doc["row_intersection"], n1),
            col_intersection=IndexSet.of(doc["col_intersection"], n2),
            method=doc["method"],
            warnings=tuple(doc.get("warnings", ())),
        )

    @classmethod
    def from_json(cls, text: str) -> BiclusterSet:
        return cls.from_json_dict(json.loads(text))


def top_k_indices(v, k: int) -> IndexSet:
    """Indices of the k largest absolute entries, ties toward smaller index."""
    vec = np.asarray(v, dtype=np.float64).ravel()
    if not 1 <= k <= vec.size:
        raise ValueError(f"k={k} out of range [1, {vec.size}]")
    order = np.argsort(-np.abs(vec), kind="stable")
    return IndexSet.of(order[:k], bound=vec.size)


def _intersect_all(sets: list[IndexSet]) -> IndexSet:
    return reduce(IndexSet.intersection, sets)


def _folded_eigen(t: Tensor3) -> tuple[EigenPairs, EigenPairs, float, float]:
    c_rows = fold_covariance_rows(t)
    c_cols = fold_covariance_cols(t)
    return (
        eigen_sym(c_rows),
        eigen_sym(c_cols),
        float(np.trace(c_rows)),
        float(np.trace(c_cols)),
    )


def _make_bicluster(
    rows_eigen: EigenPairs,
    cols_eigen: EigenPairs,
    position: int,
    k1: int,
    k2: int,
    trace_rows: float,
    trace_cols: float,
) -> Bicluster:
    i = position - 1
    warnings = []
    if rows_eigen.values[i] <= DEGENERATE_EPS * trace_rows:
        warnings.append(f"degenerate row spectrum at position {position}")
    if cols_eigen.values[i] <= DEGENERATE_EPS * trace_cols:
        warnings.append(f"degenerate column spectrum at position {position}")
    return Bicluster(
        rows=top_k_indices(rows_eigen.vectors[:, i], k1),
        cols=top_k_indices(cols_eigen.vectors[:, i], k2),
        rank_position=position,
        row_eigenvalue=float(rows_eigen.values[i]),
        col_eigenvalue=float(cols_eigen.values[i]),
        warnings=tuple(warnings),
    )


def _check_ks(t: Tensor3, ks) -> list[tuple[int, int]]:
    pairs = [(int(k1), int(k2)) for k1, k2 in ks]
    if not pairs:
        raise ValueError("need at least one (k1, k2) pair")
    for k1, k2 in pairs:
        if not 1 <= k1 <= t.n1:
            raise ValueError(f"k1={k1} out of range [1, {t.n1}]")
        if not 1 <= k2 <= t.n2:
            raise ValueError(f"k2={k2} out of range [1, {t.n2}]")
    return pairs


def fs_single(t: Tensor3, k1: int, k2: int) -> Bicluster:
    """Extract one bicluster: fold both covariance matrices and take the k1/k2
    largest absolute entries of their top eigenvectors."""
    _check_ks(t, [(k1, k2)])
    rows_eigen, cols_eigen, tr1, tr2 = _folded_eigen(t)
    return _make_bicluster(rows_eigen, cols_eigen, 1, k1, k2, tr1, tr2)


def single_biclusters(t: Tensor3, k1: int, k2: int) -> BiclusterSet:
    """:func:`fs_single` wrapped as a one-element set (intersections are the
    bicluster's own index sets)."""
    b = fs_single(t, k1, k2)
    return BiclusterSet(
        biclusters=(b,),
        row_intersection=b.rows,
        col_intersection=b.cols,
        method="single",
    )


def recursive_biclusters(t: Tensor3, ks) -> BiclusterSet:
    """Extract one bicluster per (k1, k2) pair, zeroing each found block
    before the next pass.

    Zeroing removes only the block rows x cols x [m], so later biclusters may
    still overlap earlier ones in rows or columns alone.  The intersections
    on the result are diagnostics; the method itself does not constrain them.
    """
    pairs = _check_ks(t, ks)
    current = t
    found: list[Bicluster] = []
    for stage, (k1, k2) in enumerate(pairs, start=1):
        rows_eigen, cols_eigen, tr1, tr2 = _folded_eigen(current)
        b = _make_bicluster(rows_eigen, cols_eigen, 1, k1, k2, tr1, tr2)
        if stage > 1:
            b = Bicluster(
                rows=b.rows,
                cols=b.cols,
                rank_position=stage,
                row_eigenvalue=b.row_eigenvalue,
                col_eigenvalue=b.col_eigenvalue,
                warnings=b.warnings,
            )
        found.append(b)
        if stage < len(pairs):
            current = current.zero_block(b.rows, b.cols)
    return BiclusterSet(
        biclusters=tuple(found),
        row_intersection=_intersect_all([b.rows for b in found]),
        col_intersection=_intersect_all([b.cols for b in found]),
        method="recursive",
    )


def _multiple_from_eigen(
    rows_eigen: EigenPairs,
    cols_eigen: EigenPairs,
    trace_rows: float,
    trace_cols: float,
    pairs: list[tuple[int, int]],
    warnings: tuple[str, ...] = (),
) -> BiclusterSet:
    found = [
        _make_bicluster(rows_eigen, cols_eigen, i + 1, k1, k2, trace_rows, trace_cols)
        for i, (k1, k2) in enumerate(pairs)
    ]
    return BiclusterSet(
        biclusters=tuple(found),
        row_intersection=_intersect_all([b.rows for b in found]),
        col_intersection=_intersect_all([b.cols for b in found]),
        method="multiple",
        warnings=warnings,
    )


def multiple_biclusters(t: Tensor3, ks) -> BiclusterSet:
    """Extract len(ks) biclusters simultaneously: bicluster i pairs the i-th
    eigenvector of the row covariance with the i-th of the column covariance."""
    pairs = _check_ks(t, ks)
    r = len(pairs)
    if r > min(t.n1, t.n2):
        raise ValueError(f"cannot extract {r} biclusters from a {t.n1}x{t.n2}x{t.m} tensor")
    rows_eigen, cols_eigen, tr1, tr2 = _folded_eigen(t)
    return _multiple_from_eigen(rows_eigen, cols_eigen, tr1, tr2, pairs)


def auto_biclusters(
    t: Tensor3,
    k1: int,
    k2: int,
    max_rank: int = 5,
    theta: float = DEFAULT_GAP_THETA,
) -> BiclusterSet:
    """Estimate the bicluster count from the eigenvalue gaps of both covariance
    matrices (taking the smaller of the two estimates), then run the multiple
    method with that many (k1, k2) biclusters."""
    _check_ks(t, [(k1, k2)])
    if max_rank < 1:
        raise ValueError(f"max_rank must be >= 1, got {max_rank}")
    rows_eigen, cols_eigen, tr1, tr2 = _folded_eigen(t)
    rank_rows = estimate_rank_by_gap(rows_eigen.values, max_rank, theta)
    rank_cols = estimate_rank_by_gap(cols_eigen.values, max_rank, theta)
    r = min(rank_rows, rank_cols)

    warnings = []
    no_gap = all(
        not np.any(gap_ratios(e.values, max_rank) > theta)
        for e in (rows_eigen, cols_eigen)
    )
    if no_gap:
        warnings.append(f"no eigenvalue gap exceeded theta={theta}; defaulted to one bicluster")
    return _multiple_from_eigen(
        rows_eigen, cols_eigen, tr1, tr2, [(k1, k2)] * r, tuple(warnings)
    )
