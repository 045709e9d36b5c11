"""Bicluster quality via pairwise trajectory correlations, plus the
inside/outside trajectory-length diagnostic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bicluster import Bicluster
from .tensor import IndexSet, Tensor3, atomic_write_text

__all__ = [
    "CorrelationReport",
    "block_length_stats",
    "correlation_report",
    "write_correlation_csv",
]


@dataclass(frozen=True, eq=False)
class CorrelationReport:
    """Absolute pairwise correlations between the trajectories of a bicluster.

    ``matrix`` is symmetric with unit diagonal and entries in [0, 1].
    Constant (zero-variance) trajectories correlate 0 with everything by
    convention and are listed in ``constant_keys``.
    """

    matrix: np.ndarray
    mean_abs_corr: float
    total_abs_corr: float
    keys: tuple[tuple[int, int], ...]
    constant_keys: tuple[tuple[int, int], ...]

    @property
    def n_trajectories(self) -> int:
        return len(self.keys)


def correlation_report(t: Tensor3, b: Bicluster, centered: bool = True) -> CorrelationReport:
    """Absolute pairwise Pearson correlations among a bicluster's trajectories.

    ``centered=False`` switches to uncentered cosine similarity for
    comparison.  ``mean_abs_corr`` averages the off-diagonal entries (0 when
    the bicluster holds a single trajectory); ``total_abs_corr`` sums each
    unordered pair once.
    """
    if t.m < 2:
        raise ValueError("correlations need at least two time points")
    unfolded = t.unfold_block(b.rows, b.cols)
    x = unfolded.values

    if centered:
        x = x - x.mean(axis=0)
        # A trajectory constant over time centers to (numerically) zero;
        # detect constancy exactly so the convention is predictable.
        degenerate = np.ptp(unfolded.values, axis=0) == 0.0
    else:
        degenerate = np.linalg.norm(unfolded.values, axis=0) == 0.0

    norms = np.linalg.norm(x, axis=0)
    safe = np.where(degenerate, 1.0, np.where(norms == 0.0, 1.0, norms))
    degenerate = degenerate | (norms == 0.0)
    unit = x / safe

    corr = np.abs(unit.T @ unit)
    np.clip(corr, 0.0, 1.0, out=corr)
    corr[degenerate, :] = 0.0
    corr[:, degenerate] = 0.0
    np.fill_diagonal(corr, 1.0)

    count = corr.shape[0]
    if count > 1:
        off_sum = float(corr.sum() - count)
        mean_abs = off_sum / (count * (count - 1))
        total_abs = off_sum / 2.0
    else:
        mean_abs = 0.0
        total_abs = 0.0

    corr.flags.writeable = False
    return CorrelationReport(
        matrix=corr,
        mean_abs_corr=mean_abs,
        total_abs_corr=total_abs,
        keys=unfolded.keys,
        constant_keys=tuple(key for key, bad in zip(unfolded.keys, degenerate) if bad),
    )


def write_correlation_csv(path, report: CorrelationReport):
    """Correlation matrix as CSV; trajectories are labelled ``j1:j2``."""
    labels = [f"{j1}:{j2}" for j1, j2 in report.keys]
    lines = ["trajectory," + ",".join(labels)]
    for label, row in zip(labels, report.matrix):
        lines.append(label + "," + ",".join(repr(x) for x in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def block_length_stats(t: Tensor3, rows: IndexSet, cols: IndexSet) -> tuple[float, float]:
    """Mean squared trajectory length inside ``rows x cols`` and over its
    complement in the full index rectangle."""
    t._check_sets(rows, cols)
    if len(rows) == t.n1 and len(cols) == t.n2:
        raise ValueError("complement of the block is empty")
    sq_lengths = np.sum(t.data * t.data, axis=2)
    mask = np.zeros((t.n1, t.n2), dtype=bool)
    mask[np.ix_(rows.to_array(), cols.to_array())] = True
    inside = float(sq_lengths[mask].mean()) if mask.any() else 0.0
    outside = float(sq_lengths[~mask].mean())
    return inside, outside
