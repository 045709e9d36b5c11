"""Reshape long-format CSV records (dim1, dim2, dim3, value) into a dense
tensor.

Dimension labels are arbitrary strings mapped to dense 0-based indices in
first-appearance order.  Duplicate cells are aggregated by mean; cells never
mentioned are handled by a fill policy.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .tensor import Tensor3

__all__ = ["IngestError", "IngestResult", "ingest_long_csv"]

FILL_POLICIES = ("zero", "error", "mean")


class IngestError(Exception):
    """The long-format CSV is malformed or incomplete."""


@dataclass(frozen=True, eq=False)
class IngestResult:
    tensor: Tensor3
    dim1_labels: tuple[str, ...]
    dim2_labels: tuple[str, ...]
    dim3_labels: tuple[str, ...]
    filled_cells: int
    duplicate_cells: int


def _looks_like_header(fields: list[str]) -> bool:
    # A data row must carry a numeric value in the fourth column.
    try:
        float(fields[3])
        return False
    except ValueError:
        return True


def ingest_long_csv(path, fill: str = "zero") -> IngestResult:
    """Read ``dim1,dim2,dim3,value`` rows into a dense tensor.

    A leading header row is detected by a non-numeric fourth column and
    skipped.  Extra columns beyond the fourth are ignored.  ``fill`` decides
    what happens to grid cells no row mentions: ``zero`` writes 0, ``error``
    raises listing the first missing cells, ``mean`` writes the mean over the
    (dim1, dim2) pair's present values (0 when the pair has none).
    """
    if fill not in FILL_POLICIES:
        raise ValueError(f"fill must be one of {FILL_POLICIES}, got {fill!r}")

    labels: list[dict[str, int]] = [{}, {}, {}]
    cells: dict[tuple[int, int, int], list[float]] = {}

    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        first_data_row = True
        for rowno, fields in enumerate(reader, start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) < 4:
                raise IngestError(f"{path}: row {rowno}: expected at least 4 columns, got {len(fields)}")
            fields = [f.strip() for f in fields]
            if first_data_row:
                first_data_row = False
                if _looks_like_header(fields):
                    continue
            try:
                value = float(fields[3])
            except ValueError:
                raise IngestError(f"{path}: row {rowno}: non-numeric value {fields[3]!r}") from None
            if not math.isfinite(value):
                raise IngestError(f"{path}: row {rowno}: non-finite value {fields[3]!r}")
            key = tuple(labels[d].setdefault(fields[d], len(labels[d])) for d in range(3))
            cells.setdefault(key, []).append(value)

    if not cells:
        raise IngestError(f"{path}: no data rows")

    n1, n2, m = (len(lab) for lab in labels)
    data = np.zeros((n1, n2, m))
    present = np.zeros((n1, n2, m), dtype=bool)
    duplicates = 0
    for (i, j, t), values in cells.items():
        data[i, j, t] = float(np.mean(values))
        present[i, j, t] = True
        if len(values) > 1:
            duplicates += 1

    missing = int(present.size - present.sum())
    if missing and fill == "error":
        inverse = [
            {index: label for label, index in lab.items()} for lab in labels
        ]
        listed = []
        for i, j, t in zip(*np.nonzero(~present)):
            listed.append(f"({inverse[0][int(i)]}, {inverse[1][int(j)]}, {inverse[2][int(t)]})")
            if len(listed) == 10:
                break
        raise IngestError(
            f"{path}: {missing} missing cells with fill=error; first: {', '.join(listed)}"
        )
    if missing and fill == "mean":
        pair_counts = present.sum(axis=2)
        pair_sums = np.where(present, data, 0.0).sum(axis=2)
        pair_means = np.divide(
            pair_sums, pair_counts, out=np.zeros_like(pair_sums), where=pair_counts > 0
        )
        data = np.where(present, data, pair_means[:, :, None])

    def ordered(lab: dict[str, int]) -> tuple[str, ...]:
        return tuple(sorted(lab, key=lab.get))

    return IngestResult(
        tensor=Tensor3(data),
        dim1_labels=ordered(labels[0]),
        dim2_labels=ordered(labels[1]),
        dim3_labels=ordered(labels[2]),
        filled_cells=missing,
        duplicate_cells=duplicates,
    )
