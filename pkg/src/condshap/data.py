"""Tabular datasets: immutable float64 matrices with named columns.

CSV ingestion is strict: header row required, '.' decimal separator, no
missing values. Categorical columns are one-hot encoded at load time so
every downstream estimator sees a purely numeric matrix.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class Dataset:
    """N x M feature matrix with optional target column."""

    feature_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if X.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {X.shape}")
        n, m = X.shape
        if n < 1 or m < 1:
            raise DataError(f"dataset must be at least 1x1, got {n}x{m}")
        if len(self.feature_names) != m:
            raise DataError(
                f"{len(self.feature_names)} names for {m} columns"
            )
        if not np.isfinite(X).all():
            r, c = np.argwhere(~np.isfinite(X))[0]
            raise DataError("non-finite feature value", row=int(r), column=int(c))
        if self.y is not None:
            y = np.asarray(self.y, dtype=np.float64)
            y.setflags(write=False)
            object.__setattr__(self, "y", y)
            if y.shape != (n,):
                raise DataError(f"target length {y.shape} does not match {n} rows")
            if not np.isfinite(y).all():
                raise DataError("non-finite target value", row=int(np.argwhere(~np.isfinite(y))[0]))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.X.shape[1]


def _parse_cell(text: str, row: int, col: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"cannot parse {text!r} as a number", row=row, column=col) from None
    if not np.isfinite(value):
        raise DataError(f"non-finite value {text!r}", row=row, column=col)
    return value


def load_csv(
    path,
    target: str | None = None,
    categorical: tuple[str, ...] = (),
) -> Dataset:
    """Load a comma-separated file with a header row.

    `target` names the column moved into Dataset.y. Columns listed in
    `categorical` are one-hot encoded: a column c with levels a < b becomes
    columns "c=a", "c=b" (levels sorted lexicographically). Errors carry
    1-based row numbers (header is row 1) and 0-based column indices.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if not header or all(not h.strip() for h in header):
            raise DataError(f"{path}: missing header row")
        header = [h.strip() for h in header]
        if target is not None and target not in header:
            raise DataError(f"{path}: declared target column {target!r} not in header")
        unknown = set(categorical) - set(header)
        if unknown:
            raise DataError(f"{path}: categorical columns not in header: {sorted(unknown)}")

        rows = []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise DataError(
                    f"{path}: expected {len(header)} cells, got {len(cells)}", row=lineno
                )
            rows.append(cells)
    if not rows:
        raise DataError(f"{path}: no data rows")

    target_idx = header.index(target) if target is not None else None
    cat_idx = {header.index(c) for c in categorical}
    if len([i for i in range(len(header)) if i != target_idx]) == 0:
        raise DataError(f"{path}: no feature columns")

    # Keep expanded columns in header order: each categorical column turns
    # into its one-hot block in place.
    names: list[str] = []
    blocks: list[np.ndarray] = []
    for c in range(len(header)):
        if c == target_idx:
            continue
        if c in cat_idx:
            levels = sorted({cells[c] for cells in rows})
            block = np.zeros((len(rows), len(levels)), dtype=np.float64)
            index = {lv: k for k, lv in enumerate(levels)}
            for r, cells in enumerate(rows):
                block[r, index[cells[c]]] = 1.0
            blocks.append(block)
            names.extend(f"{header[c]}={lv}" for lv in levels)
        else:
            col = np.empty((len(rows), 1), dtype=np.float64)
            for r, cells in enumerate(rows):
                col[r, 0] = _parse_cell(cells[c], row=r + 2, col=c)
            blocks.append(col)
            names.append(header[c])

    X = np.hstack(blocks)
    y = None
    if target_idx is not None:
        y = np.array(
            [_parse_cell(cells[target_idx], r + 2, target_idx) for r, cells in enumerate(rows)]
        )
    return Dataset(feature_names=tuple(names), X=X, y=y)


def write_csv(dataset: Dataset, path, target_name: str = "target") -> None:
    """Write a dataset back to CSV with full-precision floats.

    Values are formatted with repr, the shortest form that parses back to
    the identical double, so load_csv(write_csv(d)) reproduces d exactly.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = list(dataset.feature_names)
        if dataset.y is not None:
            header.append(target_name)
        writer.writerow(header)
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.X[i]]
            if dataset.y is not None:
                row.append(repr(float(dataset.y[i])))
            writer.writerow(row)
