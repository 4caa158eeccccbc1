"""Dataset container, standardization, lagged-matrix construction, CSV ingestion.

Everything in this module is shared plumbing: the dataset is an immutable
N x P array of samples by variables, the scaler freezes training-time
statistics for online reuse, and the lag matrices stack past samples
newest-first for autoregressive fitting.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstantColumnWarning, CsvParseError, InsufficientDataError

_STD_FLOOR = 1e-12


@dataclass(frozen=True)
class ProcessDataset:
    """Multivariate time series: rows are time samples, columns are variables."""

    values: np.ndarray
    variable_names: list[str]
    timestamps: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D array of shape (N, P)")
        n, p = values.shape
        if n < 2 or p < 1:
            raise InsufficientDataError(f"need N >= 2 and P >= 1, got N={n}, P={p}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise ValueError(f"non-finite value at sample {bad[0]}, column {bad[1]}")
        if len(self.variable_names) != p:
            raise ValueError(f"expected {p} variable names, got {len(self.variable_names)}")
        if len(set(self.variable_names)) != p:
            raise ValueError("variable names must be unique")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.timestamps is not None:
            ts = np.asarray(self.timestamps, dtype=float)
            if ts.shape != (n,):
                raise ValueError("timestamps must have one entry per sample")
            if np.any(np.diff(ts) <= 0):
                raise ValueError("timestamps must be strictly increasing")
            ts.setflags(write=False)
            object.__setattr__(self, "timestamps", ts)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_variables(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray) -> "ProcessDataset":
        """Copy of this dataset with the same metadata and new values."""
        return ProcessDataset(np.array(values, dtype=float), list(self.variable_names),
                              None if self.timestamps is None else np.array(self.timestamps))


@dataclass(frozen=True)
class Scaler:
    """Frozen per-column standardization statistics (N-1 denominator)."""

    means: np.ndarray
    stddevs: np.ndarray
    constant_columns: np.ndarray = field(default=None)

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        stds = np.asarray(self.stddevs, dtype=float)
        if means.shape != stds.shape or means.ndim != 1:
            raise ValueError("means and stddevs must be 1-D arrays of equal length")
        if np.any(stds <= 0):
            raise ValueError("stddevs must be strictly positive")
        const = self.constant_columns
        const = np.zeros(means.shape, dtype=bool) if const is None else np.asarray(const, dtype=bool)
        for name, arr in (("means", means), ("stddevs", stds), ("constant_columns", const)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class LagMatrices:
    """Current samples Z and their stacked past Q for a lag order d.

    Row t of Q is the concatenation [psi_{t-1}, ..., psi_{t-d}] (newest lag
    first) for the sample whose target is row t of Z.
    """

    Z: np.ndarray
    Q: np.ndarray
    d: int

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        Q = np.asarray(self.Q, dtype=float)
        if Z.ndim != 2 or Q.ndim != 2 or Z.shape[0] != Q.shape[0]:
            raise ValueError("Z and Q must be 2-D with matching row counts")
        if Q.shape[1] != Z.shape[1] * self.d:
            raise ValueError("Q must have d stacked blocks of Z's width")
        Z.setflags(write=False)
        Q.setflags(write=False)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "Q", Q)

    @property
    def n_psi(self) -> int:
        return self.Z.shape[1]


def load_csv(path, has_header: bool = True, forward_fill: bool = False) -> ProcessDataset:
    """Read a numeric CSV file (RFC-4180 subset, UTF-8, '.' decimals).

    Parameters
    ----------
    path:
        File to read.
    has_header:
        Treat the first row as variable names; otherwise names are V1..VP.
    forward_fill:
        Replace blank or non-finite cells with the value from the previous
        row instead of rejecting the file.  The first row must be complete.
    """
    rows: list[list[float]] = []
    names: list[str] | None = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for line_no, record in enumerate(reader, start=1):
            if not record or (len(record) == 1 and record[0].strip() == ""):
                continue
            if names is None and has_header:
                names = [cell.strip() for cell in record]
                continue
            parsed: list[float] = []
            for col_no, cell in enumerate(record, start=1):
                try:
                    value = float(cell)
                except ValueError:
                    value = math.nan
                if not math.isfinite(value):
                    if forward_fill and rows:
                        value = rows[-1][col_no - 1]
                    else:
                        raise CsvParseError(
                            f"non-finite or unparseable cell {cell!r} at row {line_no}, column {col_no}",
                            row=line_no, col=col_no)
                parsed.append(value)
            if rows and len(parsed) != len(rows[0]):
                raise CsvParseError(
                    f"row {line_no} has {len(parsed)} cells, expected {len(rows[0])}",
                    row=line_no)
            rows.append(parsed)
    if not rows:
        raise CsvParseError("file contains no data rows")
    values = np.array(rows, dtype=float)
    p = values.shape[1]
    if names is None:
        names = [f"V{j + 1}" for j in range(p)]
    elif len(names) != p:
        raise CsvParseError(f"header has {len(names)} names but rows have {p} columns", row=1)
    return ProcessDataset(values, names)


def fit_scaler(data: ProcessDataset) -> Scaler:
    """Column means and N-1 standard deviations of the training data.

    Columns with stddev below 1e-12 are flagged and get unit scale so that
    flatlined industrial tags pass through as zeros instead of erroring.
    """
    if data.n_samples < 2:
        raise InsufficientDataError("scaler needs at least 2 samples")
    means = data.values.mean(axis=0)
    stds = data.values.std(axis=0, ddof=1)
    constant = stds < _STD_FLOOR
    if np.any(constant):
        flagged = [data.variable_names[j] for j in np.nonzero(constant)[0]]
        warnings.warn(f"constant columns scaled by 1: {flagged}", ConstantColumnWarning)
        stds = np.where(constant, 1.0, stds)
    return Scaler(means=means, stddevs=stds, constant_columns=constant)


def apply_scaler(data: ProcessDataset, scaler: Scaler) -> ProcessDataset:
    """Z-score the dataset with frozen training statistics."""
    if data.n_variables != scaler.means.shape[0]:
        raise ValueError("scaler dimension does not match dataset")
    return data.with_values((data.values - scaler.means) / scaler.stddevs)


def scale_sample(sample: np.ndarray, scaler: Scaler) -> np.ndarray:
    """Z-score a single raw sample vector."""
    sample = np.asarray(sample, dtype=float)
    return (sample - scaler.means) / scaler.stddevs


def unscale(data: ProcessDataset, scaler: Scaler) -> ProcessDataset:
    """Inverse of :func:`apply_scaler`."""
    if data.n_variables != scaler.means.shape[0]:
        raise ValueError("scaler dimension does not match dataset")
    return data.with_values(data.values * scaler.stddevs + scaler.means)


def build_lag_matrices(data: ProcessDataset | np.ndarray, d: int) -> LagMatrices:
    """Stack a series into targets Z (psi_{d+1}..psi_T) and lags Q (newest first)."""
    values = data.values if isinstance(data, ProcessDataset) else np.asarray(data, dtype=float)
    if d < 1:
        raise ValueError("lag order d must be >= 1")
    n, p = values.shape
    if n <= d:
        raise InsufficientDataError(f"need more than d={d} samples, got {n}")
    Z = values[d:, :]
    blocks = [values[d - lag: n - lag, :] for lag in range(1, d + 1)]
    Q = np.hstack(blocks)
    return LagMatrices(Z=Z, Q=Q, d=d)
