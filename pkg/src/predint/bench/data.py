"""Datasets: CSV ingestion, z-score standardization of predictors, provenance."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import synthetic

NULL_TOKENS = frozenset({"", "na", "nan", "null", "none", "?"})
MIN_ROWS = 20


class DataError(ValueError):
    """Input data cannot be turned into a Dataset."""


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    X: np.ndarray
    y: np.ndarray
    means: np.ndarray
    sds: np.ndarray
    source: dict
    dropped_rows: int = 0
    constant_columns: tuple[int, ...] = ()
    columns: tuple[str, ...] = field(default=())

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def standardize(self, raw) -> np.ndarray:
        """Apply this dataset's column statistics to raw predictor rows."""
        raw = np.atleast_2d(np.asarray(raw, dtype=float))
        if raw.shape[1] != self.p:
            raise DataError(f"expected {self.p} predictors, got {raw.shape[1]}")
        return (raw - self.means) / self.sds

    def destandardize(self, Z) -> np.ndarray:
        return np.asarray(Z, dtype=float) * self.sds + self.means


def standardize(X) -> tuple[np.ndarray, np.ndarray, np.ndarray, tuple[int, ...]]:
    """Z-score columns; a constant column is only centred and reported."""
    X = np.asarray(X, dtype=float)
    means = X.mean(axis=0)
    sds = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1])
    constant = tuple(int(j) for j in np.flatnonzero(sds == 0))
    sds = np.where(sds == 0, 1.0, sds)
    return (X - means) / sds, means, sds, constant


def from_arrays(name: str, X, y, source: dict, dropped: int = 0,
                columns: tuple[str, ...] = ()) -> Dataset:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    Z, means, sds, constant = standardize(X)
    return Dataset(name, Z, y, means, sds, source, dropped, constant, columns)


def _resolve_response(header: list[str], response) -> int:
    if response is None:
        return len(header) - 1
    if isinstance(response, int) or (isinstance(response, str) and response.lstrip("-").isdigit()):
        idx = int(response)
        if idx < 0:
            idx += len(header)
        if not 0 <= idx < len(header):
            raise DataError(f"response index {response} outside 0..{len(header) - 1}")
        return idx
    if response in header:
        return header.index(response)
    raise DataError(f"response column {response!r} not in header {header}")


def load_csv(path, response=None, delimiter: str = ",", name: str | None = None) -> Dataset:
    """Read a headed numeric CSV. Rows holding a null token are dropped and
    counted; any other non-numeric cell is an error naming row and column."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh, delimiter=delimiter))
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise DataError(f"{path}: need at least 2 columns, found {len(header)}")
    ycol = _resolve_response(header, response)

    values, dropped = [], 0
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        cells = [c.strip() for c in row]
        if any(c.lower() in NULL_TOKENS for c in cells):
            dropped += 1
            continue
        parsed = []
        for col, c in zip(header, cells):
            try:
                v = float(c)
            except ValueError:
                raise DataError(f"{path}:{lineno}: column {col!r} is not numeric: {c!r}") from None
            if not math.isfinite(v):
                dropped += 1
                break
            parsed.append(v)
        else:
            values.append(parsed)
    if len(values) < MIN_ROWS:
        raise DataError(
            f"{path}: {len(values)} complete rows after dropping {dropped}; need {MIN_ROWS}"
        )
    data = np.array(values)
    y = data[:, ycol]
    X = np.delete(data, ycol, axis=1)
    predictors = tuple(h for j, h in enumerate(header) if j != ycol)
    stem = name or str(path).rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return from_arrays(stem, X, y, {"kind": "csv", "path": str(path),
                                    "response": header[ycol]}, dropped, predictors)


def gen_synthetic(kind: str, n: int, p: int = 1, noise: float = 1.0, seed: int = 42) -> Dataset:
    X, y = synthetic.sample(kind, n, p, noise, seed)
    src = {"kind": "synthetic", "generator": kind, "n": n, "p": p,
           "noise": noise, "seed": seed}
    cols = tuple(f"x{j + 1}" for j in range(X.shape[1]))
    return from_arrays(kind, X, y, src, columns=cols)
