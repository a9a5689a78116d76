"""Dummy-coded design matrices for the regression-style conditional models.

Layout: intercept, then per predictor either its dummy columns (reference =
first level, dropped) or, for numerics, a linear column - preceded by a
missing-state dummy and zero-filled values whenever the fit data contains
missing cells.  Constant columns are dropped at fit time with a recorded
note; rank-deficient designs get aliased columns dropped at solve time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import MethodError
from .tabular import Categorical, Dataset, Numeric

INTERCEPT = "(intercept)"


@dataclass(frozen=True)
class Design:
    """A fitted design layout, reusable on new data with the same columns."""

    source_columns: tuple[str, ...]
    terms: tuple[tuple, ...]          # ("intercept",) | ("numeric", col) |
                                      # ("missing", col) | ("dummy", col, level_code)
    labels: tuple[str, ...]           # per kept design column
    variables: tuple[str, ...]        # source variable per kept design column
    notes: tuple[str, ...]

    @property
    def n_columns(self) -> int:
        return len(self.terms)

    def matrix(self, data: Dataset) -> np.ndarray:
        n = data.n_rows
        cols = np.empty((n, len(self.terms)), dtype=np.float64)
        for j, term in enumerate(self.terms):
            cols[:, j] = _term_values(term, data, n)
        return cols


def _term_values(term: tuple, data: Dataset, n: int) -> np.ndarray:
    tag = term[0]
    if tag == "intercept":
        return np.ones(n)
    col = data.column(term[1])
    if tag == "numeric":
        v = col.values.copy()
        v[np.isnan(v)] = 0.0
        return v
    if tag == "missing":
        return np.isnan(col.values).astype(np.float64)
    if tag == "dummy":
        return (col.values == term[2]).astype(np.float64)
    raise MethodError(f"unknown design term {term!r}")


def _all_terms(data: Dataset, columns) -> tuple[list[tuple], list[str], list[str]]:
    terms: list[tuple] = [("intercept",)]
    labels = [INTERCEPT]
    variables = [INTERCEPT]
    for name in columns:
        col = data.column(name)
        if isinstance(col.kind, Numeric):
            if np.isnan(col.values).any():
                terms.append(("missing", name))
                labels.append(f"{name}:missing")
                variables.append(name)
            terms.append(("numeric", name))
            labels.append(name)
            variables.append(name)
        else:
            assert isinstance(col.kind, Categorical)
            for code in range(1, len(col.kind.levels)):
                terms.append(("dummy", name, code))
                labels.append(f"{name}={col.kind.levels[code]}")
                variables.append(name)
    return terms, labels, variables


def build_design(data: Dataset, columns=None) -> Design:
    """Fit a design layout on ``data``; constant non-intercept columns drop."""
    columns = tuple(columns) if columns is not None else data.names
    terms, labels, variables = _all_terms(data, columns)
    keep: list[int] = []
    notes: list[str] = []
    n = data.n_rows
    for j, term in enumerate(terms):
        if term[0] == "intercept":
            keep.append(j)
            continue
        v = _term_values(term, data, n)
        if v.size and v.max() == v.min():
            notes.append(f"dropped constant design column {labels[j]!r}")
        else:
            keep.append(j)
    return Design(
        source_columns=columns,
        terms=tuple(terms[j] for j in keep),
        labels=tuple(labels[j] for j in keep),
        variables=tuple(variables[j] for j in keep),
        notes=tuple(notes),
    )


def drop_aliased(X: np.ndarray, labels) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Remove linearly dependent columns via pivoted QR.

    Returns (reduced matrix, kept column indices in original order, notes).
    """
    n, p = X.shape
    if p == 0 or n == 0:
        return X, np.arange(p), []
    _, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = diag[0] * max(n, p) * np.finfo(np.float64).eps if diag.size else 0.0
    rank = int((diag > tol).sum())
    if rank == p:
        return X, np.arange(p), []
    kept = np.sort(piv[:rank])
    dropped = np.sort(piv[rank:])
    notes = [f"dropped aliased design column {labels[j]!r}" for j in dropped]
    return X[:, kept], kept, notes
