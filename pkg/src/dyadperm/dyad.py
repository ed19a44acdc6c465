"""Dyadic matrices and their deterministic summaries.

A dyadic matrix is a symmetric ``n x n`` array with zero diagonal holding a
pairwise measurement between ``n`` units. Every estimator in the package
works on the ``n(n-1)`` off-diagonal entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .exceptions import (
    AsymmetricError,
    NonFiniteEntryError,
    NonzeroDiagonalError,
    NotSquareError,
    PermutationError,
    TooSmallError,
)

SYMMETRY_RTOL = 1e-9
MIN_UNITS = 3


@dataclass(frozen=True, eq=False)
class DyadMatrix:
    """Validated symmetric matrix with zero diagonal.

    Build instances with :func:`new_dyad_matrix`; the constructor assumes
    ``values`` already satisfies the invariants.
    """

    values: np.ndarray
    labels: Optional[tuple] = None

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, DyadMatrix):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    __hash__ = None

    def off_diagonal(self) -> np.ndarray:
        """Off-diagonal entries in row-major order (length ``n(n-1)``)."""
        mask = ~np.eye(self.n, dtype=bool)
        return self.values[mask]

    def __repr__(self):
        return f"DyadMatrix(n={self.n})"


def new_dyad_matrix(values, labels: Optional[Sequence] = None) -> DyadMatrix:
    """Validate ``values`` and wrap it as a :class:`DyadMatrix`.

    Entries passing the symmetry check are replaced by ``(a_ij + a_ji) / 2``
    so downstream code sees exact symmetry.

    Raises
    ------
    NotSquareError, TooSmallError, NonFiniteEntryError, AsymmetricError,
    NonzeroDiagonalError
    """
    if isinstance(values, DyadMatrix):
        if labels is None:
            return values
        values = values.values
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise NotSquareError(f"expected a square matrix, got shape {arr.shape}")
    n = arr.shape[0]
    if n < MIN_UNITS:
        raise TooSmallError(f"need at least {MIN_UNITS} units, got {n}")
    if not np.all(np.isfinite(arr)):
        i, j = np.argwhere(~np.isfinite(arr))[0]
        raise NonFiniteEntryError(f"non-finite entry at ({i}, {j})")
    scale = float(np.max(np.abs(arr)))
    gap = np.abs(arr - arr.T)
    if scale > 0 and gap.max() > SYMMETRY_RTOL * scale:
        i, j = np.unravel_index(np.argmax(gap), gap.shape)
        raise AsymmetricError(
            f"a[{i},{j}]={arr[i, j]!r} differs from a[{j},{i}]={arr[j, i]!r}"
        )
    if np.any(np.diag(arr) != 0):
        i = int(np.flatnonzero(np.diag(arr))[0])
        raise NonzeroDiagonalError(f"diagonal entry {i} is {arr[i, i]!r}")
    arr = 0.5 * (arr + arr.T)
    arr.setflags(write=False)
    if labels is not None:
        labels = tuple(str(x) for x in labels)
        if len(labels) != n:
            raise NotSquareError(f"{len(labels)} labels for {n} units")
    return DyadMatrix(arr, labels)


def off_diagonal_mean(m: DyadMatrix) -> float:
    n = m.n
    return float(np.sum(m.values) / (n * (n - 1)))


def centered(m: DyadMatrix) -> np.ndarray:
    """``a_ij - a_bar`` off the diagonal, zero on it."""
    out = m.values - off_diagonal_mean(m)
    np.fill_diagonal(out, 0.0)
    return out


@dataclass(frozen=True)
class DyadStats:
    """Row-level decomposition of a dyadic matrix.

    ``row_means[i]`` is the demeaned row average
    ``(n-2)^-1 sum_{j != i} (a_ij - a_bar)`` and ``double_demeaned[i, j]`` is
    ``a_ij - row_means[i] - row_means[j] - a_bar`` (zero on the diagonal).
    ``moments[(block, k)]`` holds ``m_1k`` (block 1, row means) and ``m_2k``
    (block 2, double-demeaned entries).
    """

    grand_mean: float
    row_means: np.ndarray
    double_demeaned: np.ndarray
    moments: Mapping = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.row_means.shape[0]

    def moment(self, block: int, k: float) -> float:
        if (block, k) in self.moments:
            return self.moments[(block, k)]
        return _moment(self.row_means, self.double_demeaned, block, k)


def _moment(row_means, double_demeaned, block, k):
    n = row_means.shape[0]
    if block == 1:
        return float(np.sum(np.abs(row_means) ** k) / n)
    if block == 2:
        off = ~np.eye(n, dtype=bool)
        return float(np.sum(np.abs(double_demeaned[off]) ** k) / (n * (n - 1)))
    raise ValueError(f"block must be 1 or 2, got {block}")


def dyad_stats(m: DyadMatrix) -> DyadStats:
    n = m.n
    abar = off_diagonal_mean(m)
    dev = centered(m)
    row_means = dev.sum(axis=1) / (n - 2)
    tilde = m.values - row_means[:, None] - row_means[None, :] - abar
    np.fill_diagonal(tilde, 0.0)
    row_means.setflags(write=False)
    tilde.setflags(write=False)
    moments = {(b, k): _moment(row_means, tilde, b, k) for b in (1, 2) for k in (2, 4)}
    return DyadStats(abar, row_means, tilde, moments)


def check_permutation(pi, n: int) -> np.ndarray:
    """Return ``pi`` as an int64 array after checking it is a bijection on ``range(n)``."""
    arr = np.asarray(pi)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise PermutationError(f"permutation of length {arr.size} for {n} units")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise PermutationError("permutation entries must be integers")
    arr = arr.astype(np.int64)
    if np.any(arr < 0) or np.any(arr >= n) or np.unique(arr).size != n:
        raise PermutationError("permutation is not a bijection on 0..n-1")
    return arr


def apply_double_permutation(m: DyadMatrix, pi) -> DyadMatrix:
    """Relabel units: ``out[i, j] = m[pi[i], pi[j]]`` (0-based ``pi``)."""
    pi = check_permutation(pi, m.n)
    out = m.values[np.ix_(pi, pi)]
    out.setflags(write=False)
    labels = None if m.labels is None else tuple(m.labels[k] for k in pi)
    return DyadMatrix(out, labels)
