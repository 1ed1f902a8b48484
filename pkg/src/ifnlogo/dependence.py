"""Pearson and Kendall dependence matrices.

Covariances use the maximum-likelihood normalisation ``1/q``. Kendall's tau is
the tie-corrected tau-b, computed per pair with Knight's merge-sort algorithm
(sort by the first variable, count inversions of the second).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numba
import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateInputError

__all__ = [
    "ObservationMatrix",
    "DependenceMatrix",
    "pearson_covariance",
    "pearson_correlation",
    "kendall_correlation",
    "correlation_to_covariance",
    "covariance_to_correlation",
    "tau_b_from_counts",
]

Kind = Literal["pearson_covariance", "pearson_correlation", "kendall_correlation"]
CORRELATION_KINDS = ("pearson_correlation", "kendall_correlation")


@dataclass(frozen=True)
class ObservationMatrix:
    """q x p block of observations; rows are observations, columns variables.

    Only shape and finiteness are checked here. Estimators that need at least
    two rows or non-constant columns raise ``DegenerateInputError`` themselves.
    """

    values: NDArray[np.float64]
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"observations must be two-dimensional, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            rows, cols = np.nonzero(~np.isfinite(values))
            raise DegenerateInputError(
                f"non-finite entry at row {rows[0]}, column {cols[0]}"
            )
        labels = tuple(str(s) for s in self.labels) or tuple(
            f"x{i}" for i in range(values.shape[1])
        )
        if len(labels) != values.shape[1]:
            raise ValueError(f"{len(labels)} labels for {values.shape[1]} columns")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)

    @property
    def q(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def rows(self, index) -> "ObservationMatrix":
        return ObservationMatrix(self.values[index], self.labels)


@dataclass(frozen=True)
class DependenceMatrix:
    kind: Kind
    matrix: NDArray[np.float64]
    scale: NDArray[np.float64] = field(default_factory=lambda: np.empty(0))

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"dependence matrix must be square, got {m.shape}")
        if not np.allclose(m, m.T, rtol=0.0, atol=1e-12):
            raise ValueError("dependence matrix is not symmetric")
        if self.kind in CORRELATION_KINDS:
            if not np.allclose(np.diag(m), 1.0, rtol=0.0, atol=1e-12):
                raise ValueError("correlation matrix must have a unit diagonal")
            if np.any(np.abs(m) > 1.0 + 1e-12):
                raise ValueError("correlation entries must lie in [-1, 1]")
        elif self.kind == "pearson_covariance":
            if np.any(np.diag(m) <= 0.0):
                raise ValueError("covariance diagonal must be strictly positive")
        else:
            raise ValueError(f"unknown dependence kind {self.kind!r}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "scale", np.asarray(self.scale, dtype=np.float64))

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_correlation(self) -> bool:
        return self.kind in CORRELATION_KINDS


def _as_values(data: ObservationMatrix | NDArray) -> tuple[NDArray[np.float64], Sequence[str]]:
    if isinstance(data, ObservationMatrix):
        return data.values, data.labels
    obs = ObservationMatrix(np.asarray(data, dtype=np.float64))
    return obs.values, obs.labels


def _check_columns(values: NDArray[np.float64], labels: Sequence[str]) -> None:
    if values.shape[0] < 2:
        raise DegenerateInputError(f"need at least 2 observations, got {values.shape[0]}")
    constant = np.all(values == values[0], axis=0)
    if np.any(constant):
        j = int(np.flatnonzero(constant)[0])
        raise DegenerateInputError(f"column {labels[j]!r} (index {j}) has zero variance")


def pearson_covariance(data: ObservationMatrix | NDArray) -> DependenceMatrix:
    values, labels = _as_values(data)
    _check_columns(values, labels)
    centred = values - values.mean(axis=0)
    cov = centred.T @ centred / values.shape[0]
    cov = 0.5 * (cov + cov.T)
    return DependenceMatrix("pearson_covariance", cov, np.sqrt(np.diag(cov)))


def covariance_to_correlation(cov: DependenceMatrix) -> DependenceMatrix:
    scale = np.sqrt(np.diag(cov.matrix))
    corr = cov.matrix / np.outer(scale, scale)
    np.fill_diagonal(corr, 1.0)
    return DependenceMatrix("pearson_correlation", np.clip(corr, -1.0, 1.0), scale)


def pearson_correlation(data: ObservationMatrix | NDArray) -> DependenceMatrix:
    return covariance_to_correlation(pearson_covariance(data))


def correlation_to_covariance(
    corr: DependenceMatrix, scale: NDArray[np.float64] | None = None
) -> DependenceMatrix:
    """Scale a correlation matrix by per-variable standard deviations.

    ``scale`` defaults to the vector stored on ``corr``.
    """
    if not corr.is_correlation:
        raise ValueError(f"expected a correlation matrix, got kind {corr.kind!r}")
    s = corr.scale if scale is None else np.asarray(scale, dtype=np.float64)
    if s.shape != (corr.p,):
        raise ValueError(f"scale must have length {corr.p}")
    if np.any(s <= 0.0) or not np.all(np.isfinite(s)):
        raise ValueError("scale entries must be strictly positive")
    cov = corr.matrix * np.outer(s, s)
    return DependenceMatrix("pearson_covariance", 0.5 * (cov + cov.T), s)


# --- Kendall tau-b -----------------------------------------------------------


@numba.njit(cache=True)
def _tie_pairs(sorted_values):
    total = 0
    run = 1
    for k in range(1, sorted_values.shape[0]):
        if sorted_values[k] == sorted_values[k - 1]:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    total += run * (run - 1) // 2
    return total


@numba.njit(cache=True)
def _count_inversions(a):
    # bottom-up merge sort; returns (#pairs k<l with a[k] > a[l], sorted copy)
    n = a.shape[0]
    src = a.copy()
    dst = np.empty_like(a)
    swaps = 0
    width = 1
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i = lo
            j = mid
            k = lo
            while i < mid and j < hi:
                if src[j] < src[i]:
                    dst[k] = src[j]
                    swaps += mid - i
                    j += 1
                else:
                    dst[k] = src[i]
                    i += 1
                k += 1
            while i < mid:
                dst[k] = src[i]
                i += 1
                k += 1
            while j < hi:
                dst[k] = src[j]
                j += 1
                k += 1
        src, dst = dst, src
        width *= 2
    return swaps, src


@numba.njit(cache=True)
def _pair_counts(x_sorted, y_by_x):
    """Counts for one pair; ``y_by_x`` is y permuted into x-sorted order."""
    n = x_sorted.shape[0]
    y = y_by_x.copy()
    # within runs of tied x, order y ascending so tied-x pairs are not inversions
    n1 = 0
    n3 = 0
    start = 0
    for k in range(1, n + 1):
        if k == n or x_sorted[k] != x_sorted[start]:
            run = k - start
            if run > 1:
                n1 += run * (run - 1) // 2
                y[start:k] = np.sort(y[start:k])
                n3 += _tie_pairs(y[start:k])
            start = k
    swaps, y_sorted = _count_inversions(y)
    n2 = _tie_pairs(y_sorted)
    n0 = n * (n - 1) // 2
    return n0 - n1 - n2 + n3 - 2 * swaps, n1, n2


@numba.njit(cache=True)
def _kendall_counts(values):
    q, p = values.shape
    num = np.zeros((p, p), dtype=np.int64)
    tx = np.zeros((p, p), dtype=np.int64)
    ty = np.zeros((p, p), dtype=np.int64)
    for i in range(p):
        order = np.argsort(values[:, i], kind="mergesort")
        xs = values[order, i]
        for j in range(i + 1, p):
            s, n1, n2 = _pair_counts(xs, values[order, j])
            num[i, j] = s
            tx[i, j] = n1
            ty[i, j] = n2
    return num, tx, ty


def tau_b_from_counts(concordant_minus_discordant: int, n: int, x_ties: int, y_ties: int) -> float:
    """tau-b from integer pair counts; ``x_ties``/``y_ties`` count tied pairs."""
    n0 = n * (n - 1) // 2
    denom = math.sqrt(float(n0 - x_ties) * float(n0 - y_ties))
    return concordant_minus_discordant / denom


def kendall_correlation(
    data: ObservationMatrix | NDArray, transform: Literal["none", "sine"] = "none"
) -> DependenceMatrix:
    """Pairwise Kendall tau-b with unit diagonal.

    ``transform="sine"`` maps each coefficient through ``sin(pi * tau / 2)``,
    the elliptical-consistent correlation. The stored ``scale`` is the ML
    standard deviation of each column.
    """
    values, labels = _as_values(data)
    _check_columns(values, labels)
    q, p = values.shape
    num, tx, ty = _kendall_counts(np.ascontiguousarray(values))
    tau = np.eye(p)
    for i in range(p):
        for j in range(i + 1, p):
            t = tau_b_from_counts(int(num[i, j]), q, int(tx[i, j]), int(ty[i, j]))
            tau[i, j] = tau[j, i] = t
    if transform == "sine":
        tau = np.sin(0.5 * np.pi * tau)
        np.fill_diagonal(tau, 1.0)
    elif transform != "none":
        raise ValueError(f"unknown Kendall transform {transform!r}")
    scale = values.std(axis=0)
    return DependenceMatrix("kendall_correlation", np.clip(tau, -1.0, 1.0), scale)
