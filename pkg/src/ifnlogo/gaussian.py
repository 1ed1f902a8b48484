"""Sparse Gaussian models on a clique forest.

The precision matrix is assembled from local inversions,

    J = sum_c pad(S_c^-1) - sum_s pad(S_s^-1),

where ``S_c`` and ``S_s`` are covariance blocks on cliques and separators.
Log-determinant and Mahalanobis distances are evaluated through the same
blocks, so no global inversion is ever needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Mapping

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .dependence import (
    DependenceMatrix,
    ObservationMatrix,
    correlation_to_covariance,
    kendall_correlation,
    pearson_covariance,
)
from .errors import BlockConditioningError
from .forest import CliqueForest, edge_set, to_document, from_document

__all__ = [
    "Block",
    "SparsePrecision",
    "GaussianModel",
    "fit_mu",
    "assemble_precision",
    "log_det",
    "mahalanobis_sq",
    "quadratic_form",
    "gaussian_log_likelihood",
    "check_positive_definite",
    "dense_embedding",
    "pdf_factorization_check",
    "estimator_covariance",
    "fit_gaussian",
]

LOG_2PI = float(np.log(2.0 * np.pi))

# smallest admissible Cholesky pivot relative to the block diagonal entry
PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class Block:
    """Cholesky factors of a stack of equal-sized covariance blocks.

    ``sign`` is +1 for cliques and -1 for separators. ``index`` has shape
    (n, k); ``chol`` and ``whiten`` have shape (n, k, k).
    """

    sign: int
    index: NDArray[np.intp]
    chol: NDArray[np.float64]
    # transpose of chol^{-1}, so that |L^{-1} d|^2 = |d @ whiten|^2 per row
    whiten: NDArray[np.float64]


@dataclass(frozen=True)
class SparsePrecision:
    """Symmetric precision with support on forest edges plus the diagonal.

    Entries are kept as sorted coordinate arrays with ``rows <= cols``. When
    ``blocks`` is present, log-determinant and Mahalanobis distances use the
    clique/separator decomposition; otherwise a dense Cholesky factor.
    """

    p: int
    rows: NDArray[np.intp]
    cols: NDArray[np.intp]
    values: NDArray[np.float64]
    forest: CliqueForest | None = None
    blocks: tuple[Block, ...] | None = None

    @classmethod
    def from_entries(
        cls,
        p: int,
        entries: Mapping[tuple[int, int], float],
        forest: CliqueForest | None = None,
    ) -> "SparsePrecision":
        keys = sorted((min(i, j), max(i, j)) for i, j in entries)
        rows = np.array([k[0] for k in keys], dtype=np.intp)
        cols = np.array([k[1] for k in keys], dtype=np.intp)
        lookup = {(min(i, j), max(i, j)): float(v) for (i, j), v in entries.items()}
        values = np.array([lookup[k] for k in keys], dtype=np.float64)
        if forest is not None:
            allowed = edge_set(forest)
            stray = [k for k in keys if k[0] != k[1] and k not in allowed]
            if stray:
                raise ValueError(f"entries outside the forest edge set: {stray[:5]}")
        return cls(p, rows, cols, values, forest, None)

    @property
    def entries(self) -> dict[tuple[int, int], float]:
        return {
            (int(i), int(j)): float(v) for i, j, v in zip(self.rows, self.cols, self.values)
        }

    def dense(self) -> NDArray[np.float64]:
        out = np.zeros((self.p, self.p))
        out[self.rows, self.cols] = self.values
        out[self.cols, self.rows] = self.values
        return out

    def _dense_chol(self) -> NDArray[np.float64]:
        try:
            return np.linalg.cholesky(self.dense())
        except np.linalg.LinAlgError as exc:
            raise BlockConditioningError("precision matrix is not positive definite") from exc


def _as_obs(data: ObservationMatrix | NDArray) -> NDArray[np.float64]:
    if isinstance(data, ObservationMatrix):
        return data.values
    return np.atleast_2d(np.asarray(data, dtype=np.float64))


def fit_mu(data: ObservationMatrix | NDArray) -> NDArray[np.float64]:
    return _as_obs(data).mean(axis=0)


def _block_cholesky(
    cov: NDArray[np.float64], index: NDArray[np.intp], name: str, loading: float
) -> NDArray[np.float64]:
    block = cov[index[:, None], index]
    if loading:
        block = block + loading * np.eye(len(index))
    try:
        chol = np.linalg.cholesky(block)
    except np.linalg.LinAlgError as exc:
        raise BlockConditioningError(f"{name} block is not positive definite", *_parse(name)) from exc
    pivots = chol.diagonal() ** 2 / block.diagonal()
    if pivots.min() < PIVOT_TOL:
        raise BlockConditioningError(
            f"{name} block is numerically singular (relative pivot {pivots.min():.2e})",
            *_parse(name),
        )
    return chol


def _parse(name: str) -> tuple[str, int]:
    kind, _, idx = name.partition(" ")
    return kind, int(idx)


def _stacked_blocks(m: NDArray[np.float64], forest: CliqueForest, loading: float) -> tuple[Block, ...]:
    named = [(1, f"clique {k}", c) for k, c in enumerate(forest.cliques)] + [
        (-1, f"separator {k}", s.vertices) for k, s in enumerate(forest.separators)
    ]
    groups: dict[tuple[int, int], list[tuple[int, ...]]] = {}
    for sign, _, vertices in named:
        groups.setdefault((sign, len(vertices)), []).append(tuple(vertices))
    blocks = []
    for (sign, k), members in sorted(groups.items(), key=lambda kv: (-kv[0][0], kv[0][1])):
        index = np.asarray(members, dtype=np.intp)
        stack = m[index[:, :, None], index[:, None, :]]
        if loading:
            stack = stack + loading * np.eye(k)
        try:
            chol = np.linalg.cholesky(stack)
        except np.linalg.LinAlgError:
            chol = None
        diag = np.diagonal(stack, axis1=1, axis2=2)
        if chol is None or (np.diagonal(chol, axis1=1, axis2=2) ** 2 / diag).min() < PIVOT_TOL:
            # locate and report the first offending block in forest order
            for _, name, vertices in named:
                _block_cholesky(m, np.asarray(vertices, dtype=np.intp), name, loading)
            raise BlockConditioningError("block factorisation failed")
        linv = np.linalg.inv(chol)
        linv = np.tril(linv)
        blocks.append(Block(sign, index, chol, np.swapaxes(linv, 1, 2)))
    return tuple(blocks)


def assemble_precision(
    cov: DependenceMatrix | NDArray,
    forest: CliqueForest,
    loading: float = 0.0,
) -> SparsePrecision:
    """Maximum-likelihood sparse precision for covariance ``cov`` on ``forest``.

    Raises ``BlockConditioningError`` naming the first clique or separator
    whose block cannot be factorised. ``loading`` adds a constant to the
    diagonal of every block.
    """
    m = cov.matrix if isinstance(cov, DependenceMatrix) else np.asarray(cov, dtype=np.float64)
    if isinstance(cov, DependenceMatrix) and cov.is_correlation:
        raise ValueError("assemble_precision needs a covariance, not a correlation matrix")
    p = forest.p
    if m.shape != (p, p):
        raise ValueError(f"covariance shape {m.shape} does not match forest p={p}")

    blocks = _stacked_blocks(m, forest, loading)
    acc = np.zeros((p, p))
    support = np.zeros((p, p), dtype=bool)
    for b in blocks:
        inv = b.whiten @ np.swapaxes(b.whiten, 1, 2)
        inv = 0.5 * (inv + np.swapaxes(inv, 1, 2))
        rows, cols = b.index[:, :, None], b.index[:, None, :]
        np.add.at(acc, (rows, cols), b.sign * inv)
        support[rows, cols] = True
    rows, cols = np.nonzero(np.triu(support | np.eye(p, dtype=bool)))
    precision = SparsePrecision(p, rows.astype(np.intp), cols.astype(np.intp), acc[rows, cols], forest, blocks)
    if not check_positive_definite(precision):
        raise BlockConditioningError("assembled precision is not positive definite")
    return precision


def log_det(precision: SparsePrecision) -> float:
    if precision.blocks is None:
        return float(2.0 * np.log(np.diag(precision._dense_chol())).sum())
    # log|J_c| = -log|S_c|
    total = 0.0
    for b in precision.blocks:
        total -= b.sign * 2.0 * np.log(np.diagonal(b.chol, axis1=1, axis2=2)).sum()
    return float(total)


def mahalanobis_sq(
    x: NDArray[np.float64], mu: NDArray[np.float64], precision: SparsePrecision
) -> NDArray[np.float64] | float:
    """Squared Mahalanobis distance of each row of ``x`` (or a single vector)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    diff = np.atleast_2d(x) - np.asarray(mu, dtype=np.float64)
    if diff.shape[1] != precision.p:
        raise ValueError(f"expected {precision.p} variables, got {diff.shape[1]}")
    if precision.blocks is None:
        # J = L L^T  =>  d^2 = |L^T diff|^2
        d2 = ((diff @ precision._dense_chol()) ** 2).sum(axis=1)
    else:
        d2 = np.zeros(diff.shape[0])
        for b in precision.blocks:
            # (n, q, k) @ (n, k, k)
            z = np.swapaxes(diff[:, b.index], 0, 1) @ b.whiten
            d2 += b.sign * (z * z).sum(axis=(0, 2))
    d2 = np.maximum(d2, 0.0)
    return float(d2[0]) if single else d2


def quadratic_form(
    x: NDArray[np.float64], mu: NDArray[np.float64], precision: SparsePrecision
) -> NDArray[np.float64]:
    """Direct (x - mu)^T J (x - mu) from the stored entries."""
    diff = np.atleast_2d(np.asarray(x, dtype=np.float64)) - mu
    off = precision.rows != precision.cols
    diag = ~off
    out = (precision.values[diag] * diff[:, precision.rows[diag]] ** 2).sum(axis=1)
    out += 2.0 * (
        precision.values[off] * diff[:, precision.rows[off]] * diff[:, precision.cols[off]]
    ).sum(axis=1)
    return out


def check_positive_definite(precision: SparsePrecision) -> bool:
    try:
        np.linalg.cholesky(precision.dense())
    except np.linalg.LinAlgError:
        return False
    return True


def dense_embedding(precision: SparsePrecision) -> NDArray[np.float64]:
    return precision.dense()


@dataclass(frozen=True)
class GaussianModel:
    mu: NDArray[np.float64]
    precision: SparsePrecision

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=np.float64)
        if mu.shape != (self.precision.p,):
            raise ValueError(f"mu has shape {mu.shape}, precision has p={self.precision.p}")
        object.__setattr__(self, "mu", mu)

    @property
    def forest(self) -> CliqueForest | None:
        return self.precision.forest


def gaussian_log_likelihood(data: ObservationMatrix | NDArray, model: GaussianModel) -> float:
    x = _as_obs(data)
    q, p = x.shape
    d2 = mahalanobis_sq(x, model.mu, model.precision)
    return 0.5 * q * log_det(model.precision) - 0.5 * float(np.sum(d2)) - 0.5 * q * p * LOG_2PI


def _normal_logpdf(diff: NDArray[np.float64], cov: NDArray[np.float64]) -> float:
    chol = np.linalg.cholesky(cov)
    z = scipy.linalg.solve_triangular(chol, diff, lower=True)
    return float(-0.5 * z @ z - np.log(np.diag(chol)).sum() - 0.5 * len(diff) * LOG_2PI)


def pdf_factorization_check(x: NDArray[np.float64], model: GaussianModel) -> float:
    """Relative gap between the joint normal density and its clique/separator
    factorisation, using marginal blocks of the dense covariance."""
    forest = model.precision.forest
    if forest is None:
        raise ValueError("model has no forest attached")
    sigma = np.linalg.inv(model.precision.dense())
    sigma = 0.5 * (sigma + sigma.T)
    diff = np.asarray(x, dtype=np.float64) - model.mu
    joint = _normal_logpdf(diff, sigma)
    factored = 0.0
    for sign, vertices in forest.blocks():
        idx = np.asarray(vertices)
        factored += sign * _normal_logpdf(diff[idx], sigma[np.ix_(idx, idx)])
    return float(abs(np.expm1(factored - joint)))


Estimator = Literal["pearson", "kendall"]


def estimator_covariance(
    data: ObservationMatrix | NDArray,
    estimator: Estimator,
    kendall_transform: Literal["none", "sine"] = "none",
) -> DependenceMatrix:
    if estimator == "pearson":
        return pearson_covariance(data)
    if estimator == "kendall":
        return correlation_to_covariance(kendall_correlation(data, kendall_transform))
    raise ValueError(f"unknown estimator {estimator!r}")


def fit_gaussian(
    data: ObservationMatrix | NDArray,
    forest: CliqueForest,
    estimator: Estimator = "pearson",
    *,
    covariance: DependenceMatrix | None = None,
    loading: float = 0.0,
    kendall_transform: Literal["none", "sine"] = "none",
) -> GaussianModel:
    """Sample mean plus locally assembled precision.

    A precomputed ``covariance`` for the same data may be passed to skip the
    estimator.
    """
    cov = covariance if covariance is not None else estimator_covariance(
        data, estimator, kendall_transform
    )
    return GaussianModel(fit_mu(data), assemble_precision(cov, forest, loading))


# --- model documents ---------------------------------------------------------


def precision_to_list(precision: SparsePrecision) -> list[list]:
    return [[int(i), int(j), float(v)] for i, j, v in zip(precision.rows, precision.cols, precision.values)]


def precision_from_list(p: int, items: list, forest: CliqueForest | None) -> SparsePrecision:
    entries = {}
    for k, item in enumerate(items):
        if not (isinstance(item, list) and len(item) == 3):
            raise ValueError(f"precision[{k}] must be [i, j, value]")
        entries[(int(item[0]), int(item[1]))] = float(item[2])
    return SparsePrecision.from_entries(p, entries, forest)


def gaussian_to_document(model: GaussianModel) -> dict:
    if model.forest is None:
        raise ValueError("model has no forest attached")
    return {
        "type": "gaussian",
        "mu": [float(v) for v in model.mu],
        "precision": precision_to_list(model.precision),
        "network": to_document(model.forest),
    }


def gaussian_from_document(doc: dict) -> GaussianModel:
    forest = from_document(doc["network"])
    return GaussianModel(
        np.asarray(doc["mu"], dtype=np.float64),
        precision_from_list(forest.p, doc["precision"], forest),
    )
