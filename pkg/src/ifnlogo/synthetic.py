"""Seeded multivariate Normal and Student-t samples.

All draws come from numpy's Philox generator (a counter-based bit generator)
seeded with ``GeneratorSpec.seed``; gamma variates use numpy's
Marsaglia-Tsang sampler. Student-t samples use the normal-mixture
representation scaled so that ``sigma`` is the covariance, not the shape
matrix:

    x = mu + L g sqrt((nu - 2) / (nu z)),   z ~ Gamma(nu/2, rate nu/2).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from .dependence import ObservationMatrix
from .errors import DomainError

__all__ = ["GeneratorSpec", "make_rng", "sample_gaussian", "sample_student", "sample", "factor_covariance"]


def make_rng(*key: int) -> np.random.Generator:
    """Philox stream keyed by one or more non-negative integers."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


@dataclass(frozen=True)
class GeneratorSpec:
    mu: NDArray[np.float64]
    sigma: NDArray[np.float64]
    family: Literal["normal", "student_t"] = "normal"
    nu: float | None = None
    seed: int = 0
    q: int = 1000
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        mu = np.atleast_1d(np.asarray(self.mu, dtype=np.float64))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=np.float64))
        if sigma.shape != (mu.size, mu.size):
            raise ValueError(f"sigma shape {sigma.shape} does not match mu of length {mu.size}")
        if self.family not in ("normal", "student_t"):
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "student_t" and (self.nu is None or not self.nu > 2.0):
            raise DomainError(f"student_t needs nu > 2, got {self.nu}")
        if self.q < 0:
            raise ValueError("q must be non-negative")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    def cholesky(self) -> NDArray[np.float64]:
        try:
            return np.linalg.cholesky(self.sigma)
        except np.linalg.LinAlgError as exc:
            raise ValueError("sigma is not positive definite") from exc


def sample_gaussian(spec: GeneratorSpec) -> ObservationMatrix:
    if spec.family != "normal":
        raise ValueError("sample_gaussian needs family='normal'")
    chol = spec.cholesky()
    rng = make_rng(spec.seed)
    g = rng.standard_normal((spec.q, spec.mu.size))
    return ObservationMatrix(spec.mu + g @ chol.T, spec.labels)


def sample_student(spec: GeneratorSpec) -> ObservationMatrix:
    if spec.family != "student_t":
        raise ValueError("sample_student needs family='student_t'")
    nu = float(spec.nu)
    chol = spec.cholesky()
    rng = make_rng(spec.seed)
    g = rng.standard_normal((spec.q, spec.mu.size))
    z = rng.gamma(0.5 * nu, 2.0 / nu, size=spec.q)
    scale = np.sqrt((nu - 2.0) / (nu * z))
    return ObservationMatrix(spec.mu + (g @ chol.T) * scale[:, None], spec.labels)


def sample(spec: GeneratorSpec) -> ObservationMatrix:
    return sample_gaussian(spec) if spec.family == "normal" else sample_student(spec)


def factor_covariance(
    p: int,
    rng: np.random.Generator,
    n_sectors: int = 5,
    vol_range: tuple[float, float] = (0.01, 0.03),
) -> NDArray[np.float64]:
    """Equity-like covariance: one market factor, sector factors, idiosyncratic noise.

    Stands in for an empirical covariance when no price data is supplied.
    """
    sector = rng.integers(0, n_sectors, size=p)
    market = rng.uniform(0.3, 0.7, size=p)
    loading = rng.uniform(0.2, 0.6, size=p)
    corr = np.outer(market, market)
    same = sector[:, None] == sector[None, :]
    corr += np.where(same, np.outer(loading, loading), 0.0)
    # factor parts contribute at most 0.85 to the diagonal, so the residual
    # idiosyncratic variance stays positive and corr is positive definite
    np.fill_diagonal(corr, 1.0)
    vols = rng.uniform(*vol_range, size=p)
    cov = corr * np.outer(vols, vols)
    return 0.5 * (cov + cov.T)
