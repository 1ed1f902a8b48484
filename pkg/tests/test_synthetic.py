from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from ifnlogo.errors import DomainError
from ifnlogo.student import estimate_nu_tail
from ifnlogo.synthetic import GeneratorSpec, factor_covariance, make_rng, sample, sample_gaussian, sample_student


def spec(p=3, family="normal", nu=None, seed=0, q=1000, sigma=None):
    sigma = np.eye(p) if sigma is None else sigma
    return GeneratorSpec(np.zeros(p), sigma, family, nu, seed, q)


def test_gaussian_moments():
    x = sample_gaussian(spec(q=100000)).values
    assert np.abs(x.mean(axis=0)).max() < 0.02
    assert np.abs(np.cov(x, rowvar=False) - np.eye(3)).max() < 0.05


def test_gaussian_scalar_variance():
    x = sample_gaussian(spec(1, q=100000, sigma=np.array([[4.0]]))).values
    assert x.var() == pytest.approx(4.0, rel=0.05)


def test_same_seed_same_output():
    for family, nu in (("normal", None), ("student_t", 3.0)):
        a = sample(spec(4, family, nu, seed=11, q=500))
        b = sample(spec(4, family, nu, seed=11, q=500))
        assert a.values.tobytes() == b.values.tobytes()
    c = sample(spec(4, seed=12, q=500))
    assert not np.array_equal(a.values, c.values)


@pytest.mark.xfail(strict=True, reason="sample variance at nu=2.2 converges too slowly; see decisions ledger")
def test_student_covariance_at_operating_nu():
    x = sample_student(spec(3, "student_t", 2.2, seed=1, q=100000)).values
    cov = np.cov(x, rowvar=False)
    assert np.abs(cov - np.eye(3)).max() < 0.15


def test_student_covariance_at_moderate_nu():
    x = sample_student(spec(3, "student_t", 3.0, seed=1, q=100000)).values
    assert np.abs(np.cov(x, rowvar=False) - np.eye(3)).max() < 0.15


@pytest.mark.parametrize("nu", [2.2, 3.0, 8.0])
def test_student_marginal_matches_scipy(nu):
    x = sample_student(spec(1, "student_t", nu, seed=5, q=50000)).values[:, 0]
    ref = stats.t(nu, scale=np.sqrt((nu - 2) / nu))
    assert stats.kstest(x, ref.cdf).pvalue > 0.01


def test_huge_nu_matches_gaussian_marginals():
    t = sample_student(spec(2, "student_t", 1e6, seed=2, q=20000)).values
    g = sample_gaussian(spec(2, seed=3, q=20000)).values
    for j in range(2):
        assert stats.ks_2samp(t[:, j], g[:, j]).pvalue > 0.01


def test_student_kurtosis():
    x = sample_student(spec(1, "student_t", 10.0, seed=4, q=1000000)).values[:, 0]
    assert stats.kurtosis(x) == pytest.approx(1.0, abs=0.3)


def test_student_needs_nu_above_two():
    with pytest.raises(DomainError):
        spec(2, "student_t", 2.0)
    with pytest.raises(DomainError):
        spec(2, "student_t", None)


def test_non_pd_sigma_rejected():
    with pytest.raises(ValueError):
        sample_gaussian(spec(2, sigma=np.array([[1.0, 2.0], [2.0, 1.0]])))


def test_family_mismatch():
    with pytest.raises(ValueError):
        sample_student(spec(2))


@pytest.mark.parametrize(
    "nu",
    [
        2.5,
        3.0,
        3.5,
        4.0,
        pytest.param(4.5, marks=pytest.mark.xfail(strict=True, reason="second-order bias; see decisions ledger")),
        pytest.param(5.0, marks=pytest.mark.xfail(strict=True, reason="second-order bias; see decisions ledger")),
    ],
)
def test_tail_index_recovered(nu):
    for seed in range(3):
        x = sample_student(spec(1, "student_t", nu, seed=seed, q=100000))
        assert abs(estimate_nu_tail(x, 0.01) - nu) <= 0.5


def test_factor_covariance_is_pd():
    for seed in range(20):
        cov = factor_covariance(50, make_rng(seed))
        assert np.linalg.eigvalsh(cov).min() > 0
        vols = np.sqrt(np.diag(cov))
        assert vols.min() >= 0.01 and vols.max() <= 0.03


def test_make_rng_keys_are_independent_streams():
    a = make_rng(1, 2).standard_normal(5)
    b = make_rng(1, 3).standard_normal(5)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, make_rng(1, 2).standard_normal(5))
