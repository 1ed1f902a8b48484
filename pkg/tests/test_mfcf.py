from __future__ import annotations

import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ifnlogo.errors import ConfigError
from ifnlogo.forest import edge_set, serialize, validate
from ifnlogo.mfcf import BuildConfig, build_mfcf, gain

import oracles


def random_corr(rng, p, q=None):
    x = rng.standard_normal((q or p + 10, p)) @ rng.standard_normal((p, p))
    return np.corrcoef(x, rowvar=False)


def expected_edges(p, R):
    return R * (R - 1) // 2 + (p - R) * (R - 1)


def test_gain_examples():
    corr = np.eye(4)
    assert gain(0, (1, 2), corr) == 0.0
    corr = np.array([[1.0, -0.5, 0.6], [-0.5, 1.0, 0.0], [0.6, 0.0, 1.0]])
    assert gain(0, (1,), corr) == 0.25
    corr2 = np.eye(3)
    corr2[0, 1] = corr2[1, 0] = 0.6
    corr2[0, 2] = corr2[2, 0] = 0.8
    assert gain(0, (1, 2), corr2) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        gain(0, (0, 1), corr2)


def test_config_validation():
    with pytest.raises(ConfigError):
        BuildConfig(1)
    with pytest.raises(ConfigError):
        BuildConfig(3, multiplicity=2)
    with pytest.raises(ConfigError):
        build_mfcf(np.eye(3), 4)


def test_single_clique_when_R_equals_p():
    f = build_mfcf(random_corr(np.random.default_rng(0), 6), 6)
    assert f.cliques == (tuple(range(6)),)
    assert f.n_edges == 15


def test_hand_traced_four_vertices():
    corr = np.array(
        [
            [1.0, 0.9, 0.7, 0.1],
            [0.9, 1.0, 0.8, 0.1],
            [0.7, 0.8, 1.0, 0.1],
            [0.1, 0.1, 0.1, 1.0],
        ]
    )
    f = build_mfcf(corr, 3)
    # seed (0,1) -> add 2; vertex 3 ties on every 2-subset, lexicographic picks {0,1}
    assert f.cliques == ((0, 1, 2), (0, 1, 3))
    assert [(s.vertices, s.parent, s.child) for s in f.separators] == [((0, 1), 0, 1)]
    cliques, seps = oracles.greedy_mfcf(corr, 3)
    assert list(f.cliques) == cliques


def test_R2_gives_segments():
    rng = np.random.default_rng(1)
    for _ in range(20):
        p = int(rng.integers(3, 30))
        f = build_mfcf(random_corr(rng, p), 2)
        degree = np.zeros(p, dtype=int)
        for i, j in edge_set(f):
            degree[i] += 1
            degree[j] += 1
        # each vertex separates at most once: a union of simple paths
        assert degree.max() <= 2
        assert f.n_edges == p - 1


@pytest.mark.parametrize("seed", range(40))
def test_matches_exhaustive_greedy_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    p = int(rng.integers(3, 10))
    R = int(rng.integers(2, p + 1))
    corr = random_corr(rng, p)
    f = build_mfcf(corr, R)
    cliques, seps = oracles.greedy_mfcf(corr, R)
    assert list(f.cliques) == cliques
    assert [(s.vertices, s.parent, s.child) for s in f.separators] == seps


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 25), st.integers(0, 2**32 - 1), st.data())
def test_structure_properties(p, seed, data):
    R = data.draw(st.integers(2, p))
    corr = random_corr(np.random.default_rng(seed), p)
    f = build_mfcf(corr, R)
    assert validate(f) == []
    assert all(len(c) == R for c in f.cliques)
    assert all(len(s.vertices) == R - 1 for s in f.separators)
    assert f.n_edges == expected_edges(p, R)
    seps = [s.vertices for s in f.separators]
    assert len(seps) == len(set(seps))


def test_edge_counts_increase_with_R():
    corr = random_corr(np.random.default_rng(2), 20)
    counts = [build_mfcf(corr, R).n_edges for R in range(2, 21)]
    assert all(a < b for a, b in zip(counts, counts[1:]))


def test_deterministic_serialisation():
    corr = random_corr(np.random.default_rng(3), 25)
    assert serialize(build_mfcf(corr, 5)) == serialize(build_mfcf(corr.copy(), 5))


def test_edge_count_p100():
    corr = random_corr(np.random.default_rng(4), 100, 300)
    start = time.perf_counter()
    counts = {R: build_mfcf(corr, R).n_edges for R in (2, 20, 100)}
    assert counts == {2: 99, 20: 1710, 100: 4950}
    assert time.perf_counter() - start < 5.0


def test_rejects_covariance_kind():
    from ifnlogo.dependence import pearson_covariance

    cov = pearson_covariance(np.random.default_rng(5).standard_normal((20, 4)))
    with pytest.raises(ValueError):
        build_mfcf(cov, 2)
