"""Slow, obviously-correct reference implementations used only by tests."""

from __future__ import annotations

import itertools
import math

import numpy as np

from ifnlogo.dependence import tau_b_from_counts
from ifnlogo.forest import CliqueForest, Separator


def kendall_pair_counts(x, y) -> tuple[int, int, int, int]:
    """(concordant - discordant, n, pairs tied in x, pairs tied in y) by
    enumerating all q(q-1)/2 pairs."""
    n = len(x)
    s = tx = ty = 0
    for i, j in itertools.combinations(range(n), 2):
        dx = np.sign(x[i] - x[j])
        dy = np.sign(y[i] - y[j])
        s += int(dx * dy)
        tx += dx == 0
        ty += dy == 0
    return s, n, int(tx), int(ty)


def kendall_matrix(values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    p = values.shape[1]
    out = np.eye(p)
    for i, j in itertools.combinations(range(p), 2):
        tau = tau_b_from_counts(*kendall_pair_counts(values[:, i], values[:, j]))
        out[i, j] = out[j, i] = tau
    return out


def greedy_mfcf(corr, R: int) -> tuple[list[tuple[int, ...]], list[tuple[tuple[int, ...], int, int]]]:
    """Literal greedy clique expansion: enumerate every (vertex, clique,
    (R-1)-subset) triple at each step."""
    c = np.asarray(corr, dtype=np.float64)
    p = c.shape[0]
    if R >= p:
        return [tuple(range(p))], []

    def g(v, sep):
        return sum(c[v, u] ** 2 for u in sep)

    best_pair, best = None, -1.0
    for a, b in itertools.combinations(range(p), 2):
        if c[a, b] ** 2 > best:
            best_pair, best = (a, b), c[a, b] ** 2
    seed = list(best_pair)
    while len(seed) < R:
        v = max((v for v in range(p) if v not in seed), key=lambda v: (g(v, seed), -v))
        seed.append(v)

    cliques = [tuple(sorted(seed))]
    seps: list[tuple[tuple[int, ...], int, int]] = []
    used: set[tuple[int, ...]] = set()
    inside = set(seed)
    while len(inside) < p:
        choice, best_key = None, None
        for v in range(p):
            if v in inside:
                continue
            for k, clique in enumerate(cliques):
                for sub in itertools.combinations(clique, R - 1):
                    if sub in used:
                        continue
                    # larger gain, then smaller vertex, clique id, subset
                    key = (g(v, sub), -v, -k, tuple(-u for u in sub))
                    if best_key is None or key > best_key:
                        choice, best_key = (v, k, sub), key
        v, k, sub = choice
        used.add(sub)
        cliques.append(tuple(sorted(sub + (v,))))
        seps.append((sub, k, len(cliques) - 1))
        inside.add(v)
    return cliques, seps


def random_clique_forest(rng: np.random.Generator, p: int, max_size: int = 4) -> CliqueForest:
    """Random valid clique forest built by attaching fresh vertices to a
    random strict subset of an existing clique (or starting a new tree)."""
    order = rng.permutation(p)
    pos = 0

    def take(n):
        nonlocal pos
        out = [int(v) for v in order[pos : pos + n]]
        pos += len(out)
        return out

    cliques = [tuple(sorted(take(int(rng.integers(1, max_size + 1)))))]
    seps: list[Separator] = []
    used: set[tuple[int, ...]] = set()
    while pos < p:
        k = int(rng.integers(len(cliques)))
        parent = cliques[k]
        size = int(rng.integers(0, len(parent)))
        sub = tuple(sorted(int(u) for u in rng.choice(parent, size=size, replace=False)))
        fresh = take(int(rng.integers(1, max_size - size + 1)))
        cliques.append(tuple(sorted(sub + tuple(fresh))))
        if sub and sub not in used:
            used.add(sub)
            seps.append(Separator(sub, k, len(cliques) - 1))
        elif sub:
            # repeated separator set: attach without sharing to keep multiplicity one
            cliques[-1] = tuple(sorted(fresh))
    return CliqueForest(p, tuple(cliques), tuple(seps), max_size)


def random_spd(rng: np.random.Generator, p: int, scale: bool = True) -> np.ndarray:
    a = rng.standard_normal((p, p + 3))
    cov = a @ a.T / (p + 3) + 0.1 * np.eye(p)
    if scale:
        s = rng.uniform(0.5, 2.0, size=p)
        cov = cov * np.outer(s, s)
    return 0.5 * (cov + cov.T)


def dense_gaussian_loglik(x, mu, cov) -> float:
    x = np.atleast_2d(x)
    p = cov.shape[0]
    sign, logdet = np.linalg.slogdet(cov)
    diff = x - mu
    quad = np.einsum("ij,ij->i", diff @ np.linalg.inv(cov), diff)
    return float(-0.5 * (x.shape[0] * (p * math.log(2 * math.pi) + logdet) + quad.sum()))


def dense_student_loglik(x, mu, cov, nu) -> float:
    """Student-t with covariance ``cov`` (shape matrix cov * (nu-2)/nu),
    via scipy's multivariate_t as an independent density."""
    from scipy.stats import multivariate_t

    shape = cov * (nu - 2.0) / nu
    return float(multivariate_t(loc=mu, shape=shape, df=nu).logpdf(np.atleast_2d(x)).sum())
