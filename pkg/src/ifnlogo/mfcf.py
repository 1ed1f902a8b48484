"""Maximally filtered clique forest (MFCF) by greedy clique expansion.

The gain of attaching an outside vertex ``v`` to a separator ``S`` is the sum of
squared correlations between ``v`` and the members of ``S``. Because the gain
is additive, every clique grows to the maximum size ``R`` and every separator
has ``R - 1`` vertices. Separators are used once (multiplicity one).

Ties are broken by larger gain, then the smallest vertex, then the smallest
clique id, then the lexicographically smallest separator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .dependence import DependenceMatrix
from .errors import ConfigError
from .forest import CliqueForest, Separator, validate

__all__ = ["BuildConfig", "gain", "build_mfcf"]


@dataclass(frozen=True)
class BuildConfig:
    max_clique_size: int
    min_clique_size: int = 2
    gain: str = "sum_squared_correlation"
    multiplicity: int = 1
    tie_break: str = "lexicographic"

    def __post_init__(self) -> None:
        if self.max_clique_size < 2:
            raise ConfigError(f"max_clique_size must be >= 2, got {self.max_clique_size}")
        if self.min_clique_size != 2:
            raise ConfigError("only min_clique_size = 2 is supported")
        if self.gain != "sum_squared_correlation":
            raise ConfigError(f"unsupported gain {self.gain!r}")
        if self.multiplicity != 1:
            raise ConfigError("only separator multiplicity 1 is supported")
        if self.tie_break != "lexicographic":
            raise ConfigError(f"unsupported tie_break {self.tie_break!r}")


def gain(v: int, sep, corr: DependenceMatrix | NDArray) -> float:
    m = corr.matrix if isinstance(corr, DependenceMatrix) else np.asarray(corr)
    if v in set(sep):
        raise ValueError(f"vertex {v} is inside the separator")
    return float(sum(m[v, u] ** 2 for u in sep))


def _correlation_array(corr: DependenceMatrix | NDArray) -> NDArray[np.float64]:
    if isinstance(corr, DependenceMatrix):
        if not corr.is_correlation:
            raise ValueError(f"MFCF needs a correlation matrix, got {corr.kind!r}")
        return corr.matrix
    # validates symmetry, unit diagonal and range
    return DependenceMatrix("pearson_correlation", np.asarray(corr, dtype=np.float64)).matrix


class _GainTable:
    """Best attachment gain for every (clique, outside vertex).

    ``value[c, v]`` is the gain of the best unused (R-1)-subset of clique ``c``
    for vertex ``v``; ``drop[c, v]`` is the position in ``c`` of the member left
    out. Inside vertices and empty slots hold ``-inf``.
    """

    def __init__(self, weights: NDArray[np.float64], n_slots: int):
        self.w = weights
        p = weights.shape[0]
        self.value = np.full((n_slots, p), -np.inf)
        self.drop = np.zeros((n_slots, p), dtype=np.int64)
        self.outside = np.ones(p, dtype=bool)

    def refresh(self, k: int, clique: tuple[int, ...], used: set[frozenset[int]]) -> None:
        members = np.asarray(clique)
        block = self.w[:, members]
        available = np.array(
            [frozenset(clique[:i] + clique[i + 1 :]) not in used for i in range(len(clique))]
        )
        if not available.any():
            self.value[k] = -np.inf
            return
        # smallest dropped weight wins; among equal drops prefer the later member,
        # which leaves the lexicographically smaller separator
        masked = np.where(available, block, np.inf)[:, ::-1]
        pos = len(clique) - 1 - np.argmin(masked, axis=1)
        dropped = block[np.arange(block.shape[0]), pos]
        self.value[k] = np.where(self.outside, block.sum(axis=1) - dropped, -np.inf)
        self.drop[k] = pos

    def absorb(self, v: int) -> None:
        self.outside[v] = False
        self.value[:, v] = -np.inf

    def best(self) -> tuple[int, int]:
        # argmax on the (vertex, clique) layout picks the smallest vertex, then clique
        flat = int(np.argmax(self.value.T))
        v, k = divmod(flat, self.value.shape[0])
        return k, v


def build_mfcf(corr: DependenceMatrix | NDArray, cfg: BuildConfig | int) -> CliqueForest:
    if isinstance(cfg, int):
        cfg = BuildConfig(cfg)
    c = _correlation_array(corr)
    p = c.shape[0]
    R = cfg.max_clique_size
    if p < 2:
        raise ValueError("need at least two variables")
    if R > p:
        raise ConfigError(f"max_clique_size {R} exceeds the number of variables {p}")
    if p == R:
        return CliqueForest(p, (tuple(range(p)),), (), R)

    w = c * c
    np.fill_diagonal(w, 0.0)

    upper = np.where(np.triu(np.ones((p, p), dtype=bool), 1), w, -np.inf)
    a, b = divmod(int(np.argmax(upper)), p)
    seed = [a, b]
    inside = np.zeros(p, dtype=bool)
    inside[seed] = True
    while len(seed) < R:
        g = np.where(inside, -np.inf, w[:, seed].sum(axis=1))
        v = int(np.argmax(g))
        seed.append(v)
        inside[v] = True

    cliques: list[tuple[int, ...]] = [tuple(sorted(seed))]
    separators: list[Separator] = []
    used: set[frozenset[int]] = set()
    table = _GainTable(w, p - R + 1)
    for v in seed:
        table.absorb(v)
    table.refresh(0, cliques[0], used)

    for _ in range(p - R):
        k, v = table.best()
        parent = cliques[k]
        drop = int(table.drop[k, v])
        sep = parent[:drop] + parent[drop + 1 :]
        used.add(frozenset(sep))
        child = tuple(sorted(sep + (v,)))
        cliques.append(child)
        separators.append(Separator(sep, k, len(cliques) - 1))
        table.absorb(v)
        sep_set = set(sep)
        for m, members in enumerate(cliques):
            if sep_set <= set(members):
                table.refresh(m, members, used)

    forest = CliqueForest(p, tuple(cliques), tuple(separators), R)
    problems = validate(forest)
    if problems:
        raise RuntimeError(f"MFCF produced an invalid forest: {problems}")
    return forest
