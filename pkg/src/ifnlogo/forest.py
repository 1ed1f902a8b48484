"""Chordal clique forests: cliques joined by separators.

A forest is a set of cliques (sorted vertex tuples) and a list of separators,
each linking a parent clique to a child clique through their intersection.
Vertices are dense 0-based integers.
"""

from __future__ import annotations

import itertools
import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Iterable

from .errors import ForestFormatError

__all__ = [
    "Separator",
    "CliqueForest",
    "edge_set",
    "validate",
    "is_chordal",
    "full_forest",
    "to_document",
    "from_document",
    "serialize",
    "deserialize",
]


@dataclass(frozen=True)
class Separator:
    vertices: tuple[int, ...]
    parent: int
    child: int
    multiplicity: int = 1


@dataclass(frozen=True)
class CliqueForest:
    p: int
    cliques: tuple[tuple[int, ...], ...]
    separators: tuple[Separator, ...]
    max_clique_size: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "cliques", tuple(tuple(sorted(c)) for c in self.cliques))
        object.__setattr__(
            self,
            "separators",
            tuple(
                Separator(tuple(sorted(s.vertices)), s.parent, s.child, s.multiplicity)
                for s in self.separators
            ),
        )

    @property
    def n_edges(self) -> int:
        return len(edge_set(self))

    def blocks(self) -> Iterable[tuple[int, tuple[int, ...]]]:
        """Yield ``(sign, vertices)``: +1 for each clique, -1 for each separator."""
        for c in self.cliques:
            yield 1, c
        for s in self.separators:
            yield -1, s.vertices


def full_forest(p: int) -> CliqueForest:
    """A single clique over all ``p`` vertices (the dense model)."""
    return CliqueForest(p, (tuple(range(p)),), (), p)


def edge_set(forest: CliqueForest) -> frozenset[tuple[int, int]]:
    return frozenset(
        pair for c in forest.cliques for pair in itertools.combinations(c, 2)
    )


def _adjacency(p: int, edges: Iterable[tuple[int, int]]) -> list[set[int]]:
    adj: list[set[int]] = [set() for _ in range(p)]
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    return adj


def is_chordal(p: int, edges: Iterable[tuple[int, int]]) -> bool:
    """Maximum cardinality search, then verify the reversed visit order is a
    perfect elimination ordering."""
    adj = _adjacency(p, edges)
    weight = [0] * p
    visited = [False] * p
    visit: list[int] = []
    for _ in range(p):
        v = max((u for u in range(p) if not visited[u]), key=lambda u: (weight[u], -u))
        visited[v] = True
        visit.append(v)
        for u in adj[v]:
            if not visited[u]:
                weight[u] += 1
    peo = visit[::-1]
    position = {v: k for k, v in enumerate(peo)}
    for v in peo:
        later = [u for u in adj[v] if position[u] > position[v]]
        if not later:
            continue
        first = min(later, key=position.__getitem__)
        if any(u != first and u not in adj[first] for u in later):
            return False
    return True


def validate(forest: CliqueForest) -> list[str]:
    """List every violated structural invariant; an empty list means valid."""
    problems: list[str] = []
    p = forest.p
    n_cliques = len(forest.cliques)
    if p < 1:
        return [f"vertex count must be positive, got {p}"]
    if n_cliques == 0:
        return ["forest has no cliques"]

    for k, c in enumerate(forest.cliques):
        if len(c) == 0:
            problems.append(f"clique {k} is empty")
        if len(set(c)) != len(c):
            problems.append(f"clique {k} repeats a vertex")
        if any(v < 0 or v >= p for v in c):
            problems.append(f"clique {k} has a vertex outside 0..{p - 1}")
        if len(c) > forest.max_clique_size:
            problems.append(
                f"clique {k} has size {len(c)} > max_clique_size {forest.max_clique_size}"
            )
    covered = {v for c in forest.cliques for v in c}
    missing = sorted(set(range(p)) - covered)
    if missing:
        problems.append(f"vertices not in any clique: {missing}")
    if problems:
        return problems

    clique_sets = [frozenset(c) for c in forest.cliques]
    links: list[tuple[int, int]] = []
    for k, s in enumerate(forest.separators):
        if not (0 <= s.parent < n_cliques and 0 <= s.child < n_cliques):
            problems.append(f"separator {k} links a nonexistent clique")
            continue
        if s.parent == s.child:
            problems.append(f"separator {k} links clique {s.parent} to itself")
            continue
        links.append((s.parent, s.child))
        a, b = clique_sets[s.parent], clique_sets[s.child]
        if frozenset(s.vertices) != a & b:
            problems.append(
                f"separator {k} {list(s.vertices)} is not the intersection of "
                f"cliques {s.parent} and {s.child}"
            )
        elif not (frozenset(s.vertices) < a and frozenset(s.vertices) < b):
            problems.append(f"separator {k} is not a strict subset of both cliques")

    counts: dict[frozenset[int], int] = defaultdict(int)
    for s in forest.separators:
        counts[frozenset(s.vertices)] += 1
    for s in forest.separators:
        used = counts[frozenset(s.vertices)]
        if used > s.multiplicity:
            problems.append(
                f"separator {list(s.vertices)} used {used} times, multiplicity {s.multiplicity}"
            )
            counts[frozenset(s.vertices)] = 0

    # junction forest must be acyclic
    root = list(range(n_cliques))

    def find(x: int) -> int:
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    neighbours: list[list[int]] = [[] for _ in range(n_cliques)]
    for a, b in links:
        ra, rb = find(a), find(b)
        if ra == rb:
            problems.append(f"separators form a cycle through cliques {a} and {b}")
        else:
            root[ra] = rb
        neighbours[a].append(b)
        neighbours[b].append(a)

    # running intersection: cliques holding each vertex form a connected subtree
    holders: dict[int, set[int]] = defaultdict(set)
    for k, c in enumerate(forest.cliques):
        for v in c:
            holders[v].add(k)
    rip_broken = []
    for v in range(p):
        group = holders[v]
        start = next(iter(group))
        seen = {start}
        stack = [start]
        while stack:
            k = stack.pop()
            for m in neighbours[k]:
                if m in group and m not in seen:
                    seen.add(m)
                    stack.append(m)
        if seen != group:
            rip_broken.append(v)
    if rip_broken:
        problems.append(f"running intersection property fails for vertices {rip_broken}")

    if not is_chordal(p, edge_set(forest)):
        problems.append("implied graph is not chordal (no perfect elimination ordering)")
    return problems


# --- network documents -------------------------------------------------------


def to_document(forest: CliqueForest) -> dict[str, Any]:
    separators = []
    for s in forest.separators:
        record: dict[str, Any] = {"vertices": list(s.vertices), "parent": s.parent, "child": s.child}
        if s.multiplicity != 1:
            record["multiplicity"] = s.multiplicity
        separators.append(record)
    return {
        "p": forest.p,
        "max_clique_size": forest.max_clique_size,
        "cliques": [list(c) for c in forest.cliques],
        "separators": separators,
    }


def _int(value: Any, location: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ForestFormatError(f"expected an integer, got {value!r}", location)
    return value


def _int_list(value: Any, location: str) -> list[int]:
    if not isinstance(value, list):
        raise ForestFormatError(f"expected a list of integers, got {type(value).__name__}", location)
    return [_int(x, f"{location}[{k}]") for k, x in enumerate(value)]


def from_document(doc: Any) -> CliqueForest:
    if not isinstance(doc, dict):
        raise ForestFormatError("network document must be a JSON object", "$")
    for key in ("p", "max_clique_size", "cliques", "separators"):
        if key not in doc:
            raise ForestFormatError(f"missing key {key!r}", "$")
    p = _int(doc["p"], "$.p")
    max_size = _int(doc["max_clique_size"], "$.max_clique_size")
    if not isinstance(doc["cliques"], list):
        raise ForestFormatError("expected a list", "$.cliques")
    cliques = []
    for k, c in enumerate(doc["cliques"]):
        vertices = _int_list(c, f"$.cliques[{k}]")
        if vertices != sorted(vertices):
            raise ForestFormatError("clique vertices must be sorted ascending", f"$.cliques[{k}]")
        cliques.append(tuple(vertices))
    if not isinstance(doc["separators"], list):
        raise ForestFormatError("expected a list", "$.separators")
    separators = []
    for k, s in enumerate(doc["separators"]):
        where = f"$.separators[{k}]"
        if not isinstance(s, dict):
            raise ForestFormatError("separator must be an object", where)
        for key in ("vertices", "parent", "child"):
            if key not in s:
                raise ForestFormatError(f"missing key {key!r}", where)
        separators.append(
            Separator(
                tuple(_int_list(s["vertices"], f"{where}.vertices")),
                _int(s["parent"], f"{where}.parent"),
                _int(s["child"], f"{where}.child"),
                _int(s.get("multiplicity", 1), f"{where}.multiplicity"),
            )
        )
    return CliqueForest(p, tuple(cliques), tuple(separators), max_size)


def serialize(forest: CliqueForest) -> str:
    return json.dumps(to_document(forest)) + "\n"


def deserialize(text: str) -> CliqueForest:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ForestFormatError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
    return from_document(doc)
