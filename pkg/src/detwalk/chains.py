"""Benchmark chains built by explicit state-space enumeration.

States are indexed in lexicographic order of their 0/1 indicator vectors
(knapsack items, matching edges) or of the permutation tuple (linear
extensions), so vertex ids are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from detwalk.chain import ChainError, TransitionMatrix

STATE_CAP = 200_000


class EnumerationCapError(ChainError):
    pass


# --- 0-1 knapsack solutions -----------------------------------------------------

@dataclass
class KnapsackInstance:
    a: tuple
    b: int
    states: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.a)


def _count_knapsack(a, b, cap):
    """Number of feasible 0-1 vectors, by DP over capacity (stops past cap)."""
    if b > 10**7:
        return None
    ways = np.zeros(b + 1, dtype=object)
    ways[0] = 1
    for w in a:
        if w <= b:
            ways[w:] = ways[w:] + ways[:b + 1 - w]
    return int(ways.sum())


def enumerate_knapsack(a: Sequence[int], b: int, cap: int = STATE_CAP) -> list[tuple]:
    a = tuple(int(x) for x in a)
    out: list[tuple] = []

    def rec(prefix, room):
        if len(out) > cap:
            return
        i = len(prefix)
        if i == len(a):
            out.append(tuple(prefix))
            return
        prefix.append(0)
        rec(prefix, room)
        prefix[-1] = 1
        if a[i] <= room:
            rec(prefix, room - a[i])
        prefix.pop()

    rec([], b)
    if len(out) > cap:
        total = _count_knapsack(a, b, cap)
        size = f"{total}" if total is not None else f"more than {cap}"
        raise EnumerationCapError(f"knapsack space has {size} states; cap is {cap}")
    return out


def knapsack_chain(a: Sequence[int], b: int) -> tuple[TransitionMatrix, KnapsackInstance]:
    a = tuple(int(x) for x in a)
    if not a or any(x <= 0 for x in a) or b <= 0:
        raise ChainError("knapsack needs positive weights and a positive capacity")
    if len(a) > 20:
        raise EnumerationCapError(f"n={len(a)} items exceeds the cap of 20")
    states = enumerate_knapsack(a, b)
    index = {x: k for k, x in enumerate(states)}
    n = len(a)
    P = np.zeros((len(states), len(states)))
    for k, x in enumerate(states):
        for i in range(n):
            y = x[:i] + (1 - x[i],) + x[i + 1:]
            j = index.get(y)
            if j is not None:
                P[k, j] = 1.0 / (2 * n)
        P[k, k] = 1.0 - P[k].sum()
    return TransitionMatrix(P), KnapsackInstance(a, int(b), states)


# --- linear extensions of a poset -------------------------------------------------

@dataclass
class PosetInstance:
    """Partial order on {1, ..., n}; ``relations`` holds pairs (i, j) meaning i precedes j."""

    n: int
    relations: tuple = ()
    states: list = field(default_factory=list)

    def closure(self) -> np.ndarray:
        """below[i, j] is True when i strictly precedes j (1-based, index 0 unused)."""
        below = np.zeros((self.n + 1, self.n + 1), dtype=bool)
        for i, j in self.relations:
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise ChainError(f"relation {i}<{j} outside 1..{self.n}")
            below[i, j] = True
        for k in range(1, self.n + 1):
            below |= below[:, [k]] & below[[k], :]
        if np.any(np.diagonal(below)):
            raise ChainError("relations contain a cycle")
        return below

    def respects(self, perm: Sequence[int]) -> bool:
        pos = {x: k for k, x in enumerate(perm)}
        return all(pos[i] < pos[j] for i, j in self.relations)


def enumerate_linear_extensions(poset: PosetInstance) -> list[tuple]:
    below = poset.closure()
    n = poset.n
    out: list[tuple] = []
    indeg = [0] * (n + 1)
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if below[i, j]:
                indeg[j] += 1

    def rec(prefix, used):
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        # minimal remaining elements in ascending order gives lexicographic output
        for x in range(1, n + 1):
            if used[x] or indeg[x]:
                continue
            used[x] = True
            for y in range(1, n + 1):
                if below[x, y]:
                    indeg[y] -= 1
            prefix.append(x)
            rec(prefix, used)
            prefix.pop()
            for y in range(1, n + 1):
                if below[x, y]:
                    indeg[y] += 1
            used[x] = False

    rec([], [False] * (n + 1))
    return out


def linear_extension_chain(poset: PosetInstance) -> tuple[TransitionMatrix, PosetInstance]:
    n = poset.n
    if n < 1:
        raise ChainError("poset needs at least one element")
    if n > 8:
        raise EnumerationCapError(f"n={n} exceeds the cap of 8 (8! = 40320 extensions)")
    states = enumerate_linear_extensions(poset)
    index = {x: k for k, x in enumerate(states)}
    P = np.zeros((len(states), len(states)))
    norm = (n**3 - n) / 6.0
    for k, x in enumerate(states):
        for p in range(1, n):
            y = x[:p - 1] + (x[p], x[p - 1]) + x[p + 1:]
            j = index.get(y)
            if j is not None:
                P[k, j] = p * (n - p) / norm / 2.0
        P[k, k] = 1.0 - P[k].sum()
    inst = PosetInstance(n, tuple(poset.relations), states)
    return TransitionMatrix(P), inst


# --- matchings of a graph ---------------------------------------------------------

@dataclass
class MatchingInstance:
    edges: tuple
    n_vertices: int
    states: list = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.edges)


def enumerate_matchings(edges: Sequence[tuple[int, int]], cap: int = STATE_CAP) -> list[tuple]:
    """All matchings as 0/1 indicator tuples over ``edges``, lexicographic."""
    edges = list(edges)
    out: list[tuple] = []

    def rec(prefix, matched):
        if len(out) > cap:
            return
        i = len(prefix)
        if i == len(edges):
            out.append(tuple(prefix))
            return
        u, v = edges[i]
        prefix.append(0)
        rec(prefix, matched)
        if u not in matched and v not in matched:
            prefix[-1] = 1
            rec(prefix, matched | {u, v})
        prefix.pop()

    rec([], frozenset())
    if len(out) > cap:
        raise EnumerationCapError(f"more than {cap} matchings")
    return out


def matching_chain(edges: Sequence[tuple[int, int]], n_vertices: int | None = None
                   ) -> tuple[TransitionMatrix, MatchingInstance]:
    edges = tuple((int(u), int(v)) for u, v in edges)
    if any(u == v for u, v in edges):
        raise ChainError("self-loop edges are not allowed")
    if len(set(frozenset(e) for e in edges)) != len(edges):
        raise ChainError("duplicate edges")
    if len(edges) > 16:
        raise EnumerationCapError(f"m={len(edges)} edges exceeds the cap of 16")
    if n_vertices is None:
        n_vertices = 1 + max((max(e) for e in edges), default=-1)
    m = len(edges)
    states = enumerate_matchings(edges)
    index = {x: k for k, x in enumerate(states)}
    P = np.zeros((len(states), len(states)))
    for k, x in enumerate(states):
        # endpoint -> index of the matching edge covering it
        cover = {}
        for i, bit in enumerate(x):
            if bit:
                cover[edges[i][0]] = i
                cover[edges[i][1]] = i
        for i, (u, v) in enumerate(edges):
            y = list(x)
            if x[i]:
                y[i] = 0
            elif u not in cover and v not in cover:
                y[i] = 1
            elif (u in cover) != (v in cover):
                y[i] = 1
                y[cover[u] if u in cover else cover[v]] = 0
            else:
                continue
            P[k, index[tuple(y)]] += 1.0 / (2 * m)
        P[k, k] = 1.0 - P[k].sum()
    return TransitionMatrix(P), MatchingInstance(edges, int(n_vertices), states)


def path_edges(m: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(m)]


def cycle_edges(m: int) -> list[tuple[int, int]]:
    if m < 3:
        raise ValueError("a cycle needs at least 3 edges")
    return [(i, (i + 1) % m) for i in range(m)]


# --- synthetic reversible chains ------------------------------------------------

def random_reversible_chain(n: int, degree: int, seed: int, *, irrational: bool = False
                            ) -> TransitionMatrix:
    """Symmetric chain on a random connected graph, hence uniform stationary law.

    A random spanning tree is padded with random extra edges until the mean
    degree reaches ``degree``. Edge weights are 1 (or 1 and sqrt(2) when
    ``irrational``), divided by twice the maximum weighted degree so every
    self-loop keeps at least half the mass.
    """
    if n < 2 or not 1 <= degree < n:
        raise ValueError("need n >= 2 and 1 <= degree < n")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    edges = set()
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(k)])
        edges.add((min(a, b), max(a, b)))
    target = min(n * degree // 2, n * (n - 1) // 2)
    while len(edges) < target:
        a, b = (int(x) for x in rng.choice(n, size=2, replace=False))
        edges.add((min(a, b), max(a, b)))
    W = np.zeros((n, n))
    for a, b in sorted(edges):
        w = math.sqrt(2.0) if irrational and rng.random() < 0.5 else 1.0
        W[a, b] = W[b, a] = w
    scale = 2.0 * W.sum(axis=1).max()
    if irrational:
        scale *= math.sqrt(2.0)
    P = W / scale
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    return TransitionMatrix(P)


def parse_generator(spec: str):
    """Build a chain from ``kind:key=val;key=val`` (CLI ``--gen``).

    Returns ``(P, labels)`` where labels describe the states.
    """
    kind, _, rest = spec.partition(":")
    params = {}
    for part in filter(None, (p.strip() for p in rest.split(";"))):
        key, _, val = part.partition("=")
        params[key.strip()] = val.strip()
    kind = kind.strip()
    if kind == "knapsack":
        P, inst = knapsack_chain(_ints(params["a"]), int(params["b"]))
        return P, ["".join(map(str, x)) for x in inst.states]
    if kind == "linext":
        poset = PosetInstance(int(params["n"]), parse_relations(params.get("rel", "")))
        P, inst = linear_extension_chain(poset)
        return P, [" ".join(map(str, x)) for x in inst.states]
    if kind == "matching":
        if "path" in params:
            edges = path_edges(int(params["path"]))
        elif "cycle" in params:
            edges = cycle_edges(int(params["cycle"]))
        else:
            edges = parse_edges(params.get("edges", ""))
        P, inst = matching_chain(edges)
        return P, [describe_matching(inst.edges, x) for x in inst.states]
    if kind == "random":
        P = random_reversible_chain(int(params["n"]), int(params.get("degree", 2)),
                                    int(params.get("seed", 0)),
                                    irrational=params.get("irrational", "0") in ("1", "true", "yes"))
        return P, [str(v) for v in range(P.n)]
    raise ValueError(f"unknown generator {kind!r}")


def describe_matching(edges, x) -> str:
    return ",".join(f"{u}-{v}" for (u, v), bit in zip(edges, x) if bit) or "{}"


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.replace(" ", "").split(",") if t]


def parse_relations(text: str) -> tuple:
    out = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        i, _, j = part.partition("<")
        out.append((int(i), int(j)))
    return tuple(out)


def parse_edges(text: str) -> list[tuple[int, int]]:
    out = []
    for part in filter(None, (p.strip() for p in text.split(","))):
        u, _, v = part.partition("-")
        out.append((int(u), int(v)))
    return out
