"""Finite Markov chains: transition matrices, stationary distributions,
total variation distance and exact mixing profiles."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import pdist

ROW_SUM_TOL = 1e-9
STATIONARY_TOL = 1e-13
STATIONARY_CAP = 10**6


class ChainError(ValueError):
    """Malformed or unsuitable transition matrix."""


class ConvergenceError(RuntimeError):
    pass


class TransitionMatrix:
    """Row-stochastic matrix stored both densely and as per-row neighbor lists.

    Neighbors of each row are kept in ascending vertex order; only strictly
    positive entries are neighbors, so the stored sparsity is exactly the
    transition diagram.
    """

    def __init__(self, dense, *, check: bool = True):
        P = np.array(dense, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
            raise ChainError(f"expected a non-empty square matrix, got shape {P.shape}")
        if np.any(P < 0) or not np.all(np.isfinite(P)):
            bad = np.argwhere(~(P >= 0))[0]
            raise ChainError(f"negative or non-finite entry at {tuple(int(x) for x in bad)}")
        self.dense = P
        self.dense.setflags(write=False)
        self.n = P.shape[0]
        sp = csr_matrix(P)
        sp.sort_indices()
        self.indptr = sp.indptr.astype(np.int64)
        self.indices = sp.indices.astype(np.int64)
        self.data = sp.data.astype(np.float64)
        if check:
            bad = self.bad_rows()
            if bad:
                v, s = bad[0]
                raise ChainError(f"row {v} sums to {s!r}, not 1 (tolerance {ROW_SUM_TOL})")

    @classmethod
    def from_rows(cls, rows: Sequence[Iterable[tuple[int, float]]], *, check: bool = True):
        n = len(rows)
        P = np.zeros((n, n))
        for v, row in enumerate(rows):
            for u, p in row:
                if not 0 <= int(u) < n:
                    raise ChainError(f"row {v}: neighbor {u} out of range")
                P[v, int(u)] += float(p)
        return cls(P, check=check)

    def __getitem__(self, key):
        return self.dense[key]

    def __eq__(self, other):
        return isinstance(other, TransitionMatrix) and np.array_equal(self.dense, other.dense)

    def __repr__(self):
        return f"TransitionMatrix(n={self.n}, arcs={self.num_arcs})"

    @property
    def num_arcs(self) -> int:
        return int(self.indptr[-1])

    @property
    def rows(self) -> list[list[tuple[int, float]]]:
        return [list(zip(self.neighbors(v).tolist(), self.row(v).tolist())) for v in range(self.n)]

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def row(self, v: int) -> np.ndarray:
        """Positive probabilities of row ``v``, aligned with :meth:`neighbors`."""
        return self.data[self.indptr[v]:self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max())

    def bad_rows(self) -> list[tuple[int, float]]:
        sums = self.dense.sum(axis=1)
        return [(int(v), float(sums[v])) for v in np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)]

    # JSON chain format: {"n": N, "rows": [[[v, p], ...], ...]}
    def to_json(self) -> dict:
        return {"n": self.n, "rows": [[[u, p] for u, p in r] for r in self.rows]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "TransitionMatrix":
        n = int(obj["n"])
        rows = obj["rows"]
        if len(rows) != n:
            raise ChainError(f"'n' is {n} but {len(rows)} rows were given")
        return cls.from_rows([[(int(u), float(p)) for u, p in r] for r in rows])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "TransitionMatrix":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ValidationReport:
    stochastic: bool
    irreducible: bool
    aperiodic: bool
    reversible: bool
    bad_rows: list = field(default_factory=list)
    period: int | None = None

    @property
    def ergodic(self) -> bool:
        return self.irreducible and self.aperiodic

    def failures(self) -> list[str]:
        out = [f"row {v} sums to {s!r}" for v, s in self.bad_rows]
        for name in ("irreducible", "aperiodic", "reversible"):
            if not getattr(self, name):
                out.append(f"not {name}")
        return out


def _period(P: TransitionMatrix, members: np.ndarray, labels: np.ndarray) -> int:
    """gcd of cycle lengths inside one strongly connected component."""
    comp = labels[members[0]]
    level = {int(members[0]): 0}
    queue = deque([int(members[0])])
    g = 0
    while queue:
        u = queue.popleft()
        for v in P.neighbors(u).tolist():
            if labels[v] != comp:
                continue
            if v in level:
                g = math.gcd(g, level[u] + 1 - level[v])
            else:
                level[v] = level[u] + 1
                queue.append(v)
    return g


def validate_chain(P: TransitionMatrix) -> ValidationReport:
    bad = P.bad_rows()
    graph = csr_matrix((np.ones_like(P.data), P.indices, P.indptr), shape=(P.n, P.n))
    ncomp, labels = connected_components(graph, directed=True, connection="strong")
    irreducible = ncomp == 1
    periods = [_period(P, np.flatnonzero(labels == c), labels) for c in range(ncomp)]
    # a singleton component without a self-loop has no cycles at all (g == 0)
    aperiodic = all(p == 1 for p in periods)
    reversible = False
    if irreducible and not bad:
        pi = stationary_distribution(P)
        flow = pi[:, None] * P.dense
        reversible = bool(np.max(np.abs(flow - flow.T)) <= ROW_SUM_TOL)
    return ValidationReport(
        stochastic=not bad,
        irreducible=irreducible,
        aperiodic=aperiodic,
        reversible=reversible,
        bad_rows=bad,
        period=periods[0] if irreducible else None,
    )


def stationary_distribution(P: TransitionMatrix, *, tol: float = STATIONARY_TOL,
                            max_iter: int = STATIONARY_CAP) -> np.ndarray:
    """Stationary distribution by power iteration.

    Iterates the lazy chain (I + P)/2, which has the same fixed point and
    converges for every irreducible P, periodic or not.
    """
    A = P.dense
    pi = np.full(P.n, 1.0 / P.n)
    for _ in range(max_iter):
        step = pi @ A
        if np.max(np.abs(step - pi)) <= tol:
            pi = step / step.sum()
            return pi
        pi = 0.5 * (pi + step)
    raise ConvergenceError(f"power iteration did not converge within the cap of {max_iter} iterations")


def _as_pair(xi, zeta) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(xi, dtype=np.float64)
    b = np.asarray(zeta, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return a, b


def total_variation(xi, zeta) -> float:
    a, b = _as_pair(xi, zeta)
    return 0.5 * float(np.abs(a - b).sum())


def point_wise_distance(xi, zeta) -> float:
    a, b = _as_pair(xi, zeta)
    return float(np.abs(a - b).max()) if a.size else 0.0


def evolve(xi, P: TransitionMatrix, t: int) -> np.ndarray:
    """Return ``xi P^t`` by ``t`` repeated vector-matrix products.

    ``xi`` need not be normalized; token-count vectors are propagated as is.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    x = np.array(xi, dtype=np.float64)
    if x.shape != (P.n,):
        raise ValueError(f"length mismatch: {x.shape} vs ({P.n},)")
    for _ in range(t):
        x = x @ P.dense
    return x


@dataclass
class ChainProfile:
    pi: np.ndarray
    pi_min: float
    pi_max: float
    delta_max: int
    tau: dict            # eps -> first t with h(t) <= eps, or None if not reached
    t_star: int | None
    h_profile: np.ndarray
    h_bar_profile: np.ndarray | None
    dtv_rows: np.ndarray  # dtv_rows[t, v] = d_tv(P^t_{v,.}, pi)

    @property
    def t_max(self) -> int:
        return len(self.h_profile) - 1

    def tau_of(self, eps: float) -> int:
        val = self.tau.get(float(eps))
        if val is None:
            raise KeyError(f"tau({eps}) not computed or not reached by t_max={self.t_max}")
        return val

    def to_json(self) -> dict:
        return {
            "pi": self.pi.tolist(),
            "tau": {repr(float(e)): v for e, v in sorted(self.tau.items())},
            "t_star": self.t_star,
            "not_reached": [repr(float(e)) for e, v in sorted(self.tau.items()) if v is None],
            "h": self.h_profile.tolist(),
            "h_bar": None if self.h_bar_profile is None else self.h_bar_profile.tolist(),
        }


def mixing_profile(P: TransitionMatrix, t_max: int | None = None, eps: Iterable[float] = (0.25,),
                   *, with_h_bar: bool = True, pi: np.ndarray | None = None,
                   t_cap: int = 100_000) -> ChainProfile:
    """Exact h(t), h_bar(t) and tau(eps) by evolving all N row distributions.

    With ``t_max=None`` the rows are evolved until every requested eps has been
    reached (at most ``t_cap`` steps).
    """
    if t_max is not None and t_max < 1:
        raise ValueError("t_max must be >= 1")
    eps = sorted({float(e) for e in eps} | {0.25})
    if pi is None:
        pi = stationary_distribution(P)
    A = P.dense
    D = np.eye(P.n)
    h, hb, rows = [], [], []
    limit = t_cap if t_max is None else t_max
    t = 0
    while True:
        d = 0.5 * np.abs(D - pi).sum(axis=1)
        rows.append(d)
        h.append(float(d.max()))
        if with_h_bar:
            hb.append(0.5 * float(pdist(D, "cityblock").max()) if P.n > 1 else 0.0)
        if t >= limit or (t_max is None and h[-1] <= eps[0]):
            break
        D = D @ A
        t += 1
    h_arr = np.array(h)
    dtv_rows = np.array(rows)
    tau = {}
    for e in eps:
        # max over start states of the first time that row is within e
        below = dtv_rows <= e
        reached = below.any(axis=0)
        tau[e] = int(below.argmax(axis=0).max()) if reached.all() else None
    return ChainProfile(
        pi=pi,
        pi_min=float(pi.min()),
        pi_max=float(pi.max()),
        delta_max=P.max_degree,
        tau=tau,
        t_star=tau[0.25],
        h_profile=h_arr,
        h_bar_profile=np.array(hb) if with_h_bar else None,
        dtv_rows=dtv_rows,
    )


def mixing_rate(P: TransitionMatrix, pi: np.ndarray | None = None) -> int:
    """t* = tau(1/4), computed exactly."""
    return mixing_profile(P, None, (0.25,), with_h_bar=False, pi=pi).t_star
