"""Deterministic token propagation through functional routers, alongside the
exact expected trajectory of the corresponding Markov chain."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from detwalk.chain import TransitionMatrix, evolve, validate_chain
from detwalk.routers import RouterBank, RouterKind

log = logging.getLogger(__name__)

MAX_EMISSIONS = 2**62


class EngineError(RuntimeError):
    pass


@dataclass
class StepFlow:
    """Tokens sent along every arc in one update, aligned with the chain's arcs."""

    sources: np.ndarray
    targets: np.ndarray
    counts: np.ndarray

    def as_dict(self) -> dict:
        return {(int(v), int(u)): int(z)
                for v, u, z in zip(self.sources, self.targets, self.counts) if z}

    def out_totals(self, n: int) -> np.ndarray:
        return np.bincount(self.sources, weights=self.counts, minlength=n).astype(np.int64)


def _arc_sources(P: TransitionMatrix) -> np.ndarray:
    return np.repeat(np.arange(P.n, dtype=np.int64), np.diff(P.indptr))


class ExplicitRouters:
    """Routers given as explicit finite sequences sigma_v(0), sigma_v(1), ...

    Handy for hand-built examples; ``sequences[v]`` lists target vertices.
    """

    def __init__(self, P: TransitionMatrix, sequences: Mapping[int, Sequence[int]]):
        self.n = P.n
        self.indptr = P.indptr
        self.targets = P.indices
        self.sequences = {int(v): [int(u) for u in s] for v, s in sequences.items()}
        self.served = np.zeros(P.n, dtype=np.int64)
        self.counts = np.zeros(P.num_arcs, dtype=np.int64)
        self._arc = {(v, int(u)): int(a) for v in range(P.n)
                     for a, u in zip(range(P.indptr[v], P.indptr[v + 1]), P.neighbors(v))}

    def emit(self, chi, threads=None) -> np.ndarray:
        flows = np.zeros(len(self.targets), dtype=np.int64)
        for v in range(self.n):
            k = int(chi[v])
            if not k:
                continue
            seq = self.sequences.get(v, [])
            i = int(self.served[v])
            if i + k > len(seq):
                raise EngineError(f"explicit router on vertex {v} exhausted at serve {len(seq)}")
            for u in seq[i:i + k]:
                a = self._arc.get((v, u))
                if a is None:
                    raise EngineError(f"explicit router on vertex {v} routes to non-neighbor {u}")
                flows[a] += 1
                self.counts[a] += 1
            self.served[v] = i + k
        return flows


def step(chi, routers, P: TransitionMatrix, served_before=None, threads=None
         ) -> tuple[np.ndarray, StepFlow]:
    """One synchronous update: every vertex serves all of its tokens.

    ``served_before`` (tokens each vertex has served in earlier steps) is
    checked against the routers' own counters when given.
    """
    chi = np.asarray(chi, dtype=np.int64)
    if chi.shape != (P.n,) or np.any(chi < 0):
        raise EngineError("configuration must be a nonnegative integer vector of length N")
    if served_before is not None and not np.array_equal(routers.served, served_before):
        v = int(np.flatnonzero(routers.served != np.asarray(served_before))[0])
        raise EngineError(f"router on vertex {v} has served {int(routers.served[v])} tokens, "
                          f"engine expected {int(served_before[v])}")
    flows = routers.emit(chi, threads)
    new = np.bincount(P.indices, weights=flows, minlength=P.n)
    new = np.rint(new).astype(np.int64)
    return new, StepFlow(_arc_sources(P), P.indices, flows)


@dataclass
class TokenTrace:
    P: TransitionMatrix
    kind: str
    chi: np.ndarray                 # (T+1, N) integers
    mu: np.ndarray                  # (T+1, N) reals, mu[0] == chi[0]
    flows: list | None = None       # per-step per-arc flows when retained
    psi_measured: float = 0.0       # streamed max |Z - chi_v P_vu|
    delta_bar_max: int | None = None

    @property
    def T(self) -> int:
        return len(self.chi) - 1

    @property
    def M(self) -> int:
        return int(self.chi[0].sum())

    def abs_discrepancy(self) -> np.ndarray:
        return np.abs(self.chi - self.mu)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "vertex", "chi", "mu", "abs_discrepancy"])
        disc = self.abs_discrepancy()
        for t in range(self.T + 1):
            for v in range(self.P.n):
                w.writerow([t, v, int(self.chi[t, v]), repr(float(self.mu[t, v])),
                            repr(float(disc[t, v]))])
        return buf.getvalue()


def initial_configuration(spec, n: int, M: int) -> np.ndarray:
    """``"point"``/``"point:v"``, ``"uniform"`` (remainder to lowest indices) or an explicit vector."""
    if not isinstance(spec, str):
        chi = np.asarray(spec, dtype=np.int64)
        if chi.shape != (n,) or np.any(chi < 0):
            raise ValueError("explicit configuration must be N nonnegative integers")
        return chi
    if M < 1:
        raise ValueError("M must be >= 1")
    chi = np.zeros(n, dtype=np.int64)
    name, _, arg = spec.partition(":")
    if name == "point":
        v = int(arg) if arg else 0
        if not 0 <= v < n:
            raise ValueError(f"vertex {v} out of range")
        chi[v] = M
    elif name == "uniform":
        chi[:] = M // n
        chi[:M % n] += 1
    else:
        raise ValueError(f"unknown initial configuration {spec!r}")
    return chi


def _arc_deviation(P: TransitionMatrix, chi: np.ndarray, flows: np.ndarray) -> np.ndarray:
    return np.abs(flows - chi[_arc_sources(P)] * P.data)


def run(chi0, P: TransitionMatrix, kind, T: int, *, store_flows: bool = False,
        threads: int | None = None, check: bool = True) -> TokenTrace:
    """Simulate ``T`` updates of the functional-router model started from ``chi0``."""
    chi = np.asarray(chi0, dtype=np.int64).copy()
    if T < 0:
        raise ValueError("T must be nonnegative")
    M = int(chi.sum())
    if M * max(T, 1) > MAX_EMISSIONS:
        raise EngineError(f"M*T = {M * T} exceeds the emission cap 2**62")
    if check:
        rep = validate_chain(P)
        if not (rep.stochastic and rep.ergodic):
            raise EngineError("chain is not ergodic: " + "; ".join(rep.failures()))
        if not rep.reversible:
            log.warning("chain is not reversible; discrepancy bounds do not apply")
    if isinstance(kind, str) or isinstance(kind, RouterKind):
        routers = RouterBank(P, kind)
        kind_name = RouterKind(kind).value
    else:
        routers = kind
        kind_name = "explicit"
    chis = np.zeros((T + 1, P.n), dtype=np.int64)
    mus = np.zeros((T + 1, P.n))
    chis[0] = chi
    mus[0] = chi
    served = np.zeros(P.n, dtype=np.int64)
    flows_out = [] if store_flows else None
    psi = 0.0
    for t in range(T):
        new, flow = step(chis[t], routers, P, served, threads)
        served += chis[t]
        psi = max(psi, float(_arc_deviation(P, chis[t], flow.counts).max(initial=0.0)))
        if store_flows:
            flows_out.append(flow.counts)
        chis[t + 1] = new
        mus[t + 1] = evolve(mus[t], P, 1)
        if new.sum() != M:
            raise EngineError(f"token count changed at step {t}: {M} -> {int(new.sum())}")
    return TokenTrace(P, kind_name, chis, mus, flows_out, psi,
                      getattr(routers, "delta_bar_max", None))


def measured_psi(trace: TokenTrace, P: TransitionMatrix | None = None) -> float:
    """max over t, v, u of |Z_vu(t) - chi_v(t) P_vu|."""
    P = trace.P if P is None else P
    if trace.flows is None:
        return trace.psi_measured
    best = 0.0
    for t, fl in enumerate(trace.flows):
        best = max(best, float(_arc_deviation(P, trace.chi[t], fl).max(initial=0.0)))
    return best
