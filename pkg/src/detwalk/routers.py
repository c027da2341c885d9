"""Functional routers (SRT, billiard, van der Corput, rotor) and their oracles.

A router on vertex v is a map sigma_v from serve indices 0, 1, 2, ... to the
neighbors of v. Every router here keeps incremental state: the number of
values emitted so far and, per neighbor, how many of them went there.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence

import numpy as np

from detwalk._backend import kernels

ROTOR_MAX_DENOMINATOR = 10**6
ROTOR_MAX_PERIOD = 10**6
INTEGRALITY_TOL = 1e-9


class RouterKind(str, Enum):
    SRT = "srt"
    BILLIARD = "billiard"
    VDC = "vdc"
    ROTOR = "rotor"

    @property
    def code(self) -> int:
        return _CODES[self]


_CODES = {RouterKind.SRT: 0, RouterKind.BILLIARD: 1, RouterKind.VDC: 2, RouterKind.ROTOR: 3}


class RouterError(RuntimeError):
    """Router state is inconsistent (e.g. the SRT candidate set came up empty)."""


class RotorError(ValueError):
    """A row cannot be realized by a finite rotor table."""


def rotor_multiplicities(row: Sequence[float]) -> tuple[int, list[int]]:
    """Common denominator of a rational row and the per-neighbor table counts.

    Each probability is reconstructed as a fraction with denominator at most
    10**6; the period is the LCM of those denominators.
    """
    fracs = [Fraction(float(p)).limit_denominator(ROTOR_MAX_DENOMINATOR) for p in row]
    period = 1
    for f in fracs:
        period = period * f.denominator // math.gcd(period, f.denominator)
        if period > ROTOR_MAX_PERIOD:
            raise RotorError(f"common denominator exceeds {ROTOR_MAX_PERIOD}; row is not (small) rational")
    mult = []
    for p in row:
        x = period * float(p)
        m = round(x)
        if abs(x - m) > INTEGRALITY_TOL:
            raise RotorError(f"{period} * {p!r} = {x!r} is not integral within {INTEGRALITY_TOL}")
        mult.append(int(m))
    if sum(mult) != period:
        raise RotorError(f"table counts {mult} do not sum to the period {period}")
    return period, mult


def rotor_table(mult: Sequence[int]) -> list[int]:
    """Consecutive layout: neighbor position j repeated mult[j] times."""
    return [j for j, m in enumerate(mult) for _ in range(m)]


def van_der_corput(i: int) -> float:
    """Binary radical inverse: the bits of i mirrored about the binary point."""
    if i < 0:
        raise ValueError("index must be nonnegative")
    x, j = 0.0, 0
    while i:
        if i & 1:
            x += 2.0 ** -(j + 1)
        i >>= 1
        j += 1
    return x


def van_der_corput_array(idx) -> np.ndarray:
    """Vectorized radical inverse for nonnegative integer arrays (< 2**63)."""
    r = np.asarray(idx, dtype=np.uint64).copy()
    # swap progressively larger bit groups to reverse all 64 bits
    for shift, mask in ((1, 0x5555555555555555), (2, 0x3333333333333333), (4, 0x0F0F0F0F0F0F0F0F),
                        (8, 0x00FF00FF00FF00FF), (16, 0x0000FFFF0000FFFF), (32, 0x00000000FFFFFFFF)):
        m = np.uint64(mask)
        s = np.uint64(shift)
        r = ((r >> s) & m) | ((r & m) << s)
    return np.ldexp(r.astype(np.float64), -64)


@dataclass
class RouterState:
    """Serving state of the router on one vertex."""

    vertex: int
    kind: RouterKind
    neighbor_order: np.ndarray
    probs: np.ndarray
    counts: np.ndarray = None
    total_served: int = 0
    rotor_table: list | None = None
    period: int = 1
    _cum: np.ndarray = field(default=None, repr=False)
    _mult: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.kind = RouterKind(self.kind)
        self.neighbor_order = np.asarray(self.neighbor_order, dtype=np.int64)
        self.probs = np.ascontiguousarray(self.probs, dtype=np.float64)
        if self.counts is None:
            self.counts = np.zeros(len(self.probs), dtype=np.int64)
        self._cum = np.cumsum(self.probs)
        if self.kind is RouterKind.ROTOR:
            self.period, mult = rotor_multiplicities(self.probs)
            self._mult = np.array(mult, dtype=np.int64)
            self.rotor_table = rotor_table(mult)
        else:
            self._mult = np.zeros(len(self.probs), dtype=np.int64)

    @classmethod
    def for_row(cls, kind, row: Sequence[float], vertex: int = 0, neighbors=None) -> "RouterState":
        row = [float(p) for p in row]
        if neighbors is None:
            neighbors = range(len(row))
        return cls(vertex, kind, np.asarray(list(neighbors)), np.asarray(row))

    @property
    def degree(self) -> int:
        return len(self.probs)

    def emit_positions(self, k: int) -> np.ndarray:
        """Advance by ``k`` serves and return the neighbor positions chosen."""
        out = np.zeros(k, dtype=np.int64)
        done = kernels.emit_sequence(self.kind.code, self.probs, self._cum, self._mult,
                                     self.period, self.counts, self.total_served, out)
        self.total_served += done
        if done != k:
            raise RouterError(f"vertex {self.vertex}: no admissible neighbor at serve {self.total_served}")
        return out

    def next(self) -> int:
        return int(self.neighbor_order[self.emit_positions(1)[0]])

    def count_for(self, u: int) -> int:
        hit = np.flatnonzero(self.neighbor_order == u)
        return int(self.counts[hit[0]]) if hit.size else 0

    def to_json(self) -> dict:
        return {"v": int(self.vertex), "served": int(self.total_served),
                "counts": {str(int(u)): int(c) for u, c in zip(self.neighbor_order, self.counts)}}


def _expect(state: RouterState, kind: RouterKind) -> None:
    if state.kind is not kind:
        raise ValueError(f"router on vertex {state.vertex} is {state.kind.value}, not {kind.value}")


def srt_next(state: RouterState) -> int:
    _expect(state, RouterKind.SRT)
    return state.next()


def billiard_next(state: RouterState) -> int:
    _expect(state, RouterKind.BILLIARD)
    return state.next()


def vdc_next(state: RouterState) -> int:
    _expect(state, RouterKind.VDC)
    return state.next()


def rotor_next(state: RouterState) -> int:
    _expect(state, RouterKind.ROTOR)
    return state.next()


# --- definitional oracles -------------------------------------------------

def reference_sequence(kind, row: Sequence[float], length: int) -> list[int]:
    """sigma_v(0..length-1) computed straight from the router definitions.

    Slow and independent of the kernels; used to check them.
    """
    kind = RouterKind(kind)
    row = [float(p) for p in row]
    d = len(row)
    seq: list[int] = []
    served = [0] * d
    if kind is RouterKind.ROTOR:
        _, mult = rotor_multiplicities(row)
        table = rotor_table(mult)
        return [table[i % len(table)] for i in range(length)]
    for i in range(length):
        if kind is RouterKind.VDC:
            x = van_der_corput(i)
            acc, pick = 0.0, d - 1
            for k in range(d):
                acc += row[k]
                if acc > x:
                    pick = k
                    break
        else:
            if kind is RouterKind.SRT:
                cand = [u for u in range(d) if served[u] - (i + 1) * row[u] < 0]
                if not cand:
                    raise RouterError(f"empty candidate set at serve {i}")
            else:
                cand = list(range(d))
            pick = cand[0]
            for u in cand[1:]:
                # (I_u + 1)/P_u < (I_pick + 1)/P_pick, cross-multiplied
                if (served[u] + 1.0) * row[pick] < (served[pick] + 1.0) * row[u]:
                    pick = u
        served[pick] += 1
        seq.append(pick)
    return seq


def interval_count(kind, row: Sequence[float], z: int, z_prime: int, u: int) -> int:
    """Serves to neighbor position ``u`` among indices z..z_prime-1 (brute force)."""
    if not 0 <= z < z_prime:
        raise ValueError(f"need 0 <= z < z_prime, got z={z}, z_prime={z_prime}")
    seq = reference_sequence(kind, row, z_prime)
    return sum(1 for j in range(z, z_prime) if seq[j] == u)


def vdc_window_count(z0: int, z: int, x: float, y: float) -> int:
    """|{i in [z0, z0+z) : psi(i) in [x, y)}|."""
    if z < 1:
        raise ValueError("window length must be >= 1")
    if not 0 <= x < y <= 1:
        raise ValueError("need 0 <= x < y <= 1")
    psi = van_der_corput_array(np.arange(z0, z0 + z, dtype=np.uint64))
    return int(np.count_nonzero((psi >= x) & (psi < y)))


# --- all routers of a chain, flat --------------------------------------------

def default_threads() -> int:
    env = os.environ.get("DETWALK_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


class RouterBank:
    """The routers of every vertex of a chain in flat arc-indexed arrays."""

    # below this many tokens per step, threading costs more than it saves
    PARALLEL_MIN_TOKENS = 50_000

    def __init__(self, P, kind):
        self.kind = RouterKind(kind)
        self.n = P.n
        self.indptr = np.ascontiguousarray(P.indptr, dtype=np.int64)
        self.targets = np.ascontiguousarray(P.indices, dtype=np.int64)
        self.probs = np.ascontiguousarray(P.data, dtype=np.float64)
        self.cum = np.empty_like(self.probs)
        self.mult = np.zeros(len(self.probs), dtype=np.int64)
        self.period = np.ones(self.n, dtype=np.int64)
        for v in range(self.n):
            s, e = self.indptr[v], self.indptr[v + 1]
            self.cum[s:e] = np.cumsum(self.probs[s:e])
            if self.kind is RouterKind.ROTOR:
                try:
                    per, mult = rotor_multiplicities(self.probs[s:e])
                except RotorError as exc:
                    raise RotorError(f"vertex {v}: {exc}") from None
                self.period[v] = per
                self.mult[s:e] = mult
        self.counts = np.zeros(len(self.probs), dtype=np.int64)
        self.served = np.zeros(self.n, dtype=np.int64)

    @property
    def delta_bar_max(self) -> int | None:
        return int(self.period.max()) if self.kind is RouterKind.ROTOR else None

    def state(self, v: int) -> RouterState:
        """Snapshot of vertex v as a standalone :class:`RouterState`."""
        s, e = self.indptr[v], self.indptr[v + 1]
        st = RouterState(v, self.kind, self.targets[s:e], self.probs[s:e],
                         counts=self.counts[s:e].copy(), total_served=int(self.served[v]))
        return st

    def _chunks(self, chi: np.ndarray, threads: int) -> list[tuple[int, int]]:
        load = np.cumsum(chi * np.diff(self.indptr) + 1)
        cuts = np.searchsorted(load, load[-1] * np.arange(1, threads) / threads)
        bounds = [0, *sorted(set(int(c) for c in cuts if 0 < c < self.n)), self.n]
        return list(zip(bounds[:-1], bounds[1:]))

    def emit(self, chi: np.ndarray, threads: int | None = None) -> np.ndarray:
        """Serve chi[v] tokens at every v; return per-arc flows."""
        chi = np.ascontiguousarray(chi, dtype=np.int64)
        flows = np.zeros(len(self.probs), dtype=np.int64)
        threads = default_threads() if threads is None else threads
        args = (self.kind.code, self.indptr, self.probs, self.cum, self.mult, self.period,
                self.counts, self.served, chi, flows)
        if threads > 1 and self.n > 1 and chi.sum() >= self.PARALLEL_MIN_TOKENS:
            # vertex ranges touch disjoint slices of every array
            with ThreadPoolExecutor(max_workers=threads) as pool:
                bad = list(pool.map(lambda r: kernels.emit_range(*args, r[0], r[1]),
                                    self._chunks(chi, threads)))
        else:
            bad = [kernels.emit_range(*args, 0, self.n)]
        hit = [b for b in bad if b >= 0]
        if hit:
            raise RouterError(f"vertex {min(hit)}: SRT candidate set empty (router state corrupted)")
        return flows
