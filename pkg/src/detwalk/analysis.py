"""Discrepancy between router trajectories and expected trajectories, and the
closed-form upper bounds it is checked against."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from detwalk.chain import ChainProfile, TransitionMatrix
from detwalk.engine import TokenTrace, _arc_sources
from detwalk.routers import RouterKind

SATISFIED_TOL = 1e-6

# bound used as "the" bound of a router kind in summaries
PRIMARY_BOUND = {
    RouterKind.SRT: "thm2_srt",
    RouterKind.BILLIARD: "thm5_billiard_refined",
    RouterKind.VDC: "thm7_vdc",
    RouterKind.ROTOR: "thm9_rotor_refined",
}

_APPLICABLE = {
    RouterKind.SRT: ("thm1_generic", "thm2_srt"),
    RouterKind.BILLIARD: ("thm1_generic", "thm4_billiard", "thm5_billiard_refined"),
    RouterKind.VDC: ("thm1_generic", "thm7_vdc"),
    RouterKind.ROTOR: ("thm1_generic", "thm8_rotor", "thm9_rotor_refined"),
}


@dataclass
class BoundInputs:
    pi_min: float
    pi_max: float
    t_star: int
    tau_gamma: int
    delta_max: int
    gamma: float = 0.25
    delta_bar_max: int | None = None
    M: int | None = None

    def __post_init__(self):
        if not 0 < self.gamma < 0.5:
            raise ValueError(f"gamma must lie in (0, 1/2), got {self.gamma}")

    @classmethod
    def from_profile(cls, profile: ChainProfile, gamma: float = 0.25, delta_bar_max=None, M=None):
        if not 0 < gamma < 0.5:
            raise ValueError(f"gamma must lie in (0, 1/2), got {gamma}")
        return cls(profile.pi_min, profile.pi_max, profile.tau_of(0.25), profile.tau_of(gamma),
                   profile.delta_max, float(gamma), delta_bar_max, M)

    def to_json(self) -> dict:
        return asdict(self)


def _formulas(inp: BoundInputs, ratio, psi):
    """Every bound evaluable from ``inp``; ``ratio`` is pi_w / pi_min (scalar or array)."""
    D, ts = inp.delta_max, inp.t_star
    out = {
        "thm2_srt": 6 * ratio * ts * D,
        "thm4_billiard": 3 * ratio * ts * D * (D - 1),
        "thm5_billiard_refined": 6 * ratio * ts * (D - 1),
    }
    if psi is not None:
        g = inp.gamma
        out["thm1_generic"] = psi * (2 * (1 - g) / (1 - 2 * g)) * inp.tau_gamma * ratio * D
    if inp.M is not None:
        out["thm7_vdc"] = 6 * ratio * math.log2(inp.M + 1) * ts * D
    if inp.delta_bar_max is not None:
        out["thm8_rotor"] = 3 * ratio * ts * D * inp.delta_bar_max
        out["thm9_rotor_refined"] = 3 * ratio * ts * inp.delta_bar_max
    return out


def theoretical_bound(kind, inputs: BoundInputs, psi: float | None = None) -> dict:
    """Worst-case (w maximizing pi_w) value of each bound applicable to ``kind``.

    ``kind=None`` returns every bound the inputs allow.
    """
    vals = _formulas(inputs, inputs.pi_max / inputs.pi_min, psi)
    if kind is None:
        return dict(sorted(vals.items()))
    return {k: vals[k] for k in _APPLICABLE[RouterKind(kind)] if k in vals}


def per_vertex_bound(kind, inputs: BoundInputs, pi: np.ndarray, psi: float | None = None) -> dict:
    """Each applicable bound evaluated at every vertex w (arrays over w)."""
    vals = _formulas(inputs, np.asarray(pi) / inputs.pi_min, psi)
    if kind is None:
        return vals
    return {k: vals[k] for k in _APPLICABLE[RouterKind(kind)] if k in vals}


@dataclass
class DiscrepancyReport:
    per_time_max: np.ndarray
    per_vertex_max: np.ndarray
    global_max: float
    psi_measured: float
    bounds: dict = field(default_factory=dict)

    @property
    def all_satisfied(self) -> bool:
        return all(b["satisfied"] for b in self.bounds.values())

    def attach_bounds(self, kind, inputs: BoundInputs, pi=None, psi=None) -> "DiscrepancyReport":
        worst = theoretical_bound(kind, inputs, psi)
        per_v = per_vertex_bound(kind, inputs, pi, psi) if pi is not None else {}
        for name, value in worst.items():
            entry = {"value": float(value), "satisfied": bool(self.global_max <= value + SATISFIED_TOL)}
            if name in per_v:
                entry["per_vertex_satisfied"] = bool(
                    np.all(self.per_vertex_max <= per_v[name] + SATISFIED_TOL))
            self.bounds[name] = entry
        return self

    def to_json(self) -> dict:
        return {"max_discrepancy": self.global_max, "psi_measured": self.psi_measured,
                "bounds": self.bounds}


def discrepancy(trace: TokenTrace) -> DiscrepancyReport:
    d = trace.abs_discrepancy()
    return DiscrepancyReport(
        per_time_max=d.max(axis=1),
        per_vertex_max=d.max(axis=0),
        global_max=float(d.max()),
        psi_measured=float(trace.psi_measured),
    )


def lemma1_residual(trace: TokenTrace, P: TransitionMatrix, pi, T: int | None = None,
                    w: int | None = None) -> float:
    """|(chi_w(T) - mu_w(T)) - telescoped sum of per-step router errors|.

    The sum runs over t < T and arcs (v, u) of
    (Z_vu(t) - chi_v(t) P_vu) (P^{T-t-1}_{u,w} - pi_w). It is accumulated
    Horner-style, t ascending. With ``w=None`` the max over all w is returned.
    """
    if trace.flows is None:
        raise ValueError("trace has no flows; rerun with store_flows=True (full-trace mode)")
    T = trace.T if T is None else T
    if not 0 <= T <= trace.T:
        raise ValueError(f"T must be in [0, {trace.T}]")
    pi = np.asarray(pi, dtype=np.float64)
    src = _arc_sources(P)
    acc = np.zeros(P.n)
    total = 0.0
    for t in range(T):
        err = trace.flows[t] - trace.chi[t][src] * P.data
        d = np.bincount(P.indices, weights=err, minlength=P.n)
        acc = acc @ P.dense + d
        total += d.sum()
    rhs = acc - pi * total
    lhs = trace.chi[T] - trace.mu[T]
    res = np.abs(lhs - rhs)
    return float(res.max() if w is None else res[w])


def dtv_sum(profile: ChainProfile, T: int, v: int) -> float:
    """sum_{t<T} d_tv(P^t_{v,.}, pi) from the exact profile rows."""
    if not 0 <= T <= profile.t_max + 1:
        raise ValueError(f"T must be in [0, {profile.t_max + 1}] for this profile")
    return float(profile.dtv_rows[:T, v].sum())


def dtv_sum_bound(gamma: float, tau_gamma: int) -> float:
    if not 0 < gamma < 0.5:
        raise ValueError("gamma must lie in (0, 1/2)")
    return (1 - gamma) / (1 - 2 * gamma) * tau_gamma
