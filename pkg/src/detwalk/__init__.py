"""Deterministic functional-router walks compared against their Markov chains."""

from detwalk._backend import BACKEND
from detwalk.analysis import (BoundInputs, DiscrepancyReport, discrepancy, lemma1_residual,
                              per_vertex_bound, theoretical_bound)
from detwalk.chain import (ChainError, TransitionMatrix, evolve, mixing_profile, mixing_rate,
                           stationary_distribution, total_variation, validate_chain)
from detwalk.engine import TokenTrace, run, step
from detwalk.routers import RouterBank, RouterKind, RouterState, van_der_corput

__all__ = [
    "BACKEND", "BoundInputs", "ChainError", "DiscrepancyReport", "RouterBank", "RouterKind",
    "RouterState", "TokenTrace", "TransitionMatrix", "discrepancy", "evolve", "lemma1_residual",
    "mixing_profile", "mixing_rate", "per_vertex_bound", "run", "stationary_distribution", "step",
    "theoretical_bound", "total_variation", "validate_chain", "van_der_corput",
]
