import numpy as np
import pytest

from detwalk.analysis import (BoundInputs, discrepancy, dtv_sum, dtv_sum_bound, lemma1_residual,
                              per_vertex_bound, theoretical_bound)
from detwalk.chain import TransitionMatrix, mixing_profile, stationary_distribution
from detwalk.chains import parse_generator, random_reversible_chain
from detwalk.engine import initial_configuration, run

KINDS = ["srt", "billiard", "vdc", "rotor"]


def uniform_inputs(delta, t_star=1, **kw):
    return BoundInputs(pi_min=0.1, pi_max=0.1, t_star=t_star, tau_gamma=t_star, delta_max=delta, **kw)


def test_srt_substitution():
    assert theoretical_bound("srt", uniform_inputs(2))["thm2_srt"] == 12


def test_billiard_refined_substitution():
    b = theoretical_bound("billiard", uniform_inputs(3))
    assert b["thm5_billiard_refined"] == 12
    assert b["thm4_billiard"] == 18


def test_generic_form_reproduces_srt_constant():
    inp = uniform_inputs(3, t_star=7)
    b = theoretical_bound("srt", inp, psi=2.0)
    assert b["thm1_generic"] == pytest.approx(b["thm2_srt"])
    assert b["thm1_generic"] == pytest.approx(6 * 7 * 3)


def test_generic_bound_shrinks_with_measured_psi():
    inp = uniform_inputs(4, t_star=5)
    assert theoretical_bound("srt", inp, 1.5)["thm1_generic"] <= theoretical_bound("srt", inp)["thm2_srt"]


def test_vdc_and_rotor_need_extra_inputs():
    assert "thm7_vdc" not in theoretical_bound("vdc", uniform_inputs(2))
    assert theoretical_bound("vdc", uniform_inputs(2, M=1))["thm7_vdc"] == pytest.approx(12)
    b = theoretical_bound("rotor", uniform_inputs(2, delta_bar_max=4))
    assert b["thm8_rotor"] == 24 and b["thm9_rotor_refined"] == 12


def test_gamma_range():
    with pytest.raises(ValueError):
        uniform_inputs(2, gamma=0.5)
    with pytest.raises(ValueError):
        uniform_inputs(2, gamma=0.0)


def test_per_vertex_bound_uses_pi_ratio():
    inp = BoundInputs(pi_min=0.2, pi_max=0.6, t_star=1, tau_gamma=1, delta_max=2)
    pv = per_vertex_bound("srt", inp, np.array([0.2, 0.6, 0.2]))
    assert np.allclose(pv["thm2_srt"], [12, 36, 12])
    assert theoretical_bound("srt", inp)["thm2_srt"] == pytest.approx(36)


@pytest.mark.parametrize("kind", KINDS)
def test_telescoping_identity_small_chain(kind):
    P = random_reversible_chain(5, 2, seed=3)
    pi = stationary_distribution(P)
    tr = run(initial_configuration("point", 5, 60), P, kind, 30, store_flows=True)
    assert lemma1_residual(tr, P, pi) <= 1e-8
    assert lemma1_residual(tr, P, pi, T=0) == 0


def test_telescoping_residual_detects_injected_fault():
    P, _ = parse_generator("linext:n=3")
    pi = stationary_distribution(P)
    tr = run(initial_configuration("point", P.n, 50), P, "vdc", 12, store_flows=True)
    t, arc = 4, 3
    u = int(P.indices[arc])
    tr.flows[t] = tr.flows[t].copy()
    tr.flows[t][arc] += 1
    power = np.linalg.matrix_power(P.dense, tr.T - t - 1)
    for w in range(P.n):
        expect = abs(power[u, w] - pi[w])
        assert lemma1_residual(tr, P, pi, w=w) == pytest.approx(expect, abs=1e-9)


def test_telescoping_residual_needs_flows():
    P = random_reversible_chain(4, 2, seed=0)
    tr = run([5, 0, 0, 0], P, "srt", 3)
    with pytest.raises(ValueError, match="store_flows"):
        lemma1_residual(tr, P, stationary_distribution(P))


def test_dtv_sum_examples(lazy_two_state):
    prof = mixing_profile(lazy_two_state, 80)
    assert dtv_sum(prof, 1, 0) == pytest.approx(0.5)
    assert dtv_sum(prof, 81, 0) == pytest.approx(1.0)
    assert dtv_sum(prof, 81, 0) <= dtv_sum_bound(0.25, prof.tau_of(0.25))
    P = TransitionMatrix(np.full((4, 4), 0.25))
    prof = mixing_profile(P, 5)
    assert dtv_sum(prof, 5, 2) == pytest.approx(0.75)


@pytest.mark.parametrize("gamma", [0.1, 0.25, 0.4])
def test_dtv_sum_bound_holds(gamma):
    P, _ = parse_generator("matching:path=4")
    prof = mixing_profile(P, 150, (gamma,))
    bound = dtv_sum_bound(gamma, prof.tau_of(gamma))
    for v in range(P.n):
        for T in range(0, 151, 10):
            assert dtv_sum(prof, T, v) <= bound + 1e-12


@pytest.mark.parametrize("kind", KINDS)
def test_report_attaches_bounds(kind):
    P, _ = parse_generator("knapsack:a=1,1,1,1;b=2")
    prof = mixing_profile(P, None, (0.25,))
    tr = run(initial_configuration("point", P.n, 1000), P, kind, 10 * prof.t_star)
    rep = discrepancy(tr)
    assert rep.per_time_max[0] == 0
    inp = BoundInputs.from_profile(prof, 0.25, tr.delta_bar_max, tr.M)
    rep.attach_bounds(kind, inp, prof.pi, tr.psi_measured)
    assert rep.all_satisfied
    assert all(b["per_vertex_satisfied"] for b in rep.bounds.values())
    assert "thm1_generic" in rep.to_json()["bounds"]
