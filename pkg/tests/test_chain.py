import json

import numpy as np
import pytest

from detwalk.chain import (ChainError, ConvergenceError, TransitionMatrix, evolve, mixing_profile,
                           mixing_rate, point_wise_distance, stationary_distribution,
                           total_variation, validate_chain)
from detwalk.chains import linear_extension_chain, PosetInstance, random_reversible_chain


def test_rejects_bad_row_and_names_it():
    with pytest.raises(ChainError, match="row 1"):
        TransitionMatrix([[1.0, 0.0], [0.5, 0.6]])


def test_rejects_negative_entry():
    with pytest.raises(ChainError):
        TransitionMatrix([[1.2, -0.2], [0.5, 0.5]])


def test_row_sum_tolerance():
    TransitionMatrix([[0.5, 0.5 + 5e-10], [0.5, 0.5]])
    with pytest.raises(ChainError):
        TransitionMatrix([[0.5, 0.5 + 5e-9], [0.5, 0.5]])


def test_csr_matches_dense(two_state):
    P = random_reversible_chain(12, 3, seed=4)
    for v in range(P.n):
        nb = P.neighbors(v)
        assert list(nb) == sorted(nb)
        assert np.allclose(P.row(v), P.dense[v, nb])
        assert P.degree(v) == np.count_nonzero(P.dense[v])
    assert P.num_arcs == np.count_nonzero(P.dense)


def test_json_round_trip(tmp_path):
    P = random_reversible_chain(8, 3, seed=1, irrational=True)
    path = tmp_path / "c.json"
    P.save(path)
    Q = TransitionMatrix.load(path)
    assert np.array_equal(P.dense, Q.dense)
    obj = json.loads(path.read_text())
    assert obj["n"] == 8 and len(obj["rows"]) == 8


def test_validate_flags_each_property():
    periodic = TransitionMatrix([[0, 1], [1, 0]])
    rep = validate_chain(periodic)
    assert rep.irreducible and not rep.aperiodic and rep.period == 2
    reducible = TransitionMatrix([[1, 0], [0.5, 0.5]])
    assert not validate_chain(reducible).irreducible
    cyclic = TransitionMatrix([[0.5, 0.5, 0], [0, 0.5, 0.5], [0.5, 0, 0.5]])
    rep = validate_chain(cyclic)
    assert rep.ergodic and not rep.reversible
    skew = TransitionMatrix([[0.5, 0.4, 0.1], [0.1, 0.5, 0.4], [0.4, 0.1, 0.5]])
    rep = validate_chain(skew)
    assert rep.ergodic and not rep.reversible
    assert "not reversible" in rep.failures()


def test_stationary_two_state(two_state):
    pi = stationary_distribution(two_state)
    assert np.allclose(pi, [0.75, 0.25], atol=1e-12)


def test_stationary_is_fixed_point():
    P = random_reversible_chain(30, 4, seed=2, irrational=True)
    pi = stationary_distribution(P)
    assert np.abs(pi @ P.dense - pi).max() < 1e-12
    assert abs(pi.sum() - 1) < 1e-12


def test_stationary_convergence_error(two_state):
    P = two_state  # uniform start is not stationary here
    with pytest.raises(ConvergenceError, match="3"):
        stationary_distribution(P, tol=0.0, max_iter=3)


def test_total_variation_and_pointwise():
    assert total_variation([1, 0], [0.5, 0.5]) == pytest.approx(0.5)
    assert point_wise_distance([1, 0], [0.25, 0.75]) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        total_variation([1, 0], [1, 0, 0])


def test_evolve_lazy(lazy_two_state):
    assert np.allclose(evolve([1, 0], lazy_two_state, 2), [5 / 8, 3 / 8])
    # unnormalized vectors are transported linearly
    assert np.allclose(evolve([4, 0], lazy_two_state, 1), [3, 1])


def test_lazy_two_state_profile(lazy_two_state):
    prof = mixing_profile(lazy_two_state, 40)
    assert prof.t_star == 1
    t = np.arange(41)
    assert np.abs(prof.h_profile - 0.5 ** (t + 1)).max() < 1e-12


def test_uniform_rows_mix_in_one_step():
    P = TransitionMatrix(np.full((4, 4), 0.25))
    prof = mixing_profile(P, None, (0.01, 0.1, 0.25))
    assert all(v == 1 for v in prof.tau.values())


def test_tau_not_reached_is_none():
    P = linear_extension_chain(PosetInstance(5))[0]
    prof = mixing_profile(P, 2, (0.25,))
    assert prof.tau[0.25] is None
    assert prof.to_json()["not_reached"] == ["0.25"]


def test_sandwich_and_submultiplicative():
    P = linear_extension_chain(PosetInstance(4))[0]
    prof = mixing_profile(P, 60)
    h, hb = prof.h_profile, prof.h_bar_profile
    assert np.all(h <= hb + 1e-12) and np.all(hb <= 2 * h + 1e-12)
    for s in range(30):
        for t in range(30):
            assert h[s + t] <= h[s] * hb[t] + 1e-12
            assert hb[s + t] <= hb[s] * hb[t] + 1e-12


def test_mixing_rate_linext3():
    P = linear_extension_chain(PosetInstance(3))[0]
    t = mixing_rate(P)
    assert 1 <= t < 100


def test_h_nonincreasing():
    for seed in range(5):
        prof = mixing_profile(random_reversible_chain(15, 3, seed=seed), 100)
        assert np.all(np.diff(prof.h_profile) <= 1e-15)
