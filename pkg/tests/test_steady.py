from fractions import Fraction

import numpy as np
import pytest

from oracles import example_asr_closed_form
from siglearn.game import SignallingGame, StrategyProfile, l1_distance
from siglearn.games import beer_pooling, beer_quiche, learning_example, quiche_pooling
from siglearn.steady import (LearningParams, ResponseMap, SolverConfig, classify, experimentation_rate_probe,
                             extrapolate, outcome_distance, patient_stability_scan, random_profile,
                             self_confirming_diagnostic, snap_profile, solve_steady_state, weighted_distance)

F = Fraction
EXACT = SolverConfig(mode="exact", prune_eps=1e-13)


def example_params(gamma):
    return LearningParams(0.0, gamma, ((1, 3), (1, 1)), ((1, 1), (1, 1)))


def test_example_steady_state():
    g = learning_example()
    res = solve_steady_state(g, example_params(0.9), EXACT)
    assert res.converged and res.residual <= 1e-9
    pi1 = res.profile.pi1_array()
    assert abs(pi1[0, 0] - example_asr_closed_form(0.9)) < 1e-9
    assert pi1[1, 1] == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(res.profile.pi2_array(), [[1, 0], [1, 0]])


def test_example_is_self_confirming_once_young_senders_are_rare():
    g = learning_example()
    res = solve_steady_state(g, example_params(0.99), EXACT)
    assert self_confirming_diagnostic(g, res, tol=0.1).passed
    # at gamma = 0.9 almost half of the first type still experiments with s1
    short = solve_steady_state(g, example_params(0.9), EXACT)
    v = self_confirming_diagnostic(g, short, tol=0.1)
    assert not v.passed and ("sender", "t1", "s1") in v.witnesses


def test_trivial_game():
    g = SignallingGame(("t",), ("s",), ("a",), (F(1),), [[[F(0)]]], [[[F(0)]]])
    res = solve_steady_state(g, LearningParams.uniform(g, 0.9, 0.9), EXACT)
    assert res.converged and res.iterations == 1 and res.residual == 0


def test_mixture_is_convex_combination():
    g = learning_example()
    a = ((1, 3), (1, 1))
    b = ((3, 1), (1, 1))
    rp = ((1, 1), (1, 1))
    mixed = LearningParams(0.0, 0.9, a, rp, prior_mixture=((0.25, a, rp), (0.75, b, rp)))
    prof = StrategyProfile.from_arrays(np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([[0.8, 0.2], [0.3, 0.7]]))
    img = ResponseMap(g, mixed, EXACT)(prof)
    ia = ResponseMap(g, LearningParams(0.0, 0.9, a, rp), EXACT)(prof)
    ib = ResponseMap(g, LearningParams(0.0, 0.9, b, rp), EXACT)(prof)
    assert np.allclose(img.pi1_array(), 0.25 * ia.pi1_array() + 0.75 * ib.pi1_array(), atol=1e-12)
    with pytest.raises(ValueError, match="sum to 1"):
        LearningParams(0.0, 0.9, a, rp, prior_mixture=((0.5, a, rp), (0.6, b, rp)))


def test_params_and_config_validation():
    g = beer_quiche()
    with pytest.raises(ValueError):
        LearningParams.uniform(g, 1.0, 0.9)
    with pytest.raises(ValueError):
        LearningParams.uniform(g, 0.9, 1.0)
    with pytest.raises(ValueError):
        SolverConfig(mode="fast")
    assert SolverConfig().tol == 0.05 and EXACT.tol == 1e-9
    p = LearningParams.uniform(g, 0.9, 0.99)
    assert p.beta == pytest.approx(0.891) and p.at(0.5, 0.5).sender_prior == p.sender_prior


def test_outcome_distance():
    g = beer_quiche()
    bp = beer_pooling(g)
    assert outcome_distance(g, bp, bp) == 0
    mild = StrategyProfile(bp.pi1, [[0, 1], [F(9, 10), F(1, 10)]])
    assert outcome_distance(g, mild, bp) == 0
    # weak would deviate to Q unless at most half the receivers concede after it
    bad = StrategyProfile(bp.pi1, [[0, 1], [F(1, 10), F(9, 10)]])
    assert outcome_distance(g, bad, bp) == pytest.approx(0.8, abs=1e-8)
    assert l1_distance(bad, bp) == F(9, 5)
    assert weighted_distance(g, bad, bp) == 0


def test_classify_fixtures():
    g = beer_quiche()
    c = classify(g, beer_pooling(g))
    assert c.nash.passed and c.pbe_hetero.passed and c.compatibility.passed and not c.invariant_violations
    q = classify(g, quiche_pooling(g))
    assert not q.compatibility.passed and q.invariant_violations
    noisy = StrategyProfile.from_arrays(np.array([[0.99, 0.01], [0.995, 0.005]]), np.array([[0.01, 0.99], [0.9, 0.1]]))
    assert snap_profile(noisy, 0.02).pi1_array().tolist() == [[1.0, 0.0], [1.0, 0.0]]
    assert classify(g, noisy, support_tol=0.02).compatibility.passed


def test_extrapolate():
    a = StrategyProfile.from_arrays(np.array([[0.6, 0.4]]), np.array([[0.5, 0.5]]))
    b = StrategyProfile.from_arrays(np.array([[0.8, 0.2]]), np.array([[0.5, 0.5]]))
    out = extrapolate([(0.1, a), (0.05, b)])
    assert np.allclose(out.pi1_array(), [[1.0, 0.0]])
    assert np.allclose(extrapolate([(0.1, a)]).pi1_array(), a.pi1_array())


def test_random_profile_is_valid():
    g = beer_quiche()
    p = random_profile(g, np.random.default_rng(0))
    assert np.allclose(p.pi1_array().sum(1), 1) and np.allclose(p.pi2_array().sum(1), 1)


def test_diagnostic_flags_non_best_response():
    g = beer_quiche()
    bad = StrategyProfile(beer_pooling(g).pi1, [[1, 0], [1, 0]])
    v = self_confirming_diagnostic(g, bad, tol=0.05)
    assert not v.passed and ("receiver", "B", "F") in v.witnesses


def test_single_signal_scan_is_constant():
    g = SignallingGame(("t", "u"), ("s",), ("a", "b"), (F(1, 2), F(1, 2)), [[[F(0), F(1)]], [[F(1), F(0)]]],
                       [[[F(1), F(0)]], [[F(1), F(0)]]])
    res = patient_stability_scan(g, LearningParams.uniform(g, 0.5, 0.5), [(0.5, 0.5), (0.6, 0.6)], EXACT,
                                 cold_check=False)
    assert all(r.converged for r in res.trajectory)
    assert all(np.allclose(r.profile.pi2_array(), [[1, 0]]) for r in res.trajectory)


def test_probe_dominated_signal():
    g = learning_example()
    ref = StrategyProfile.pure(g, {"t1": "s2", "t2": "s2"}, {"s1": "a1", "s2": "a1"})
    with pytest.raises(ValueError):
        experimentation_rate_probe(g, example_params(0.9), ref, "t2", "s1", grid=[(0.0, 0.9)], solver=EXACT)
    rep = experimentation_rate_probe(g, example_params(0.9), ref, "t2", "s1", grid=[(0.0, 0.8), (0.0, 0.9)],
                                     solver=EXACT, check_precondition=False)
    assert rep.near_zero and rep.ratios == [0.0, 0.0]


def test_probe_patience_raises_experimentation():
    g = learning_example()
    ref = StrategyProfile.pure(g, {"t1": "s2", "t2": "s2"}, {"s1": "a1", "s2": "a1"})
    params = LearningParams(0.0, 0.9, ((1, 3), (1, 1)), ((1, 1), (1, 1)))
    rep = experimentation_rate_probe(g, params, ref, "t1", "s1", grid=[(0.0, 0.9), (0.5, 0.9), (0.8, 0.9)],
                                     solver=EXACT)
    assert rep.increasing and rep.ratios[-1] > rep.ratios[0]


def test_monte_carlo_residual_holds_with_doubled_budget():
    g = beer_quiche()
    params = LearningParams.uniform(g, 0.9, 0.95)
    cfg = SolverConfig(n_lifetimes=1000, n_receivers=5000, seed=3)
    res = solve_steady_state(g, params, cfg)
    assert res.converged
    big = SolverConfig(n_lifetimes=2000, n_receivers=10000, seed=4)
    img = ResponseMap(g, params, big)(res.profile)
    assert float(l1_distance(res.profile, img)) <= 2 * cfg.tol
