from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from siglearn.game import SignallingGame, bayes_posterior, StrategyProfile
from siglearn.games import beer_quiche, separating
from siglearn.receiver import (arr_exact_small, arr_monte_carlo, receiver_learning_check,
                               receiver_posterior_belief, receiver_policy)

F = Fraction
SYM = [(1, 1), (1, 1)]


def test_posterior_belief_examples():
    g = beer_quiche()
    zero = [[0, 0], [0, 0]]
    assert receiver_posterior_belief(g, SYM, zero, "B").p == pytest.approx((0.9, 0.1))
    assert receiver_posterior_belief(g, SYM, [[4, 4], [7, 7]], "Q").p == pytest.approx((0.9, 0.1))
    assert receiver_posterior_belief(g, SYM, [[10, 0], [0, 0]], "B").p[0] > 0.9
    with pytest.raises(ValueError):
        receiver_posterior_belief(g, SYM, [[-1, 0], [0, 0]], "B")


def test_policy_examples():
    g = beer_quiche()
    assert receiver_policy(g, SYM, [[0, 0], [0, 0]]) == {"B": "NF", "Q": "NF"}
    assert receiver_policy(g, SYM, [[0, 500], [500, 0]])["B"] == "F"
    one = SignallingGame(("t", "u"), ("s",), ("a",), (F(1, 2), F(1, 2)), [[[F(0)]], [[F(0)]]], [[[F(1)]], [[F(0)]]])
    assert receiver_policy(one, [(1,), (1,)], [[3], [0]]) == {"s": "a"}


def test_newborn_population():
    g = beer_quiche()
    pi1 = separating(g).pi1
    mc = arr_monte_carlo(g, pi1, SYM, 0.0, n_lifetimes=100)
    assert mc.pi2.tolist() == [[0.0, 1.0], [0.0, 1.0]]
    ex = arr_exact_small(g, pi1, SYM, 0.7, 0)
    assert ex.pi2.tolist() == [[0.0, 1.0], [0.0, 1.0]] and ex.tail == pytest.approx(0.7)


def test_separating_population_learns():
    g = beer_quiche()
    res = arr_monte_carlo(g, separating(g).pi1, SYM, 0.99, n_lifetimes=20000, seed=1)
    assert res.pi2[0, 1] >= 0.95
    ex = arr_exact_small(g, separating(g).pi1, SYM, 0.99, 120)
    assert ex.pi2[0, 1] >= 0.95


def test_deterministic_seed():
    g = beer_quiche()
    pi1 = [[0.3, 0.7], [0.6, 0.4]]
    a = arr_monte_carlo(g, pi1, SYM, 0.95, 2000, seed=5)
    b = arr_monte_carlo(g, pi1, SYM, 0.95, 2000, seed=5)
    assert np.array_equal(a.pi2, b.pi2)


def test_degenerate_sender_play():
    g = beer_quiche()
    # only the strong type ever sends B, so counts after B are deterministic in age
    pi1 = [[1, 0], [0, 1]]
    assert bayes_posterior(g, StrategyProfile(pi1, [[1, 0], [1, 0]]), "B").p == (1, 0)
    ex = arr_exact_small(g, pi1, SYM, 0.9, 30)
    assert ex.pi2[0].tolist() == [0.0, 1.0]


def test_enumeration_guard():
    g = beer_quiche()
    with pytest.raises(ValueError, match="cap"):
        arr_exact_small(g, [[0.5, 0.5], [0.5, 0.5]], SYM, 0.999, 5000)


@settings(max_examples=8, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.5, 0.9))
def test_exact_matches_monte_carlo(p, q, gamma):
    g = beer_quiche()
    pi1 = [[p, 1 - p], [q, 1 - q]]
    ex = arr_exact_small(g, pi1, SYM, gamma, 60)
    mc = arr_monte_carlo(g, pi1, SYM, gamma, 20000, seed=3)
    assert np.all(np.abs(ex.pi2 - mc.pi2) <= ex.tail + 4 * np.maximum(mc.std_err, 1 / 20000))


@given(st.lists(st.integers(0, 50), min_size=4, max_size=4), st.lists(st.floats(0.1, 5), min_size=4, max_size=4))
def test_posterior_is_a_belief(counts, alpha):
    g = beer_quiche()
    b = receiver_posterior_belief(g, [alpha[:2], alpha[2:]], [counts[:2], counts[2:]], "Q")
    assert abs(sum(b.p) - 1) < 1e-12 and min(b.p) > 0


def test_posterior_consistency():
    g = beer_quiche()
    pi1 = [[0.7, 0.3], [0.2, 0.8]]
    truth = bayes_posterior(g, StrategyProfile(pi1, [[1, 0], [1, 0]]), "B").p
    errs = []
    for k in (100, 10_000):
        counts = [[0.9 * pi1[i][j] * k if i == 0 else 0.1 * pi1[i][j] * k for j in range(2)] for i in range(2)]
        b = receiver_posterior_belief(g, SYM, counts, "B")
        errs.append(abs(b.p[0] - float(truth[0])))
    assert errs[1] < errs[0] and errs[1] < 1e-3


def test_learning_check_examples():
    g = beer_quiche()
    rep = receiver_learning_check(g, [[0.05, 0.95], [0.01, 0.99]], SYM, 0.999, "strong", "weak", "B", 10)
    assert rep.fraction >= 0.85 and rep.supported_actions == ["NF"]
    assert receiver_learning_check(g, [[0, 1], [0, 1]], SYM, 0.999, "strong", "weak", "B", 10).vacuous
    young = receiver_learning_check(g, [[0.5, 0.5], [0.1, 0.9]], SYM, 0.0, "strong", "weak", "B", 10)
    assert young.fraction == 1.0
    with pytest.raises(ValueError, match="precondition"):
        receiver_learning_check(g, [[0.1, 0.9], [0.5, 0.5]], SYM, 0.9, "strong", "weak", "B", 10)
