from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_force_br
from siglearn.game import SignallingGame, StrategyProfile
from siglearn.games import beer_pooling, beer_quiche, modified_beer_quiche, quiche_pooling
from siglearn.refinement import (BeliefConstraintSet, EmptyBeliefSetError, admissible_beliefs, br_membership,
                                 br_witness, check_compatibility_criterion, check_strong_compatibility_criterion,
                                 is_on_path_strict, strongly_admissible_beliefs, undominated_types,
                                 weakly_undominated_types)

F = Fraction


def test_undominated_types():
    g = beer_quiche()
    assert undominated_types(g, quiche_pooling(g), "B") == {"strong"}
    assert undominated_types(modified_beer_quiche(), quiche_pooling(modified_beer_quiche()), "B") == {"strong"}
    assert weakly_undominated_types(modified_beer_quiche(), quiche_pooling(modified_beer_quiche()), "B") == {"strong"}
    assert undominated_types(g, beer_pooling(g), "B") == set()


def test_admissible_beliefs_at_beer():
    g = beer_quiche()
    P = admissible_beliefs(g, quiche_pooling(g), "B")
    assert P.describe(g) == ["p(weak)/p(strong) <= 1/9"]
    assert P.contains(g, [F(9, 10), F(1, 10)])
    assert P.contains(g, [F(1), F(0)])
    assert not P.contains(g, [F(89, 100), F(11, 100)])
    assert not br_membership(g, P, "B", "F")
    assert br_membership(g, P, "B", "NF")
    # on path under beer pooling nobody gains strictly, so nothing is restricted
    assert admissible_beliefs(g, beer_pooling(g), "B") == BeliefConstraintSet()


def test_strongly_admissible_point_mass():
    g = modified_beer_quiche()
    P = strongly_admissible_beliefs(g, quiche_pooling(g), "B")
    assert P.contains(g, [1, 0]) and not P.contains(g, [F(99, 100), F(1, 100)])
    assert br_witness(g, P, "B", "NF") == [1, 0]
    assert not br_membership(g, P, "B", "F")


def test_criterion_verdicts():
    g = beer_quiche()
    v = check_compatibility_criterion(g, quiche_pooling(g))
    assert not v.passed and ("B", "F") in v.witnesses
    assert check_compatibility_criterion(g, beer_pooling(g)).passed
    m = modified_beer_quiche()
    assert check_compatibility_criterion(m, quiche_pooling(m)).passed
    s = check_strong_compatibility_criterion(m, quiche_pooling(m))
    assert not s.passed and s.witnesses == [("B", "F")]
    assert is_on_path_strict(m, quiche_pooling(m))


def test_on_path_strict_needs_pure_response():
    g = beer_quiche()
    mixed = StrategyProfile(quiche_pooling(g).pi1, [[0, 1], [F(1, 4), F(3, 4)]])
    assert not is_on_path_strict(g, mixed)
    assert is_on_path_strict(g, mixed, tol=0.3)


def test_empty_belief_set():
    g = beer_quiche()
    P = BeliefConstraintSet(support=frozenset())
    assert P.is_empty(g)
    with pytest.raises(EmptyBeliefSetError):
        br_witness(g, P, "B", "F")


small = st.integers(-3, 3).map(F)


@st.composite
def receiver_problems(draw):
    n_types = draw(st.integers(2, 3))
    u2 = [[[draw(small) for _ in range(2)]] for _ in range(n_types)]
    w = [draw(st.integers(1, 4)) for _ in range(n_types)]
    prior = [F(x, sum(w)) for x in w]
    pairs = draw(st.lists(st.tuples(st.integers(0, n_types - 1), st.integers(0, n_types - 1))
                          .filter(lambda p: p[0] != p[1]), max_size=2, unique=True))
    support = draw(st.one_of(st.none(), st.sets(st.integers(0, n_types - 1), min_size=1)))
    return u2, prior, pairs, support


def _game(u2, prior):
    n = len(prior)
    types = tuple(f"t{i}" for i in range(n))
    return SignallingGame(types, ("s",), ("a", "b"), tuple(prior), [[[F(0), F(0)]] for _ in range(n)], u2)


@settings(max_examples=40, deadline=None)
@given(receiver_problems(), st.integers(0, 1))
def test_br_agrees_with_grid(problem, a):
    u2, prior, pairs, support = problem
    g = _game(u2, prior)
    P = BeliefConstraintSet(tuple((g.types[h], g.types[l]) for h, l in pairs),
                            None if support is None else frozenset(g.types[i] for i in support))
    if P.is_empty(g):
        return
    w = br_witness(g, P, 0, a)
    if brute_force_br(u2, prior, pairs, support, 0, a) is not None:
        assert w is not None
    if w is not None:
        assert P.contains(g, w)
        vals = [sum(w[i] * u2[i][0][b] for i in range(len(prior))) for b in range(2)]
        assert vals[a] == max(vals)


@settings(max_examples=40, deadline=None)
@given(receiver_problems(), st.integers(0, 1))
def test_more_constraints_shrink_best_responses(problem, a):
    u2, prior, pairs, support = problem
    g = _game(u2, prior)
    P = BeliefConstraintSet(tuple((g.types[h], g.types[l]) for h, l in pairs))
    Q = P.restrict(support=None if support is None else [g.types[i] for i in support])
    if Q.is_empty(g):
        return
    if br_membership(g, Q, 0, a):
        assert br_membership(g, P, 0, a)


@st.composite
def games_and_profiles(draw):
    def row(n):
        w = [draw(st.integers(0, 3)) for _ in range(n)]
        if not sum(w):
            w[0] = 1
        return [F(x, sum(w)) for x in w]
    u1 = [[[draw(small) for _ in range(2)] for _ in range(2)] for _ in range(2)]
    u2 = [[[draw(small) for _ in range(2)] for _ in range(2)] for _ in range(2)]
    g = SignallingGame(("x", "y"), ("s", "r"), ("a", "b"), (F(1, 2), F(1, 2)), u1, u2)
    return g, StrategyProfile([row(2), row(2)], [row(2), row(2)])


@settings(max_examples=40, deadline=None)
@given(games_and_profiles())
def test_strong_pass_implies_plain_pass(gp):
    g, p = gp
    if check_strong_compatibility_criterion(g, p).passed:
        assert check_compatibility_criterion(g, p).passed
