"""Bundled example games and profiles."""

from fractions import Fraction

from .game import SignallingGame, StrategyProfile


def beer_quiche() -> SignallingGame:
    v = {"strong": {"B": 1, "Q": 0}, "weak": {"B": 0, "Q": 1}}
    z = {"F": 0, "NF": 2}
    u1 = {t: {s: {a: v[t][s] + z[a] for a in z} for s in ("B", "Q")} for t in v}
    # receiver wants to fight the weak type and leave the strong type alone
    u2 = {
        "strong": {s: {"F": 0, "NF": 1} for s in ("B", "Q")},
        "weak": {s: {"F": 1, "NF": 0} for s in ("B", "Q")},
    }
    return SignallingGame.from_dicts(("strong", "weak"), ("B", "Q"), ("F", "NF"),
                                     {"strong": Fraction(9, 10), "weak": Fraction(1, 10)},
                                     u1, u2, name="beer-quiche")


def modified_beer_quiche(fight_weak_beer=20) -> SignallingGame:
    """Beer-quiche where fighting a weak beer drinker pays the receiver ``fight_weak_beer``.

    At 20 fighting after beer is the receiver's strict best response under the prior.
    """
    base = beer_quiche()
    u2 = [[list(row) for row in plane] for plane in base.u2]
    u2[1][0][0] = Fraction(fight_weak_beer)
    return SignallingGame(base.types, base.signals, base.actions, base.prior, base.u1, u2,
                          name="modified-beer-quiche")


def learning_example() -> SignallingGame:
    """Two types, two signals; the first type's reward after s1 is -1 (a1) or 2 (a2).

    s2 pays both types 0; s1 pays the second type -1 whatever the response.
    The receiver is indifferent everywhere.
    """
    u1 = {
        "t1": {"s1": {"a1": -1, "a2": 2}, "s2": {"a1": 0, "a2": 0}},
        "t2": {"s1": {"a1": -1, "a2": -1}, "s2": {"a1": 0, "a2": 0}},
    }
    u2 = {t: {s: {a: 0 for a in ("a1", "a2")} for s in ("s1", "s2")} for t in ("t1", "t2")}
    return SignallingGame.from_dicts(("t1", "t2"), ("s1", "s2"), ("a1", "a2"),
                                     {"t1": Fraction(1, 2), "t2": Fraction(1, 2)}, u1, u2,
                                     name="learning-example")


def quiche_pooling(game: SignallingGame | None = None) -> StrategyProfile:
    game = game or beer_quiche()
    return StrategyProfile.pure(game, {"strong": "Q", "weak": "Q"}, {"B": "F", "Q": "NF"})


def beer_pooling(game: SignallingGame | None = None) -> StrategyProfile:
    game = game or beer_quiche()
    return StrategyProfile.pure(game, {"strong": "B", "weak": "B"}, {"B": "NF", "Q": "F"})


def separating(game: SignallingGame | None = None) -> StrategyProfile:
    game = game or beer_quiche()
    return StrategyProfile.pure(game, {"strong": "B", "weak": "Q"}, {"B": "NF", "Q": "F"})
