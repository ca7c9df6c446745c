"""Belief restrictions derived from the compatibility order, and the refinement checks built on them."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .compat import compatibility_relation
from .game import (OFF_PATH, SignallingGame, StrategyProfile, Verdict, as_fraction,
                   bayes_posterior, equilibrium_payoff, receiver_payoff)
from .lp import feasible_point


class EmptyBeliefSetError(ValueError):
    """Raised when a belief constraint set describes no belief at all."""


@dataclass(frozen=True)
class BeliefConstraintSet:
    """Polytope of beliefs over types.

    Each pair ``(hi, lo)`` in ``odds_constraints`` requires
    p(lo)/p(hi) <= prior(lo)/prior(hi), kept in the cleared form
    p(lo)*prior(hi) - prior(lo)*p(hi) <= 0. ``support``, when given,
    forces p(t) = 0 for every type outside it. The default is the whole simplex.
    """

    odds_constraints: tuple = ()
    support: frozenset | None = None

    def rows(self, game: SignallingGame):
        """Linear inequality rows (<= 0) and equality rows over the belief vector."""
        ub = []
        for hi, lo in self.odds_constraints:
            ih, il = game.type_index(hi), game.type_index(lo)
            row = [Fraction(0)] * game.n_types
            row[il] += game.prior[ih]
            row[ih] -= game.prior[il]
            ub.append(row)
        eq = [[Fraction(1)] * game.n_types]
        eq_rhs = [Fraction(1)]
        if self.support is not None:
            for i, t in enumerate(game.types):
                if t not in self.support:
                    row = [Fraction(0)] * game.n_types
                    row[i] = Fraction(1)
                    eq.append(row)
                    eq_rhs.append(Fraction(0))
        return ub, eq, eq_rhs

    def contains(self, game: SignallingGame, p) -> bool:
        p = [as_fraction(x) if not isinstance(x, float) else x for x in p]
        ub, eq, eq_rhs = self.rows(game)
        for row in ub:
            if sum(r * x for r, x in zip(row, p)) > 0:
                return False
        for row, b in zip(eq, eq_rhs):
            if sum(r * x for r, x in zip(row, p)) != b:
                return False
        return all(x >= 0 for x in p)

    def is_empty(self, game: SignallingGame) -> bool:
        ub, eq, eq_rhs = self.rows(game)
        return feasible_point(game.n_types, eq, eq_rhs, ub, [0] * len(ub)) is None

    def restrict(self, extra_pairs=(), support=None) -> "BeliefConstraintSet":
        sup = self.support
        if support is not None:
            sup = frozenset(support) if sup is None else sup & frozenset(support)
        return BeliefConstraintSet(tuple(self.odds_constraints) + tuple(extra_pairs), sup)

    def describe(self, game: SignallingGame) -> list[str]:
        out = []
        for hi, lo in self.odds_constraints:
            ih, il = game.type_index(hi), game.type_index(lo)
            out.append(f"p({lo})/p({hi}) <= {game.prior[il] / game.prior[ih]}")
        if self.support is not None:
            out.append("support " + ",".join(t for t in game.types if t in self.support))
        return out


def _max_payoff(game, i, j):
    return max(game.u1[i][j])


def undominated_types(game: SignallingGame, profile: StrategyProfile, s) -> set:
    """Types for which some response to ``s`` beats their payoff under ``profile`` strictly."""
    j = game.signal_index(s)
    return {t for i, t in enumerate(game.types)
            if _max_payoff(game, i, j) > equilibrium_payoff(game, profile, i)}


def weakly_undominated_types(game: SignallingGame, profile: StrategyProfile, s) -> set:
    j = game.signal_index(s)
    return {t for i, t in enumerate(game.types)
            if _max_payoff(game, i, j) >= equilibrium_payoff(game, profile, i)}


def admissible_beliefs(game: SignallingGame, profile: StrategyProfile, s, relation=None) -> BeliefConstraintSet:
    """Odds restrictions from ordered pairs whose more-compatible member gains from deviating to ``s``."""
    if relation is None:
        relation = compatibility_relation(game, s)
    J = undominated_types(game, profile, s)
    pairs = sorted((hi, lo) for hi, lo in relation if hi != lo and hi in J)
    return BeliefConstraintSet(tuple(pairs))


def strongly_admissible_beliefs(game: SignallingGame, profile: StrategyProfile, s, relation=None) -> BeliefConstraintSet:
    """Beliefs supported on the weakly undominated types and respecting every ordered pair at ``s``.

    With no weakly undominated type the whole simplex is returned.
    """
    if relation is None:
        relation = compatibility_relation(game, s)
    Jw = weakly_undominated_types(game, profile, s)
    if not Jw:
        return BeliefConstraintSet()
    pairs = sorted((hi, lo) for hi, lo in relation if hi != lo)
    return BeliefConstraintSet(tuple(pairs), frozenset(Jw))


def br_witness(game: SignallingGame, P: BeliefConstraintSet, s, a):
    """A belief in ``P`` against which ``a`` is a best response after ``s``, or None."""
    j, k = game.signal_index(s), game.action_index(a)
    ub, eq, eq_rhs = P.rows(game)
    if feasible_point(game.n_types, eq, eq_rhs, ub, [0] * len(ub)) is None:
        raise EmptyBeliefSetError(f"belief set is empty: {P.describe(game)}")
    rows = list(ub)
    for kk in range(game.n_actions):
        if kk != k:
            rows.append([game.u2[i][j][kk] - game.u2[i][j][k] for i in range(game.n_types)])
    return feasible_point(game.n_types, eq, eq_rhs, rows, [0] * len(rows))


def br_membership(game: SignallingGame, P: BeliefConstraintSet, s, a) -> bool:
    """Is ``a`` a best response after ``s`` to at least one belief in ``P``?"""
    return br_witness(game, P, s, a) is not None


def _criterion(game, profile, tol, belief_sets):
    verdict = Verdict(True)
    for j, s in enumerate(game.signals):
        P = belief_sets(j)
        try:
            for k, a in enumerate(game.actions):
                if profile.pi2[j][k] > tol and not br_membership(game, P, j, k):
                    verdict.witnesses.append((s, a))
        except EmptyBeliefSetError:
            # no belief is allowed, so no action in use can be justified
            verdict.notes.append(f"empty belief set at {s}")
            verdict.witnesses.extend((s, a) for k, a in enumerate(game.actions)
                                     if profile.pi2[j][k] > tol)
    verdict.passed = not verdict.witnesses
    return verdict


def check_compatibility_criterion(game: SignallingGame, profile: StrategyProfile, tol: float = 0.0) -> Verdict:
    """Every receiver action used with probability above ``tol`` must be justified by an admissible belief."""
    profile.check_shape(game)
    return _criterion(game, profile, tol,
                      lambda j: admissible_beliefs(game, profile, j, compatibility_relation(game, j)))


def check_strong_compatibility_criterion(game: SignallingGame, profile: StrategyProfile, tol: float = 0.0) -> Verdict:
    profile.check_shape(game)
    return _criterion(game, profile, tol,
                      lambda j: strongly_admissible_beliefs(game, profile, j, compatibility_relation(game, j)))


def is_on_path_strict(game: SignallingGame, profile: StrategyProfile, tol: float = 0.0) -> bool:
    """Receiver plays a strict best response with certainty after every on-path signal.

    ``tol`` loosens "with certainty" to probability at least 1 - tol, for simulated profiles.
    """
    for j in range(game.n_signals):
        post = bayes_posterior(game, profile, j)
        if post is OFF_PATH:
            continue
        k = max(range(game.n_actions), key=lambda kk: profile.pi2[j][kk])
        if profile.pi2[j][k] < 1 - tol:
            return False
        mine = receiver_payoff(game, post, j, k)
        if any(receiver_payoff(game, post, j, kk) >= mine for kk in range(game.n_actions) if kk != k):
            return False
    return True
