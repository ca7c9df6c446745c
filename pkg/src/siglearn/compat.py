"""Compatibility order between sender types, decided by exact linear feasibility."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from .game import SignallingGame, as_fraction
from .lp import feasible_point


@dataclass
class CompatResult:
    """``holds`` is the answer; ``witness`` is a receiver strategy (signal -> action mix)
    refuting it when ``holds`` is False."""

    holds: bool
    witness: tuple | None = None
    vacuous: bool = False

    def __bool__(self):
        return self.holds


def _var(game, j, k):
    return j * game.n_actions + k


def _payoff_row(game, i, j, sign=1):
    """Row over the receiver-strategy variables for ``sign * u1(type i, signal j, pi2(j))``."""
    row = [Fraction(0)] * (game.n_signals * game.n_actions)
    for k in range(game.n_actions):
        row[_var(game, j, k)] += sign * game.u1[i][j][k]
    return row


def _simplex_rows(game):
    eq, rhs = [], []
    for j in range(game.n_signals):
        row = [Fraction(0)] * (game.n_signals * game.n_actions)
        for k in range(game.n_actions):
            row[_var(game, j, k)] = Fraction(1)
        eq.append(row)
        rhs.append(Fraction(1))
    return eq, rhs


def _weakly_best_rows(game, i, j):
    """Rows for: signal j is a weak best response for type i (u1(i,other) - u1(i,j) <= 0)."""
    rows = []
    for jj in range(game.n_signals):
        if jj != j:
            rows.append([a + b for a, b in zip(_payoff_row(game, i, jj), _payoff_row(game, i, j, -1))])
    return rows


def _unflatten(game, x):
    return tuple(tuple(x[_var(game, j, k)] for k in range(game.n_actions))
                 for j in range(game.n_signals))


def is_more_compatible(game: SignallingGame, hi, lo, s) -> CompatResult:
    """Whether type ``hi`` is more compatible with signal ``s`` than type ``lo``.

    True when every receiver strategy making ``s`` weakly optimal for ``lo``
    makes it strictly optimal for ``hi``. One feasibility problem is solved
    per alternative signal; a feasible one yields a refuting witness.
    """
    i_hi, i_lo, j = game.type_index(hi), game.type_index(lo), game.signal_index(s)
    if game.n_signals == 1:
        return CompatResult(True, None, vacuous=True)
    eq, eq_rhs = _simplex_rows(game)
    base = _weakly_best_rows(game, i_lo, j)
    nvar = game.n_signals * game.n_actions
    for jj in range(game.n_signals):
        if jj == j:
            continue
        # hi weakly prefers jj to s
        extra = [a + b for a, b in zip(_payoff_row(game, i_hi, j), _payoff_row(game, i_hi, jj, -1))]
        rows = base + [extra]
        x = feasible_point(nvar, eq, eq_rhs, rows, [0] * len(rows))
        if x is not None:
            return CompatResult(False, _unflatten(game, x))
    return CompatResult(True, None)


def compatibility_relation(game: SignallingGame, s) -> set[tuple[str, str]]:
    """All ordered type pairs (hi, lo), reflexive ones included, for which the order holds at ``s``."""
    out = set()
    for hi in game.types:
        for lo in game.types:
            if is_more_compatible(game, hi, lo, s).holds:
                out.add((hi, lo))
    return out


def separable_decomposition(game: SignallingGame):
    """Split ``u1`` as v(type, signal) + z(action) if possible, else raise.

    z is normalised so that z(first action) = 0.
    """
    v = [[game.u1[i][j][0] for j in range(game.n_signals)] for i in range(game.n_types)]
    z = [game.u1[0][0][k] - game.u1[0][0][0] for k in range(game.n_actions)]
    validate_separable(game, v, z)
    return v, z


def validate_separable(game: SignallingGame, v, z):
    """Raise ValueError naming the first cell where u1 != v + z."""
    for i, t in enumerate(game.types):
        for j, s in enumerate(game.signals):
            for k, a in enumerate(game.actions):
                rhs = as_fraction(v[i][j]) + as_fraction(z[k])
                if game.u1[i][j][k] != rhs:
                    raise ValueError(
                        f"u1 is not separable at ({t}, {s}, {a}): "
                        f"{game.u1[i][j][k]} != {as_fraction(v[i][j])} + {as_fraction(z[k])}")


def separable_check(game: SignallingGame, v, z, hi, lo, s) -> bool:
    """Sufficient condition for the order when u1(type, signal, action) = v(type, signal) + z(action).

    ``v`` is indexed [type][signal] and ``z`` [action] in the game's ordering;
    the decomposition is validated against u1 first.
    """
    validate_separable(game, v, z)
    i_hi, i_lo, j = game.type_index(hi), game.type_index(lo), game.signal_index(s)
    diff = [as_fraction(v[i_hi][jj]) - as_fraction(v[i_lo][jj]) for jj in range(game.n_signals)]
    others = [d for jj, d in enumerate(diff) if jj != j]
    if not others:
        return True
    return diff[j] > max(others)


def _never_weakly_best(game, i, j):
    eq, eq_rhs = _simplex_rows(game)
    rows = _weakly_best_rows(game, i, j)
    return feasible_point(game.n_signals * game.n_actions, eq, eq_rhs, rows, [0] * len(rows)) is None


def _always_strictly_best(game, i, j):
    eq, eq_rhs = _simplex_rows(game)
    nvar = game.n_signals * game.n_actions
    for jj in range(game.n_signals):
        if jj == j:
            continue
        row = [a + b for a, b in zip(_payoff_row(game, i, j), _payoff_row(game, i, jj, -1))]
        if feasible_point(nvar, eq, eq_rhs, [row], [0]) is not None:
            return False
    return True


@dataclass
class RelationReport:
    relation: set
    transitivity_violations: list = field(default_factory=list)
    asymmetry_violations: list = field(default_factory=list)
    dominance_exceptions: list = field(default_factory=list)
    sampled_soundness_violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not (self.transitivity_violations or self.asymmetry_violations
                    or self.sampled_soundness_violations)


def relation_properties_check(game: SignallingGame, s, trials: int = 200, seed: int = 0) -> RelationReport:
    """Check transitivity and asymmetry of the order at ``s``.

    Symmetric pairs are excused when both types find ``s`` strictly
    dominant or never weakly optimal; those are listed as exceptions.
    ``trials`` random receiver strategies additionally spot-check each
    pair the relation claims.
    """
    j = game.signal_index(s)
    rel = compatibility_relation(game, j)
    rep = RelationReport(rel)
    degenerate = {t for i, t in enumerate(game.types)
                  if _never_weakly_best(game, i, j) or _always_strictly_best(game, i, j)}
    for a, b in rel:
        for c, d in rel:
            if b == c and (a, d) not in rel:
                rep.transitivity_violations.append((a, b, d))
        if (b, a) in rel:
            if a in degenerate and b in degenerate:
                rep.dominance_exceptions.append((a, b))
            else:
                rep.asymmetry_violations.append((a, b))
    rng = random.Random(seed)
    for _ in range(trials):
        pi2 = []
        for _j in range(game.n_signals):
            w = [Fraction(rng.randint(0, 20)) for _ in range(game.n_actions)]
            if sum(w) == 0:
                w[0] = Fraction(1)
            tot = sum(w)
            pi2.append([x / tot for x in w])
        vals = [[sum(p * u for p, u in zip(pi2[jj], game.u1[i][jj])) for jj in range(game.n_signals)]
                for i in range(game.n_types)]
        for hi, lo in rel:
            ih, il = game.types.index(hi), game.types.index(lo)
            lo_weak = all(vals[il][j] >= vals[il][jj] for jj in range(game.n_signals))
            hi_strict = all(vals[ih][j] > vals[ih][jj] for jj in range(game.n_signals) if jj != j)
            if lo_weak and not hi_strict:
                rep.sampled_soundness_violations.append((hi, lo, tuple(map(tuple, pi2))))
    return rep
