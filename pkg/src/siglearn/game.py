"""Finite signalling games: data model, payoffs, posteriors and equilibrium checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from numbers import Rational
from typing import Mapping, Sequence

import numpy as np

Number = Fraction | float

ROW_TOL = 1e-12


class _OffPath:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "OFF_PATH"

    def __bool__(self):
        return False


OFF_PATH = _OffPath()


def as_fraction(x) -> Fraction:
    """Exact rational from an int, Fraction, decimal string, 'p/q' string or float."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        # floats read from literals go through repr to keep 0.9 == 9/10
        return Fraction(repr(x))
    raise TypeError(f"cannot convert {x!r} to a rational")


def _check_index_set(name, items):
    if len(items) == 0:
        raise ValueError(f"{name} must be non-empty")
    if len(set(items)) != len(items):
        raise ValueError(f"{name} contains duplicates: {list(items)}")


@dataclass(frozen=True)
class SignallingGame:
    """Types, signals, actions, a full-support prior over types and two payoff tables.

    Payoff tables are indexed ``[type][signal][action]`` and stored as exact
    rationals; ``u1_array``/``u2_array`` give float views.
    """

    types: tuple[str, ...]
    signals: tuple[str, ...]
    actions: tuple[str, ...]
    prior: tuple[Fraction, ...]
    u1: tuple[tuple[tuple[Fraction, ...], ...], ...]
    u2: tuple[tuple[tuple[Fraction, ...], ...], ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(self.types))
        object.__setattr__(self, "signals", tuple(self.signals))
        object.__setattr__(self, "actions", tuple(self.actions))
        _check_index_set("types", self.types)
        _check_index_set("signals", self.signals)
        _check_index_set("actions", self.actions)
        prior = tuple(as_fraction(p) for p in self.prior)
        if len(prior) != len(self.types):
            raise ValueError("prior length does not match the number of types")
        if any(p <= 0 for p in prior):
            raise ValueError("prior must give every type positive probability")
        if sum(prior) != 1:
            raise ValueError(f"prior does not sum to 1 (sum={sum(prior)})")
        object.__setattr__(self, "prior", prior)
        for label in ("u1", "u2"):
            table = getattr(self, label)
            shape = (len(self.types), len(self.signals), len(self.actions))
            if (len(table) != shape[0] or any(len(plane) != shape[1] for plane in table)
                    or any(len(row) != shape[2] for plane in table for row in plane)):
                raise ValueError(f"{label} table has shape mismatch, expected {shape}")
            conv = tuple(tuple(tuple(as_fraction(v) for v in row) for row in plane)
                         for plane in table)
            object.__setattr__(self, label, conv)

    @classmethod
    def from_dicts(cls, types, signals, actions, prior, u1, u2, name=""):
        """Build from name-keyed mappings: ``prior[t]``, ``u1[t][s][a]``, ``u2[t][s][a]``."""
        if isinstance(prior, Mapping):
            prior = [prior[t] for t in types]
        def table(u):
            return [[[u[t][s][a] for a in actions] for s in signals] for t in types]
        return cls(tuple(types), tuple(signals), tuple(actions), tuple(prior),
                   table(u1), table(u2), name=name)

    @property
    def n_types(self) -> int:
        return len(self.types)

    @property
    def n_signals(self) -> int:
        return len(self.signals)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    def type_index(self, t) -> int:
        return t if isinstance(t, int) else self.types.index(t)

    def signal_index(self, s) -> int:
        return s if isinstance(s, int) else self.signals.index(s)

    def action_index(self, a) -> int:
        return a if isinstance(a, int) else self.actions.index(a)

    @cached_property
    def u1_array(self) -> np.ndarray:
        return np.array(self.u1, dtype=float)

    @cached_property
    def u2_array(self) -> np.ndarray:
        return np.array(self.u2, dtype=float)

    @cached_property
    def prior_array(self) -> np.ndarray:
        return np.array(self.prior, dtype=float)


@dataclass(frozen=True)
class StrategyProfile:
    """Sender behaviour ``pi1[type][signal]`` and receiver behaviour ``pi2[signal][action]``."""

    pi1: tuple[tuple[Number, ...], ...]
    pi2: tuple[tuple[Number, ...], ...]

    def __post_init__(self):
        pi1 = tuple(tuple(_num(v) for v in row) for row in self.pi1)
        pi2 = tuple(tuple(_num(v) for v in row) for row in self.pi2)
        for label, rows in (("pi1", pi1), ("pi2", pi2)):
            for k, row in enumerate(rows):
                if any(v < 0 for v in row):
                    raise ValueError(f"{label} row {k} has a negative entry")
                if abs(float(sum(row)) - 1.0) > ROW_TOL and sum(row) != 1:
                    raise ValueError(f"{label} row {k} sums to {float(sum(row))!r}, not 1")
        object.__setattr__(self, "pi1", pi1)
        object.__setattr__(self, "pi2", pi2)

    @classmethod
    def from_dicts(cls, game: SignallingGame, pi1: Mapping, pi2: Mapping) -> "StrategyProfile":
        rows1 = [[pi1[t].get(s, 0) for s in game.signals] for t in game.types]
        rows2 = [[pi2[s].get(a, 0) for a in game.actions] for s in game.signals]
        return cls(rows1, rows2)

    @classmethod
    def from_arrays(cls, pi1, pi2) -> "StrategyProfile":
        return cls([[float(v) for v in row] for row in np.asarray(pi1)],
                   [[float(v) for v in row] for row in np.asarray(pi2)])

    @classmethod
    def pure(cls, game: SignallingGame, sender: Mapping, receiver: Mapping) -> "StrategyProfile":
        """Pure profile from ``sender[type] -> signal`` and ``receiver[signal] -> action``."""
        rows1 = [[Fraction(int(game.signals[j] == sender[t])) for j in range(game.n_signals)]
                 for t in game.types]
        rows2 = [[Fraction(int(game.actions[k] == receiver[s])) for k in range(game.n_actions)]
                 for s in game.signals]
        return cls(rows1, rows2)

    @classmethod
    def uniform(cls, game: SignallingGame) -> "StrategyProfile":
        return cls([[Fraction(1, game.n_signals)] * game.n_signals] * game.n_types,
                   [[Fraction(1, game.n_actions)] * game.n_actions] * game.n_signals)

    def pi1_array(self) -> np.ndarray:
        return np.array(self.pi1, dtype=float)

    def pi2_array(self) -> np.ndarray:
        return np.array(self.pi2, dtype=float)

    def check_shape(self, game: SignallingGame):
        if len(self.pi1) != game.n_types or any(len(r) != game.n_signals for r in self.pi1):
            raise ValueError("pi1 shape does not match the game")
        if len(self.pi2) != game.n_signals or any(len(r) != game.n_actions for r in self.pi2):
            raise ValueError("pi2 shape does not match the game")


def _num(v):
    if isinstance(v, (Fraction, int)) or isinstance(v, str):
        return as_fraction(v)
    return float(v)


@dataclass(frozen=True)
class Belief:
    p: tuple[Number, ...]

    def __post_init__(self):
        p = tuple(_num(v) for v in self.p)
        if any(v < 0 for v in p) or abs(float(sum(p)) - 1.0) > ROW_TOL:
            raise ValueError(f"not a probability vector: {p}")
        object.__setattr__(self, "p", p)

    def __getitem__(self, k):
        return self.p[k]

    def __len__(self):
        return len(self.p)


@dataclass
class Verdict:
    """Outcome of a check; ``witnesses`` lists every failure found."""

    passed: bool
    witnesses: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def __bool__(self):
        return self.passed

    def to_dict(self):
        return {"passed": self.passed,
                "witnesses": [list(w) if isinstance(w, tuple) else w for w in self.witnesses],
                "notes": list(self.notes)}


def _mix_dot(row: Sequence, mix: Sequence):
    return sum((m * v for m, v in zip(mix, row) if m != 0), start=Fraction(0) if all(
        isinstance(m, Fraction) for m in mix) else 0.0)


def sender_payoff(game: SignallingGame, theta, s, mix: Sequence) -> Number:
    """Expected sender payoff of type ``theta`` sending ``s`` against an action mixture."""
    if len(mix) != game.n_actions:
        raise ValueError(f"mixture has {len(mix)} entries, game has {game.n_actions} actions")
    row = game.u1[game.type_index(theta)][game.signal_index(s)]
    return _mix_dot(row, [_num(m) for m in mix])


def receiver_payoff(game: SignallingGame, belief: Sequence, s, a) -> Number:
    """Receiver's expected payoff from action ``a`` after ``s`` under a belief over types."""
    j, k = game.signal_index(s), game.action_index(a)
    p = belief.p if isinstance(belief, Belief) else belief
    return _mix_dot([game.u2[i][j][k] for i in range(game.n_types)], [_num(v) for v in p])


def equilibrium_payoff(game: SignallingGame, profile: StrategyProfile, theta) -> Number:
    i = game.type_index(theta)
    total = 0
    for j in range(game.n_signals):
        w = profile.pi1[i][j]
        if w != 0:
            total = total + w * sender_payoff(game, i, j, profile.pi2[j])
    return total


def bayes_posterior(game: SignallingGame, pi1, s):
    """Posterior over types after ``s``, or ``OFF_PATH`` when ``s`` has zero probability."""
    rows = pi1.pi1 if isinstance(pi1, StrategyProfile) else pi1
    j = game.signal_index(s)
    weights = [lam * rows[i][j] for i, lam in enumerate(game.prior)]
    total = sum(weights)
    if total == 0:
        return OFF_PATH
    return Belief(tuple(w / total for w in weights))


def best_reply_value(game: SignallingGame, belief, s) -> Number:
    return max(receiver_payoff(game, belief, s, k) for k in range(game.n_actions))


def is_nash(game: SignallingGame, profile: StrategyProfile, tol: float = 0.0,
            support_tol: float = 0.0) -> Verdict:
    """Nash check with every profitable deviation listed.

    A signal (action) counts as played when its probability exceeds
    ``support_tol``; payoff comparisons allow slack ``tol``.
    Witnesses are ``("sender", type, better_signal)`` and
    ``("receiver", signal, better_action)``.
    """
    profile.check_shape(game)
    witnesses = []
    for i, t in enumerate(game.types):
        values = [sender_payoff(game, i, j, profile.pi2[j]) for j in range(game.n_signals)]
        best = max(values)
        best_j = values.index(best)
        for j in range(game.n_signals):
            if profile.pi1[i][j] > support_tol and best - values[j] > tol:
                witnesses.append(("sender", t, game.signals[best_j]))
                break
    for j, s in enumerate(game.signals):
        post = bayes_posterior(game, profile, j)
        if post is OFF_PATH:
            continue
        values = [receiver_payoff(game, post, j, k) for k in range(game.n_actions)]
        best = max(values)
        best_k = values.index(best)
        for k in range(game.n_actions):
            if profile.pi2[j][k] > support_tol and best - values[k] > tol:
                witnesses.append(("receiver", s, game.actions[best_k]))
                break
    return Verdict(not witnesses, witnesses)


def is_pbe_hetero(game: SignallingGame, profile: StrategyProfile, tol: float = 0.0,
                  support_tol: float = 0.0) -> Verdict:
    """Nash plus: every off-path action in use is a best response to *some* belief."""
    from .refinement import BeliefConstraintSet, br_membership

    verdict = is_nash(game, profile, tol, support_tol)
    full = BeliefConstraintSet()
    for j, s in enumerate(game.signals):
        if bayes_posterior(game, profile, j) is not OFF_PATH:
            continue
        for k, a in enumerate(game.actions):
            if profile.pi2[j][k] > support_tol and not br_membership(game, full, j, k):
                verdict.witnesses.append(("off-path", s, a))
    verdict.passed = not verdict.witnesses
    return verdict


def l1_distance(a: StrategyProfile, b: StrategyProfile) -> float:
    """Sum of absolute differences over both players' behaviour strategies."""
    if (len(a.pi1) != len(b.pi1) or len(a.pi2) != len(b.pi2)
            or any(len(x) != len(y) for x, y in zip(a.pi1, b.pi1))
            or any(len(x) != len(y) for x, y in zip(a.pi2, b.pi2))):
        raise ValueError("profiles have different shapes")
    total = 0
    for x, y in zip(a.pi1 + a.pi2, b.pi1 + b.pi2):
        total = total + sum(abs(u - v) for u, v in zip(x, y))
    return total
