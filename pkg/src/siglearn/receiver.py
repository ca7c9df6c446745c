"""Receiver passive learning: posterior over types, best responses, and the aggregate receiver response."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .game import Belief, SignallingGame
from .refinement import BeliefConstraintSet, br_membership

# relative slack when comparing float payoffs so exact ties break by action order
TIE_REL = 1e-12
MAX_ENUM_STATES = 2_000_000


def _alpha(game, prior):
    a = np.array([[float(x) for x in row] for row in prior], dtype=float)
    if a.shape != (game.n_types, game.n_signals):
        raise ValueError("receiver prior must give one pseudo-count vector per type")
    if (a <= 0).any():
        raise ValueError("receiver prior pseudo-counts must be positive")
    return a


def _pi1(game, pi1):
    rows = pi1.pi1 if hasattr(pi1, "pi1") else pi1
    arr = np.array([[float(x) for x in row] for row in rows])
    if arr.shape != (game.n_types, game.n_signals):
        raise ValueError("sender strategy shape does not match the game")
    return arr


def posterior_matrix(lam, alpha, counts):
    """Posterior type probabilities after every signal; counts broadcast over leading axes.

    Returns an array (..., types, signals) whose columns sum to one.
    """
    post_play = (alpha + counts) / (alpha.sum(axis=-1, keepdims=True) + counts.sum(axis=-1, keepdims=True))
    w = lam[:, None] * post_play
    return w / w.sum(axis=-2, keepdims=True)


def best_actions(u2, post):
    """Lexicographically first best response per signal for beliefs ``post`` (..., types, signals)."""
    vals = np.einsum("...ts,tsa->...sa", post, u2)
    top = vals.max(axis=-1, keepdims=True)
    scale = np.abs(u2).max() or 1.0
    return np.argmax(vals >= top - TIE_REL * scale, axis=-1)


def receiver_posterior_belief(game: SignallingGame, prior, counts, s) -> Belief:
    j = game.signal_index(s)
    m = np.array(counts, dtype=float)
    if m.shape != (game.n_types, game.n_signals) or (m < 0).any():
        raise ValueError("counts must be a non-negative type x signal matrix")
    post = posterior_matrix(game.prior_array, _alpha(game, prior), m)
    col = post[:, j]
    return Belief(tuple(float(x) for x in col / col.sum()))


def receiver_policy(game: SignallingGame, prior, counts) -> dict:
    """Best response to the posterior after each signal, as signal name -> action name."""
    m = np.array(counts, dtype=float)
    post = posterior_matrix(game.prior_array, _alpha(game, prior), m)
    acts = best_actions(game.u2_array, post)
    return {s: game.actions[int(acts[j])] for j, s in enumerate(game.signals)}


def constant_response(game: SignallingGame, s):
    """Action chosen after ``s`` by every receiver, if that does not depend on beliefs.

    Posteriors always have full support, so the response is constant exactly
    when some action is weakly optimal against every type; the first such
    action is then chosen at every belief.
    """
    j = game.signal_index(s)
    u = game.u2
    for k in range(game.n_actions):
        if all(u[i][j][k] >= max(u[i][j]) for i in range(game.n_types)):
            return k
    return None


@dataclass
class ARRResult:
    pi2: np.ndarray
    std_err: np.ndarray | None = None
    tail: float = 0.0
    n_lifetimes: int = 0


def arr_monte_carlo(game: SignallingGame, pi1, prior, gamma: float, n_lifetimes: int = 10_000,
                    seed: int = 0) -> ARRResult:
    """Share of the receiver population choosing each action after each signal.

    Receivers are drawn from the stationary age distribution (geometric
    with survival ``gamma``); a receiver of age t has seen t independent
    (type, signal) pairs, so its counts are multinomial. This is the
    lifetime-weighted average of per-period play.
    """
    if not 0 <= gamma < 1:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    if n_lifetimes < 1:
        raise ValueError("need at least one lifetime")
    P1 = _pi1(game, pi1)
    alpha = _alpha(game, prior)
    lam = game.prior_array
    rng = np.random.default_rng(seed)
    ages = np.zeros(n_lifetimes, dtype=np.int64) if gamma == 0 else rng.geometric(1 - gamma, n_lifetimes) - 1
    cell = (lam[:, None] * P1).ravel()
    cell = cell / cell.sum()
    counts = rng.multinomial(ages, cell).reshape(n_lifetimes, game.n_types, game.n_signals)
    post = posterior_matrix(lam, alpha, counts.astype(float))
    acts = best_actions(game.u2_array, post)
    pi2 = np.zeros((game.n_signals, game.n_actions))
    for j in range(game.n_signals):
        pi2[j] = np.bincount(acts[:, j], minlength=game.n_actions) / n_lifetimes
    se = np.sqrt(pi2 * (1 - pi2) / max(n_lifetimes - 1, 1))
    return ARRResult(pi2, se, 0.0, n_lifetimes)


def _compositions(total, parts):
    """All ways to write ``total`` as ``parts`` non-negative integers, one per row."""
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    bars = np.array(list(combinations(range(total + parts - 1), parts - 1)), dtype=np.int64)
    if bars.size == 0:
        return np.zeros((1, parts), dtype=np.int64)
    edges = np.concatenate([np.full((len(bars), 1), -1), bars,
                            np.full((len(bars), 1), total + parts - 1)], axis=1)
    return np.diff(edges, axis=1) - 1


def _log_multinomial(comps, logp, t):
    return math.lgamma(t + 1) - np.sum([np.vectorize(math.lgamma)(comps[:, k] + 1) for k in range(comps.shape[1])],
                                       axis=0) + comps @ logp


def arr_exact_small(game: SignallingGame, pi1, prior, gamma: float, t_max: int) -> ARRResult:
    """Receiver population play by enumerating every count matrix for ages up to ``t_max``.

    The returned strategy is the mixture over those ages renormalised;
    ``tail`` = gamma^(t_max+1) is the weight of older receivers and bounds
    the error of every entry. Signals whose response does not depend on
    beliefs are filled in directly (their entries are exact).
    """
    if not 0 <= gamma < 1:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    P1 = _pi1(game, pi1)
    alpha = _alpha(game, prior)
    lam = game.prior_array
    const = [constant_response(game, j) for j in range(game.n_signals)]
    pi2 = np.zeros((game.n_signals, game.n_actions))
    for j, k in enumerate(const):
        if k is not None:
            pi2[j, k] = 1.0
    if all(k is not None for k in const):
        return ARRResult(pi2, None, 0.0)
    cell = (lam[:, None] * P1).ravel()
    cell = cell / cell.sum()
    live = np.flatnonzero(cell > 0)
    K = len(live)
    n_states = sum(math.comb(t + K - 1, K - 1) for t in range(t_max + 1))
    if n_states > MAX_ENUM_STATES:
        raise ValueError(f"exact receiver enumeration needs {n_states} count matrices "
                         f"(cap {MAX_ENUM_STATES}); lower t_max or use Monte Carlo")
    logp = np.log(cell[live])
    acc = np.zeros((game.n_signals, game.n_actions))
    w = 1.0 - gamma
    for t in range(t_max + 1):
        comps = _compositions(t, K)
        pmf = np.exp(_log_multinomial(comps, logp, t))
        full = np.zeros((len(comps), game.n_types * game.n_signals))
        full[:, live] = comps
        post = posterior_matrix(lam, alpha, full.reshape(-1, game.n_types, game.n_signals))
        acts = best_actions(game.u2_array, post)
        for j in range(game.n_signals):
            if const[j] is None:
                acc[j] += w * np.bincount(acts[:, j], weights=pmf, minlength=game.n_actions)
        w *= gamma
    tail = gamma ** (t_max + 1)
    for j in range(game.n_signals):
        if const[j] is None:
            pi2[j] = acc[j] / acc[j].sum()
    return ARRResult(pi2, None, tail)


@dataclass
class ReceiverLearningReport:
    vacuous: bool
    fraction: float = float("nan")
    std_err: float = float("nan")
    threshold: float = float("nan")
    meets_bound: bool | None = None
    calibrated_c: float = float("nan")
    hypothesis_holds: bool | None = None
    supported_actions: list = field(default_factory=list)


def receiver_learning_check(game: SignallingGame, pi1, prior, gamma: float, hi, lo, s, n: float,
                            eps: float = 0.05, n_samples: int = 20_000, seed: int = 0,
                            coverage: float = 0.95) -> ReceiverLearningReport:
    """How often receivers after ``s`` play a best response to beliefs respecting the prior odds of ``hi`` over ``lo``.

    Also calibrates, by simulation, the number of expected observations of
    (``hi``, ``s``) after which the posterior odds condition holds for
    ``coverage`` of receivers, and checks whether ``pi1`` meets the implied
    experimentation rate. The calibration is empirical, not a proven constant.
    """
    P1 = _pi1(game, pi1)
    ih, il, j = game.type_index(hi), game.type_index(lo), game.signal_index(s)
    if P1[ih, j] < P1[il, j]:
        raise ValueError("precondition violated: the more compatible type must send the signal at least as often")
    if P1[ih, j] == 0:
        return ReceiverLearningReport(vacuous=True)
    P = BeliefConstraintSet(((game.types[ih], game.types[il]),))
    ok_actions = [k for k in range(game.n_actions) if br_membership(game, P, j, k)]
    rng = np.random.default_rng(seed)
    alpha = _alpha(game, prior)
    lam = game.prior_array
    ages = np.zeros(n_samples, dtype=np.int64) if gamma == 0 else rng.geometric(1 - gamma, n_samples) - 1
    cell = (lam[:, None] * P1).ravel()
    counts = rng.multinomial(ages, cell / cell.sum()).reshape(n_samples, game.n_types, game.n_signals)
    post = posterior_matrix(lam, alpha, counts.astype(float))
    acts = best_actions(game.u2_array, post)[:, j]
    frac = float(np.isin(acts, ok_actions).mean())
    se = math.sqrt(max(frac * (1 - frac), 1e-300) / n_samples)
    thr = 1 - 1 / n - eps

    # smallest age (on a doubling grid) at which the odds condition holds for `coverage` of receivers
    def odds_ok(age, m=2000):
        c = rng.multinomial(np.full(m, age), cell / cell.sum()).reshape(m, game.n_types, game.n_signals)
        pm = posterior_matrix(lam, alpha, c.astype(float))[:, :, j]
        return float(np.mean(pm[:, il] * lam[ih] <= lam[il] * pm[:, ih] + 1e-15))

    age = 1
    calibrated = float("nan")
    while age <= 1 << 22:
        if odds_ok(age) >= coverage:
            calibrated = age * P1[ih, j]
            break
        age *= 2
    hyp = None if math.isnan(calibrated) else bool(P1[ih, j] >= (1 - gamma) * n * calibrated)
    return ReceiverLearningReport(False, frac, se, thr, frac >= thr, calibrated, hyp,
                                  [game.actions[k] for k in ok_actions])
