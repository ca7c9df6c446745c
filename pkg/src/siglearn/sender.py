"""Aggregate sender response: exact occupancy enumeration, Monte Carlo lifetimes, and path coupling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .compat import is_more_compatible
from .game import SignallingGame
from .gittins import IndexPolicy


def _check_discount(delta, gamma):
    if not 0 <= delta < 1:
        raise ValueError(f"delta must lie in [0, 1), got {delta}")
    if not 0 <= gamma < 1:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")


def _pi2_rows(game, pi2):
    rows = pi2.pi2 if hasattr(pi2, "pi2") else pi2
    arr = np.array([[float(x) for x in row] for row in rows])
    if arr.shape != (game.n_signals, game.n_actions):
        raise ValueError("receiver strategy shape does not match the game")
    return arr


@dataclass
class OccupancyDistribution:
    """Lifetime-weighted mass on (age, per-signal response counts) states.

    Counts are pooled over responses with equal payoffs (constant-payoff
    signals keep zero counts), which loses nothing the policy uses.
    """

    atoms: dict
    truncation_mass: float
    horizon: int

    def total(self):
        return math.fsum(self.atoms.values()) + self.truncation_mass


@dataclass
class ASRResult:
    probs: np.ndarray
    error_bound: float = 0.0
    std_err: np.ndarray | None = None
    occupancy: OccupancyDistribution | None = None
    n_lifetimes: int = 0
    unresolved_ties: int = 0


def reward_classes(rows):
    """Per signal, the index of the first action paying the same as each action (None for constant arms).

    Dirichlet beliefs aggregate over actions with equal payoffs, so counts
    can be pooled on a class representative without changing any index, and
    the counts of a constant-payoff arm never matter.
    """
    out = []
    for row in rows:
        rep = [next(b for b in range(len(row)) if row[b] == row[a]) for a in range(len(row))]
        out.append(None if len(set(rep)) == 1 else tuple(rep))
    return out


def asr_exact(game: SignallingGame, theta, pi2, prior, delta: float, gamma: float,
              prune_eps: float = 0.0, tol: float = 1e-10, tie: str = "lex",
              keep_occupancy: bool = False, policy: IndexPolicy | None = None) -> ASRResult:
    """Lifetime signal distribution of one type by breadth-first expansion of the count chain.

    Periods beyond T with gamma^T <= tol and branches whose probability
    falls below ``prune_eps`` are dropped; their weight is the error bound.
    """
    _check_discount(delta, gamma)
    P = _pi2_rows(game, pi2)
    pol = policy or IndexPolicy(game, theta, prior, delta * gamma, tie=tie)
    S, A = game.n_signals, game.n_actions
    classes = reward_classes(game.u1[game.type_index(theta)])
    T = 1 if gamma == 0 else max(1, math.ceil(math.log(tol) / math.log(gamma)))
    zero = tuple((0,) * A for _ in range(S))
    frontier = {(zero, None): 1.0}
    out = np.zeros(S)
    atoms: dict = {}
    pruned = 0.0
    w = 1.0 - gamma
    for t in range(T):
        nxt: dict = {}
        for (counts, last), mass in frontier.items():
            j = pol(counts, last)
            out[j] += w * mass
            if keep_occupancy:
                atoms[t, counts] = atoms.get((t, counts), 0.0) + w * mass
            if t == T - 1:
                continue
            row = counts[j]
            rep = classes[j]
            for a in range(A):
                q = P[j, a]
                if q == 0:
                    continue
                m = mass * q
                if rep is None:
                    new = counts
                else:
                    b = rep[a]
                    new = counts[:j] + (row[:b] + (row[b] + 1,) + row[b + 1:],) + counts[j + 1:]
                key = (new, j if tie == "stay" else None)
                nxt[key] = nxt.get(key, 0.0) + m
        w *= gamma
        if prune_eps > 0:
            keep = {}
            tail = w / (1.0 - gamma)  # weight of every period from t + 1 on
            for k, m in nxt.items():
                if m < prune_eps:
                    pruned += m * tail
                else:
                    keep[k] = m
            nxt = keep
        frontier = nxt
    trunc = gamma ** T
    occ = None
    if keep_occupancy:
        occ = OccupancyDistribution(atoms, trunc + pruned, T)
    return ASRResult(out, trunc + pruned, occupancy=occ, unresolved_ties=pol.unresolved)


def _lifetime(pol: IndexPolicy, cum_p, rng, length, rows_f, alpha):
    """Simulate one lifetime of ``length`` periods; return per-signal play counts.

    After each decision the chosen signal keeps being played, without
    consulting the index again, for as long as a lower bound on its index
    exceeds the upper bracket of every other signal (those brackets do not
    move while they are not played). When even the worst reward the
    responses can produce beats every rival bracket, the rest of the
    lifetime goes to the chosen signal at once. The lower bound is the posterior mean,
    and for two-response arms also the decided bracket while only the
    better response has been seen (the index rises with such observations).
    """
    S, A = cum_p.shape
    counts = np.zeros((S, A), dtype=np.int64)
    played = np.zeros(S, dtype=np.int64)
    best = np.argmax(rows_f, axis=1)
    lowest = np.where(cum_p > np.concatenate([np.zeros((S, 1)), cum_p[:, :-1]], axis=1), rows_f, np.inf).min(axis=1)
    t = 0
    last = None
    while t < length:
        j, others_hi, own_lo = pol.decide(counts, last)
        last = j
        post = alpha[j] + counts[j]
        if post @ rows_f[j] / post.sum() > others_hi and lowest[j] > others_hi:
            # the mean stays a mix of its current value and rewards above every rival bracket
            played[j] += length - t
            break
        block = 64
        clean = A == 2
        while True:
            k = min(block, length - t)
            draws = np.minimum(np.searchsorted(cum_p[j], rng.random(k), side="right"), A - 1)
            if others_hi == -math.inf:
                n_used, certified = k, True
            else:
                onehot = np.zeros((k, A))
                onehot[np.arange(k), draws] = 1.0
                cum = np.cumsum(onehot, axis=0) + (alpha[j] + counts[j])
                lower = cum @ rows_f[j] / cum.sum(axis=1)
                if clean:
                    good = np.cumprod(draws == best[j]).astype(bool)
                    lower = np.where(good, np.maximum(lower, own_lo), lower)
                ok = lower > others_hi
                certified = bool(ok.all())
                n_used = k if certified else int(np.argmin(ok)) + 1
                if clean and not good.all():
                    clean = False
            counts[j] += np.bincount(draws[:n_used], minlength=A)
            played[j] += n_used
            t += n_used
            if not certified or t >= length:
                break
            post = alpha[j] + counts[j]
            if post @ rows_f[j] / post.sum() > others_hi and lowest[j] > others_hi:
                played[j] += length - t
                t = length
                break
            block = min(2 * block, 1 << 16)
    return played


def asr_monte_carlo(game: SignallingGame, theta, pi2, prior, delta: float, gamma: float,
                    n_lifetimes: int = 10_000, seed: int = 0, tie: str = "lex",
                    policy: IndexPolicy | None = None) -> ASRResult:
    """Lifetime signal frequencies from simulated geometric lifetimes (ratio estimator).

    Standard errors use the delta method for the ratio of total plays to total periods.
    """
    _check_discount(delta, gamma)
    if n_lifetimes < 1:
        raise ValueError("need at least one lifetime")
    P = _pi2_rows(game, pi2)
    cum_p = np.cumsum(P, axis=1)
    pol = policy or IndexPolicy(game, theta, prior, delta * gamma, tie=tie)
    rng = np.random.default_rng(seed)
    lengths = np.ones(n_lifetimes, dtype=np.int64) if gamma == 0 else rng.geometric(1 - gamma, n_lifetimes)
    rows_f = pol.rows_f
    alpha = np.array(pol.alpha, dtype=float)
    plays = np.zeros((n_lifetimes, game.n_signals))
    for i in range(n_lifetimes):
        plays[i] = _lifetime(pol, cum_p, rng, int(lengths[i]), rows_f, alpha)
    tot = lengths.sum()
    probs = plays.sum(axis=0) / tot
    ybar = lengths.mean()
    if n_lifetimes > 1:
        resid = plays - np.outer(lengths, probs)
        se = np.sqrt((resid ** 2).sum(axis=0) / (n_lifetimes * (n_lifetimes - 1))) / ybar
    else:
        se = np.full(game.n_signals, np.inf)
    return ASRResult(probs, 0.0, std_err=se, n_lifetimes=n_lifetimes, unresolved_ties=pol.unresolved)


# -- pre-programmed response paths ----------------------------------------

class PreProgrammedPath:
    """Fixed per-signal sequences of receiver responses.

    The j-th response to signal s is ``prefix[s][j]`` when given, otherwise
    drawn from ``pi2[s]`` by a generator seeded with (seed, s), so any entry
    is reproducible regardless of query order.
    """

    def __init__(self, n_signals: int, n_actions: int, seed: int = 0, pi2=None, prefix=None):
        self.n_signals = n_signals
        self.n_actions = n_actions
        self.seed = seed
        if pi2 is None:
            pi2 = np.full((n_signals, n_actions), 1.0 / n_actions)
        self.pi2 = np.array([[float(x) for x in row] for row in (pi2.pi2 if hasattr(pi2, "pi2") else pi2)])
        self._seq = [list(prefix[s]) if prefix and s < len(prefix) else [] for s in range(n_signals)]
        self._n_prefix = [len(x) for x in self._seq]
        self._rng = [None] * n_signals

    def action(self, s: int, j: int) -> int:
        seq = self._seq[s]
        while len(seq) <= j:
            if self._rng[s] is None:
                self._rng[s] = np.random.default_rng([self.seed, s])
            draws = self._rng[s].choice(self.n_actions, size=64, p=self.pi2[s])
            seq.extend(int(x) for x in draws)
        return seq[j]


@dataclass
class History:
    signals: list
    actions: list

    def __len__(self):
        return len(self.signals)

    def count(self, s, t=None) -> int:
        """How many times signal ``s`` was sent in the first ``t`` periods."""
        t = len(self.signals) if t is None else t
        return sum(1 for x in self.signals[:t] if x == s)

    def send_times(self, s) -> list:
        """Periods (0-based) at which ``s`` was sent for the 1st, 2nd, ... time."""
        return [t for t, x in enumerate(self.signals) if x == s]


def simulate_preprogrammed(game: SignallingGame, theta, path: PreProgrammedPath, prior, beta: float,
                           horizon: int, tie: str = "lex", policy: IndexPolicy | None = None) -> History:
    """Deterministic history of a type facing the pre-programmed responses in ``path``."""
    pol = policy or IndexPolicy(game, theta, prior, beta, tie=tie)
    counts = [[0] * game.n_actions for _ in range(game.n_signals)]
    sent = [0] * game.n_signals
    sig, act = [], []
    last = None
    for _ in range(horizon):
        j = pol(counts, last)
        a = path.action(j, sent[j])
        sent[j] += 1
        counts[j][a] += 1
        sig.append(j)
        act.append(a)
        last = j
    return History(sig, act)


@dataclass
class CouplingReport:
    precondition: bool
    paths: int = 0
    violations: list = field(default_factory=list)
    rbar_hi: list = field(default_factory=list)
    rbar_lo: list = field(default_factory=list)
    tail_bound: float = 0.0

    @property
    def ok(self):
        return not self.violations or not self.precondition

    @property
    def mean_gap(self):
        return float(np.mean(self.rbar_hi) - np.mean(self.rbar_lo)) if self.paths else 0.0


def coupling_check(game: SignallingGame, hi, lo, s, paths, horizon: int, prior, delta: float = 0.9,
                   gamma: float = 0.99, tie: str = "lex") -> CouplingReport:
    """Both types face the same response paths; the more compatible one must reach each send of ``s`` no later.

    Also compares the truncated lifetime shares of ``s`` per path and on average.
    With an unmet compatibility precondition the report is informational.
    """
    j = game.signal_index(s)
    pre = is_more_compatible(game, hi, lo, j).holds
    rep = CouplingReport(pre, tail_bound=gamma ** horizon)
    beta = delta * gamma
    pol_hi = IndexPolicy(game, hi, prior, beta, tie=tie)
    pol_lo = IndexPolicy(game, lo, prior, beta, tie=tie)
    w = (1 - gamma) * gamma ** np.arange(horizon)
    for n, path in enumerate(paths):
        h_hi = simulate_preprogrammed(game, hi, path, prior, beta, horizon, policy=pol_hi)
        h_lo = simulate_preprogrammed(game, lo, path, prior, beta, horizon, policy=pol_lo)
        t_hi, t_lo = h_hi.send_times(j), h_lo.send_times(j)
        for k, t in enumerate(t_lo):
            if k >= len(t_hi) or t_hi[k] > t:
                rep.violations.append((n, k, t_hi[k] if k < len(t_hi) else None, t))
                break
        r_hi = float(w[np.array(t_hi, dtype=int)].sum()) if t_hi else 0.0
        r_lo = float(w[np.array(t_lo, dtype=int)].sum()) if t_lo else 0.0
        if r_hi < r_lo - 1e-12:
            rep.violations.append((n, "share", r_hi, r_lo))
        rep.rbar_hi.append(r_hi)
        rep.rbar_lo.append(r_lo)
        rep.paths += 1
    return rep
