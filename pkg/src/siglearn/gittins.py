"""Dirichlet bandit arms, Gittins indices by retirement calibration, and the sender's index policy."""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .game import SignallingGame, as_fraction

TIE_EPS = 1e-9
# dense lattice budget per DP array; bounds the horizon for arms with 3+ actions
MAX_CELLS = 4_000_000
H_START = 16


@dataclass(frozen=True)
class DirichletArm:
    """Prior pseudo-counts ``alpha`` and observed response ``counts`` for one signal."""

    alpha: tuple
    counts: tuple = ()

    def __post_init__(self):
        alpha = tuple(self.alpha)
        counts = tuple(int(c) for c in self.counts) if self.counts else (0,) * len(alpha)
        if any(a <= 0 for a in alpha):
            raise ValueError(f"Dirichlet pseudo-counts must be positive, got {alpha}")
        if len(counts) != len(alpha) or any(c < 0 for c in counts):
            raise ValueError(f"counts {counts} do not match alpha {alpha}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "counts", counts)

    def posterior(self):
        return tuple(a + c for a, c in zip(self.alpha, self.counts))

    def observe(self, k: int) -> "DirichletArm":
        c = list(self.counts)
        c[k] += 1
        return DirichletArm(self.alpha, tuple(c))


@dataclass(frozen=True)
class SenderBeliefState:
    """One arm per signal, in the game's signal order, plus the effective discount factor."""

    arms: tuple
    beta: float

    def __post_init__(self):
        if not 0 <= self.beta < 1:
            raise ValueError(f"discount factor must lie in [0, 1), got {self.beta}")
        object.__setattr__(self, "arms", tuple(self.arms))

    @classmethod
    def fresh(cls, alphas, beta):
        return cls(tuple(DirichletArm(tuple(a)) for a in alphas), beta)


@dataclass
class GittinsResult:
    index: float
    error_bound: float
    horizon_used: int
    lower: float = field(default=0.0, repr=False)
    upper: float = field(default=0.0, repr=False)


def _exact(alpha):
    return all(isinstance(a, (int, Fraction)) for a in alpha)


def posterior_mean_reward(game: SignallingGame, theta, s, arm: DirichletArm):
    """Expected one-period payoff of sending ``s`` under the arm's posterior mean response."""
    row = game.u1[game.type_index(theta)][game.signal_index(s)]
    post = arm.posterior()
    if _exact(post):
        post = [as_fraction(a) for a in post]
        tot = sum(post)
        return sum(a / tot * u for a, u in zip(post, row))
    tot = float(sum(post))
    return float(sum(a / tot * float(u) for a, u in zip(post, row)))


def _worst_horizon(beta, tol):
    # beta^H <= tol * (1 - beta) for rewards scaled to [0, 1]
    return max(1, math.ceil(math.log(tol * (1.0 - beta)) / math.log(beta)))


def _horizon_cap(n_actions):
    if n_actions <= 2:
        return 1 << 30
    return max(4, int(MAX_CELLS ** (1.0 / (n_actions - 1))) - 2)


def _level_horizon(k, cap):
    return min(H_START << k, cap)


def _max_level(beta, tol, n_actions):
    cap = _horizon_cap(n_actions)
    target = min(_worst_horizon(beta, tol), cap)
    k = 0
    while _level_horizon(k, cap) < target:
        k += 1
    return k


class _IndexCache:
    """Calibration brackets per (scaled rewards, posterior pseudo-counts, beta).

    Brackets are computed on a fixed doubling schedule of horizons, each
    level warm-started from the previous one, so a bracket at a given
    level never depends on the order in which callers asked.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._data: dict = {}
        self.calibrations = 0

    def clear(self):
        with self._lock:
            self._data.clear()
            self.calibrations = 0

    def __len__(self):
        return len(self._data)

    def level(self, r, alpha, beta, k):
        """Bracket ``(lo, hi, H)`` at schedule level ``k``."""
        key = (r, alpha, beta)
        with self._lock:
            levels = self._data.get(key, ())
        if len(levels) > k:
            return levels[k]
        cap = _horizon_cap(len(alpha))
        a = np.array(alpha, dtype=float)
        rr = np.array(r, dtype=float)
        new = list(levels)
        lo, hi = (new[-1][0], new[-1][1]) if new else (0.0, 1.0)
        while len(new) <= k:
            H = _level_horizon(len(new), cap)
            if new and new[-1][2] == H:
                new.append(new[-1])
                continue
            lo_h = _kernels.calibrate(a, rr, beta, H, False, lo)[0]
            hi_h = _kernels.calibrate(a, rr, beta, H, True, lo)[1]
            self.calibrations += 2
            lo, hi = max(lo, lo_h), min(hi, hi_h)
            new.append((lo, hi, H))
        with self._lock:
            if len(self._data.get(key, ())) < len(new):
                self._data[key] = tuple(new)
        return new[k]

    def bracket(self, r, alpha, beta, tol):
        kmax = _max_level(beta, tol, len(alpha))
        k = 0
        while True:
            lo, hi, H = self.level(r, alpha, beta, k)
            if hi - lo <= 2 * tol or k >= kmax:
                return lo, hi, H
            k += 1


INDEX_CACHE = _IndexCache()


def index_bounds(rewards: Sequence[float], alpha_post: Sequence[float], beta: float, tol: float = 1e-6):
    """Certified bracket ``(lower, upper, horizon)`` for the Gittins index of one arm.

    ``rewards`` are the payoffs of each response, ``alpha_post`` the posterior
    Dirichlet pseudo-counts. The index is affine-equivariant, so the DP runs
    on rewards rescaled to [0, 1].
    """
    if not 0 <= beta < 1:
        raise ValueError(f"discount factor must lie in [0, 1), got {beta}")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    r = [float(x) for x in rewards]
    a = [float(x) for x in alpha_post]
    rmin, rmax = min(r), max(r)
    span = rmax - rmin
    tot = sum(a)
    rho = sum(ai / tot * ri for ai, ri in zip(a, r))
    if span == 0:
        return rmin, rmin, 0
    if beta == 0:
        return rho, rho, 0
    scaled = tuple((x - rmin) / span for x in r)
    lo, hi, H = INDEX_CACHE.bracket(scaled, tuple(a), float(beta), tol / span)
    lo = max(rmin + span * lo, rho, rmin)
    hi = min(rmin + span * hi, rmax)
    return lo, max(lo, hi), H


def _scaled(rewards, alpha_post):
    r = [float(x) for x in rewards]
    a = tuple(float(x) for x in alpha_post)
    rmin, rmax = min(r), max(r)
    span = rmax - rmin
    tot = sum(a)
    rho = sum(ai / tot * ri for ai, ri in zip(a, r))
    scaled = tuple((x - rmin) / span for x in r) if span > 0 else None
    return scaled, a, rmin, rmax, span, rho


def level_bounds(rewards, alpha_post, beta, k):
    """Bracket of the index at schedule level ``k`` (horizon 16 * 2**k, capped)."""
    scaled, a, rmin, rmax, span, rho = _scaled(rewards, alpha_post)
    if scaled is None:
        return rmin, rmin, 0
    if beta == 0:
        return rho, rho, 0
    lo, hi, H = INDEX_CACHE.level(scaled, a, float(beta), k)
    lo = max(rmin + span * lo, rho)
    hi = min(rmin + span * hi, rmax)
    return lo, max(lo, hi), H


def gittins_index(game: SignallingGame, theta, s, arm: DirichletArm, beta: float, tol: float = 1e-6) -> GittinsResult:
    """Gittins index of signal ``s`` for type ``theta`` given the arm's beliefs (per-period units)."""
    if not 0 <= beta < 1:
        raise ValueError(f"discount factor must lie in [0, 1), got {beta}")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    row = game.u1[game.type_index(theta)][game.signal_index(s)]
    if beta == 0 or len(set(row)) == 1:
        v = posterior_mean_reward(game, theta, s, arm)
        return GittinsResult(v, 0.0, 0, v, v)
    lo, hi, H = index_bounds(row, arm.posterior(), beta, tol)
    return GittinsResult(0.5 * (lo + hi), 0.5 * (hi - lo), H, lo, hi)


class IndexPolicy:
    """Index policy of one sender type, on per-signal count matrices.

    ``alpha`` is the prior pseudo-count matrix (signal x action). Decisions
    are certified: the chosen signal's index bracket lies strictly above
    every other bracket, unless brackets of width at most ``tie_eps``
    overlap, in which case the tie goes to the earliest signal (``tie="lex"``)
    or to the signal currently in use when it is among the tied ones
    (``tie="stay"``).
    """

    def __init__(self, game: SignallingGame, theta, alpha, beta: float, tie: str = "lex",
                 tie_eps: float = TIE_EPS):
        if tie not in ("lex", "stay"):
            raise ValueError("tie rule must be 'lex' or 'stay'")
        if not 0 <= beta < 1:
            raise ValueError(f"discount factor must lie in [0, 1), got {beta}")
        self.game = game
        self.i = game.type_index(theta)
        self.rows = game.u1[self.i]
        self.rows_f = game.u1_array[self.i]
        self.alpha = [tuple(a) for a in alpha]
        if len(self.alpha) != game.n_signals or any(len(a) != game.n_actions for a in self.alpha):
            raise ValueError("sender prior must give one pseudo-count vector per signal")
        if any(x <= 0 for a in self.alpha for x in a):
            raise ValueError("sender prior pseudo-counts must be positive")
        self.exact = beta == 0 and all(_exact(a) for a in self.alpha)
        self.beta = float(beta)
        self.tie = tie
        self.tie_eps = tie_eps
        self.unresolved = 0
        self._memo: dict = {}
        self._arm_memo: dict = {}
        self._rows_t = [tuple(float(x) for x in row) for row in self.rows_f]
        span = max(float(np.ptp(row)) for row in self.rows_f) or 1.0
        self._kmax = max(_max_level(self.beta, 0.25 * tie_eps / span, game.n_actions), 0) if beta > 0 else 0

    def _post(self, j, counts):
        return tuple(a + c for a, c in zip(self.alpha[j], counts[j]))

    def _myopic(self, counts):
        vals = []
        for j in range(self.game.n_signals):
            v = self._arm_memo.get((j, counts[j]))
            if v is None:
                post = [as_fraction(x) for x in self._post(j, counts)]
                v = sum(p * u for p, u in zip(post, self.rows[j])) / sum(post)
                self._arm_memo[j, counts[j]] = v
            vals.append(v)
        best = max(vals)
        return [j for j, v in enumerate(vals) if v == best], vals

    def brackets(self, counts, tol):
        return [index_bounds(self.rows_f[j], self._post(j, counts), self.beta, tol)[:2]
                for j in range(self.game.n_signals)]

    def decide(self, counts, current=None):
        """Return ``(signal, upper bound on every other signal's index, lower bound on the chosen one)``."""
        hit = self._memo.get(counts) if isinstance(counts, tuple) else None
        if hit is None:
            key = tuple(tuple(int(x) for x in row) for row in counts)
            hit = self._memo.get(key)
        if hit is None:
            hit = self._decide(key)
            self._memo[key] = hit
        tied, others_hi, own_lo = hit
        if len(tied) == 1:
            j = tied[0]
        else:
            j = current if (self.tie == "stay" and current in tied) else tied[0]
        return j, others_hi[j], own_lo.get(j, -math.inf)

    def __call__(self, counts, current=None) -> int:
        return self.decide(counts, current)[0]

    def _decide(self, counts):
        S = self.game.n_signals
        if S == 1:
            return (0,), {0: -math.inf}, {}
        if self.exact or self.beta == 0:
            tied, vals = self._myopic(counts)
            vals = [float(v) for v in vals]
            others = {j: max(v for jj, v in enumerate(vals) if jj != j) for j in range(S)}
            return tuple(tied), others, {j: vals[j] for j in tied}
        keys = [(self._rows_t[j], self._post(j, counts)) for j in range(S)]
        kmax = self._kmax
        live = list(range(S))
        br = {}
        k = 0
        memo = self._arm_memo
        while True:
            for j in live:
                b = memo.get((keys[j], k))
                if b is None:
                    b = memo[keys[j], k] = level_bounds(keys[j][0], keys[j][1], self.beta, k)[:2]
                br[j] = b
            best_lo = max(br[j][0] for j in live)
            live = [j for j in live if br[j][1] >= best_lo]
            if len(live) == 1 or len({keys[j] for j in live}) == 1:
                break
            if all(br[j][1] - br[j][0] <= self.tie_eps for j in live):
                break
            if k >= kmax:
                self.unresolved += 1
                break
            k += 1
        others_hi = {j: max(br[jj][1] for jj in range(S) if jj != j) for j in range(S)}
        own_lo = {j: br[j][0] for j in live}
        return tuple(sorted(live)), others_hi, own_lo


def sender_policy(game: SignallingGame, theta, state: SenderBeliefState, tie: str = "lex", current=None):
    """Signal with the highest Gittins index for ``theta`` in ``state`` (returned by name)."""
    alpha = [arm.alpha for arm in state.arms]
    counts = [arm.counts for arm in state.arms]
    pol = IndexPolicy(game, theta, alpha, state.beta, tie=tie)
    cur = None if current is None else game.signal_index(current)
    return game.signals[pol(counts, cur)]


# -- induced mixed actions -------------------------------------------------

@dataclass
class StoppingRule:
    """``stop(history)`` says whether to stop after the responses in ``history``.

    The first pull always happens; play stops for sure after ``depth`` pulls.
    """

    stop: Callable[[tuple], bool]
    depth: int

    @classmethod
    def after_first(cls, action: int, depth: int):
        return cls(lambda h: h[-1] == action, depth)

    @classmethod
    def fixed(cls, n: int):
        return cls(lambda h: len(h) >= n, n)


def _stopped_play(nu, tau: StoppingRule):
    """Per-period probabilities that pull t happens and yields each action, plus stopped payoff weights."""
    n_act = len(nu[0][1])
    # occupancy[t][i] = P(pull t happens and yields action i)
    occ = np.zeros((tau.depth, n_act))

    def walk(q, hist, prob, t):
        for i in range(n_act):
            pi = prob * q[i]
            if pi == 0:
                continue
            occ[t, i] += pi
            h = hist + (i,)
            if t + 1 < tau.depth and not tau.stop(h):
                walk(q, h, pi, t + 1)

    for w, q in nu:
        if w > 0:
            walk(list(q), (), w, 0)
    return occ


def induced_mixed_action(nu_s, tau: StoppingRule, beta: float) -> np.ndarray:
    """Discounted distribution of responses met before stopping.

    ``nu_s`` is a list of (weight, action mixture) pairs: a finite-support
    belief about the response mixture after the signal.
    """
    if tau.depth < 1:
        raise ValueError("stopping rule must allow at least one pull")
    if not nu_s:
        raise ValueError("belief must have non-empty support")
    tot = sum(w for w, _ in nu_s)
    nu = [(w / tot, q) for w, q in nu_s]
    occ = _stopped_play(nu, tau)
    disc = beta ** np.arange(tau.depth)
    num = disc @ occ
    return num / num.sum()


def stopped_payoff(nu_s, tau: StoppingRule, beta: float, rewards) -> float:
    """E[sum of discounted rewards before stopping] / E[sum of discounts before stopping]."""
    tot = sum(w for w, _ in nu_s)
    occ = _stopped_play([(w / tot, q) for w, q in nu_s], tau)
    disc = beta ** np.arange(tau.depth)
    return float(disc @ occ @ np.asarray(rewards, float) / (disc @ occ.sum(axis=1)))


# -- index ordering property ----------------------------------------------

@dataclass
class IndexTheoremReport:
    checked: int = 0
    premise_held: int = 0
    violations: list = field(default_factory=list)
    undecided: int = 0

    @property
    def ok(self):
        return not self.violations


def _random_state(game, rng):
    arms = []
    for _ in range(game.n_signals):
        alpha = tuple(float(x) for x in np.round(rng.uniform(0.2, 5.0, game.n_actions), 3))
        counts = tuple(int(x) for x in rng.integers(0, 12, game.n_actions))
        arms.append(DirichletArm(alpha, counts))
    return arms


def index_theorem_check(game: SignallingGame, hi, lo, s, samples: int = 500,
                        beta_grid=(0.0, 0.5, 0.9, 0.99), tol: float = 1e-7, seed: int = 0) -> IndexTheoremReport:
    """Sample shared beliefs and test: if ``s`` has the top index for ``lo``, it has the strictly top index for ``hi``.

    A violation is recorded only when the brackets certify it. Cases the
    brackets cannot settle at ``tol`` are counted as undecided.
    """
    rng = np.random.default_rng(seed)
    j = game.signal_index(s)
    ih, il = game.type_index(hi), game.type_index(lo)
    rep = IndexTheoremReport()
    others = [jj for jj in range(game.n_signals) if jj != j]
    if not others:
        return rep
    for _ in range(samples):
        arms = _random_state(game, rng)
        for beta in beta_grid:
            rep.checked += 1
            t = 1e-4
            while True:
                b_lo = [index_bounds(game.u1_array[il][k], arms[k].posterior(), beta, t) for k in range(game.n_signals)]
                b_hi = [index_bounds(game.u1_array[ih][k], arms[k].posterior(), beta, t) for k in range(game.n_signals)]
                lo_other_hi = max(b_lo[k][1] for k in others)
                lo_other_lo = max(b_lo[k][0] for k in others)
                hi_other_hi = max(b_hi[k][1] for k in others)
                hi_other_lo = max(b_hi[k][0] for k in others)
                premise_sure = b_lo[j][0] >= lo_other_hi
                premise_possible = b_lo[j][1] >= lo_other_lo
                concl_sure = b_hi[j][0] > hi_other_hi
                concl_fails = b_hi[j][1] <= hi_other_lo
                if not premise_possible or concl_sure:
                    if premise_possible:
                        rep.premise_held += 1
                    break
                if premise_sure and concl_fails:
                    rep.violations.append((beta, tuple(arms)))
                    rep.premise_held += 1
                    break
                if t <= tol:
                    rep.undecided += 1
                    break
                t = max(t * 1e-2, tol)
    return rep
