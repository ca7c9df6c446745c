"""Steady states as mutual aggregate responses, patience scans, and diagnostics on their limits."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .game import (OFF_PATH, SignallingGame, StrategyProfile, Verdict, bayes_posterior, is_nash,
                   is_pbe_hetero, l1_distance, receiver_payoff, sender_payoff)
from .game import as_fraction, equilibrium_payoff
from .gittins import IndexPolicy
from .lp import feasible_point
from .receiver import arr_exact_small, arr_monte_carlo
from .refinement import (check_compatibility_criterion, check_strong_compatibility_criterion,
                         is_on_path_strict, undominated_types)
from .sender import asr_exact, asr_monte_carlo

log = logging.getLogger(__name__)

DEFAULT_SCHEDULE = tuple((d, g) for d in (0.9, 0.99, 0.999) for g in (1 - 1e-2, 1 - 1e-3, 1 - 1e-4))


@dataclass(frozen=True)
class LearningParams:
    """Discounting, lifetimes and Dirichlet priors of both populations.

    ``sender_prior`` is a signal x action pseudo-count matrix shared by all
    sender types, ``receiver_prior`` a type x signal matrix. When
    ``prior_mixture`` is set it replaces the single pair by a weighted list
    of (weight, sender_prior, receiver_prior).
    """

    delta: float
    gamma: float
    sender_prior: tuple
    receiver_prior: tuple
    prior_mixture: tuple | None = None
    tie: str = "lex"

    def __post_init__(self):
        if not 0 <= self.delta < 1:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")
        if not 0 <= self.gamma < 1:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        object.__setattr__(self, "sender_prior", tuple(tuple(r) for r in self.sender_prior))
        object.__setattr__(self, "receiver_prior", tuple(tuple(r) for r in self.receiver_prior))
        if self.prior_mixture is not None:
            mix = tuple((w, tuple(tuple(r) for r in sp), tuple(tuple(r) for r in rp))
                        for w, sp, rp in self.prior_mixture)
            if not mix:
                raise ValueError("prior mixture is empty")
            if abs(float(sum(w for w, _, _ in mix)) - 1) > 1e-12:
                raise ValueError("prior mixture weights do not sum to 1")
            if any(w < 0 for w, _, _ in mix):
                raise ValueError("prior mixture weights must be non-negative")
            object.__setattr__(self, "prior_mixture", mix)

    @classmethod
    def uniform(cls, game: SignallingGame, delta, gamma, weight=1, tie="lex"):
        return cls(delta, gamma, ((weight,) * game.n_actions,) * game.n_signals,
                   ((weight,) * game.n_signals,) * game.n_types, tie=tie)

    @property
    def beta(self):
        return self.delta * self.gamma

    def components(self):
        if self.prior_mixture is None:
            return [(1.0, self.sender_prior, self.receiver_prior)]
        return [(float(w), sp, rp) for w, sp, rp in self.prior_mixture]

    def at(self, delta, gamma) -> "LearningParams":
        return replace(self, delta=delta, gamma=gamma)


@dataclass
class SolverConfig:
    """Fixed-point solver settings. ``tol`` defaults by mode: 1e-9 exact, 0.05 Monte Carlo
    (just above the residual noise of the default budgets)."""

    damping: float = 0.5
    tol: float | None = None
    max_iter: int = 200
    mode: str = "mc"
    seed: int = 0
    n_lifetimes: int = 4000
    n_receivers: int = 20000
    retries: int = 5
    prune_eps: float = 1e-14
    asr_tol: float = 1e-12
    receiver_t_max: int | None = None

    def __post_init__(self):
        if self.mode not in ("exact", "mc"):
            raise ValueError("mode must be 'exact' or 'mc'")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.tol is None:
            self.tol = 1e-9 if self.mode == "exact" else 0.05
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")


@dataclass
class SteadyStateResult:
    profile: StrategyProfile
    residual: float
    iterations: int
    converged: bool
    delta: float = 0.0
    gamma: float = 0.0
    restarts: int = 0
    residuals: list = field(default_factory=list, repr=False)
    error_bound: float = 0.0


class ResponseMap:
    """The aggregate-response map for fixed parameters; index policies are cached across calls."""

    def __init__(self, game: SignallingGame, params: LearningParams, config: SolverConfig):
        self.game, self.params, self.config = game, params, config
        self.policies = {}
        for c, (_, sp, _) in enumerate(params.components()):
            for i in range(game.n_types):
                self.policies[c, i] = IndexPolicy(game, i, sp, params.beta, tie=params.tie)
        self.error_bound = 0.0

    def __call__(self, profile: StrategyProfile, eps: float | None = None) -> StrategyProfile:
        """One application of the map; in exact mode ``eps`` loosens truncation and pruning."""
        g, p, cfg = self.game, self.params, self.config
        eps = cfg.asr_tol if eps is None else max(eps, cfg.asr_tol)
        prune = max(cfg.prune_eps, eps * 1e-2) if eps > cfg.asr_tol else cfg.prune_eps
        pi1 = np.zeros((g.n_types, g.n_signals))
        pi2 = np.zeros((g.n_signals, g.n_actions))
        err = 0.0
        for c, (w, sp, rp) in enumerate(p.components()):
            for i in range(g.n_types):
                if cfg.mode == "exact":
                    r = asr_exact(g, i, profile, sp, p.delta, p.gamma, prune, eps,
                                  policy=self.policies[c, i])
                    err = max(err, r.error_bound)
                else:
                    r = asr_monte_carlo(g, i, profile, sp, p.delta, p.gamma, cfg.n_lifetimes,
                                        seed=[cfg.seed, 1, c, i], policy=self.policies[c, i])
                pi1[i] += w * r.probs
            if cfg.mode == "exact":
                t_max = cfg.receiver_t_max
                if t_max is None:
                    t_max = 0 if p.gamma == 0 else max(0, math.ceil(math.log(eps) / math.log(p.gamma)))
                rr = arr_exact_small(g, profile, rp, p.gamma, t_max)
                err = max(err, rr.tail)
            else:
                rr = arr_monte_carlo(g, profile, rp, p.gamma, cfg.n_receivers, seed=[cfg.seed, 2, c])
            pi2 += w * rr.pi2
        self.error_bound = err
        pi1 /= pi1.sum(axis=1, keepdims=True)
        pi2 /= pi2.sum(axis=1, keepdims=True)
        return StrategyProfile.from_arrays(pi1, pi2)


def _blend(a: StrategyProfile, b: StrategyProfile, eta: float) -> StrategyProfile:
    pi1 = (1 - eta) * a.pi1_array() + eta * b.pi1_array()
    pi2 = (1 - eta) * a.pi2_array() + eta * b.pi2_array()
    return StrategyProfile.from_arrays(pi1 / pi1.sum(1, keepdims=True), pi2 / pi2.sum(1, keepdims=True))


def random_profile(game: SignallingGame, rng) -> StrategyProfile:
    return StrategyProfile.from_arrays(rng.dirichlet(np.ones(game.n_signals), game.n_types),
                                       rng.dirichlet(np.ones(game.n_actions), game.n_signals))


def _iterate(fmap, start, cfg):
    # exact mode evaluates loosely while far from the fixed point and confirms at full precision
    pi = start
    hist = []
    r = math.inf
    for it in range(1, cfg.max_iter + 1):
        eps = None if cfg.mode == "mc" else min(1e-3, 1e-2 * r)
        img = fmap(pi, eps)
        r = float(l1_distance(pi, img))
        if r <= cfg.tol and eps is not None and eps > cfg.asr_tol:
            img = fmap(pi)
            r = float(l1_distance(pi, img))
        hist.append(r)
        if r <= cfg.tol:
            return pi, r, it, True, hist
        pi = _blend(pi, img, cfg.damping)
    return pi, hist[-1], cfg.max_iter, False, hist


def solve_steady_state(game: SignallingGame, params: LearningParams, solver: SolverConfig | None = None,
                       start: StrategyProfile | None = None) -> SteadyStateResult:
    """Damped fixed-point iteration on the aggregate-response map.

    Non-convergence restarts from random profiles (``solver.retries`` times)
    and is reported with ``converged=False``, keeping the smallest residual.
    """
    cfg = solver or SolverConfig()
    fmap = ResponseMap(game, params, cfg)
    start = start or StrategyProfile.uniform(game)
    rng = np.random.default_rng([cfg.seed, 7])
    best = None
    for attempt in range(cfg.retries + 1):
        pi, r, it, ok, hist = _iterate(fmap, start, cfg)
        res = SteadyStateResult(pi, r, it, ok, params.delta, params.gamma, attempt, hist, fmap.error_bound)
        if best is None or r < best.residual:
            best = res
        if ok:
            return res
        log.info("steady state not converged (residual %.3g), restart %d", r, attempt + 1)
        start = random_profile(game, rng)
    return best


# -- patient-stability scan ------------------------------------------------

@dataclass
class Classification:
    nash: Verdict
    pbe_hetero: Verdict
    compatibility: Verdict
    strong_compatibility: Verdict
    on_path_strict: bool
    invariant_violations: list = field(default_factory=list)

    def to_dict(self):
        return {
            "nash": self.nash.to_dict(),
            "pbe_hetero": self.pbe_hetero.to_dict(),
            "compatibility_criterion": self.compatibility.to_dict(),
            "strong_compatibility_criterion": self.strong_compatibility.to_dict(),
            "on_path_strict": self.on_path_strict,
            "invariant_violations": list(self.invariant_violations),
        }


def snap_profile(profile: StrategyProfile, support_tol: float) -> StrategyProfile:
    """Zero out entries below ``support_tol`` and renormalise, to read off the support of a simulated profile."""
    def snap(arr):
        arr = np.where(arr < support_tol, 0.0, arr)
        return arr / arr.sum(axis=1, keepdims=True)
    return StrategyProfile.from_arrays(snap(profile.pi1_array()), snap(profile.pi2_array()))


def classify(game: SignallingGame, profile: StrategyProfile, payoff_tol: float = 1e-6,
             support_tol: float = 0.0) -> Classification:
    """Run the equilibrium and refinement checks on ``profile`` after snapping its support."""
    p = snap_profile(profile, support_tol) if support_tol > 0 else profile
    c = Classification(
        is_nash(game, p, payoff_tol),
        is_pbe_hetero(game, p, payoff_tol),
        check_compatibility_criterion(game, p, 0.0),
        check_strong_compatibility_criterion(game, p, 0.0),
        is_on_path_strict(game, p),
    )
    if not c.compatibility.passed:
        c.invariant_violations.append("candidate fails the compatibility criterion")
    if c.on_path_strict and not c.strong_compatibility.passed:
        c.invariant_violations.append("on-path strict candidate fails the strong compatibility criterion")
    if not c.pbe_hetero.passed:
        c.invariant_violations.append("candidate is not a PBE with heterogeneous off-path beliefs")
    return c


def outcome_distance(game: SignallingGame, candidate: StrategyProfile, reference: StrategyProfile,
                     tol: float = 1e-9) -> float:
    """l1 distance from ``candidate`` to the closest profile with the same outcome as ``reference``.

    Such a profile copies the sender strategy and the on-path receiver rows
    of ``reference``; after a signal nobody sends, it may use any response
    that leaves every type's payoff at most its payoff under ``reference``.
    Each off-path row is fitted by bisection on an exact feasibility LP.
    """
    total = 0.0
    for row_c, row_r in zip(candidate.pi1, reference.pi1):
        total += sum(abs(float(x) - float(y)) for x, y in zip(row_c, row_r))
    A = game.n_actions
    pay = [equilibrium_payoff(game, reference, i) for i in range(game.n_types)]
    for j in range(game.n_signals):
        c = [as_fraction(x) for x in candidate.pi2[j]]
        if any(reference.pi1[i][j] > 0 for i in range(game.n_types)):
            total += sum(abs(float(x) - float(y)) for x, y in zip(candidate.pi2[j], reference.pi2[j]))
            continue
        # variables: response x (A entries) then deviations e (A entries)
        eq = [[1] * A + [0] * A]
        ub, rhs = [], []
        for a in range(A):
            ub.append([int(b == a) for b in range(A)] + [-int(b == a) for b in range(A)])
            rhs.append(c[a])
            ub.append([-int(b == a) for b in range(A)] + [-int(b == a) for b in range(A)])
            rhs.append(-c[a])
        for i in range(game.n_types):
            ub.append(list(game.u1[i][j]) + [0] * A)
            rhs.append(pay[i])

        def ok(d):
            return feasible_point(2 * A, eq, [1], ub + [[0] * A + [1] * A], rhs + [d]) is not None

        lo, hi = 0.0, 2.0
        if not ok(as_fraction(hi)):
            return math.inf
        if ok(0):
            continue
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if ok(as_fraction(mid)):
                hi = mid
            else:
                lo = mid
        total += hi
    return total


def weighted_distance(game: SignallingGame, a: StrategyProfile, b: StrategyProfile) -> float:
    """Sender l1 plus receiver-row l1 weighted by how often each signal is sent (the larger of the two rates)."""
    total = sum(abs(float(x) - float(y)) for ra, rb in zip(a.pi1, b.pi1) for x, y in zip(ra, rb))
    for j in range(game.n_signals):
        w = max(sum(float(game.prior[i] * p.pi1[i][j]) for i in range(game.n_types)) for p in (a, b))
        total += w * sum(abs(float(x) - float(y)) for x, y in zip(a.pi2[j], b.pi2[j]))
    return total


@dataclass
class ScanResult:
    trajectory: list
    within_limits: dict
    candidate: StrategyProfile
    classification: Classification
    unconverged: list
    cold_start: SteadyStateResult | None = None
    cold_start_distance: float | None = None
    support_tol: float = 0.0
    cold_start_weighted_distance: float | None = None


def extrapolate(points):
    """Linear extrapolation to x = 0 through the last two (x, profile) points, clipped back to the simplex."""
    if len(points) == 1:
        return points[0][1]
    (x0, p0), (x1, p1) = points[-2], points[-1]
    f = x1 / (x0 - x1)

    def ex(a, b):
        v = np.clip(b + (b - a) * f, 0.0, None)
        return v / v.sum(axis=1, keepdims=True)
    return StrategyProfile.from_arrays(ex(p0.pi1_array(), p1.pi1_array()), ex(p0.pi2_array(), p1.pi2_array()))


def patient_stability_scan(game: SignallingGame, base_params: LearningParams, schedule=None,
                           solver: SolverConfig | None = None, start: StrategyProfile | None = None,
                           cold_check: bool = True, support_tol: float = 0.02,
                           payoff_tol: float = 1e-6, progress=None) -> ScanResult:
    """Solve along a (delta, gamma) schedule with warm starts and classify the extrapolated limit.

    Within each delta block gamma should increase toward one; the block's
    last point stands for its gamma limit, and the delta limit is extrapolated
    linearly in 1 - delta from the last two blocks.
    """
    cfg = solver or SolverConfig()
    schedule = list(schedule or DEFAULT_SCHEDULE)
    traj = []
    cur = start
    for d, g in schedule:
        res = solve_steady_state(game, base_params.at(d, g), cfg, start=cur)
        traj.append(res)
        if progress:
            progress(res)
        cur = res.profile
    unconverged = [(r.delta, r.gamma) for r in traj if not r.converged]
    within = {}
    for r in traj:
        if r.converged or not any(x.converged and x.delta == r.delta for x in traj):
            within[r.delta] = r
    pts = [(1 - d, within[d].profile) for d in sorted(within)]
    candidate = extrapolate(pts)
    cls = classify(game, candidate, payoff_tol, support_tol)
    cold = dist = wdist = None
    if cold_check:
        d, g = schedule[-1]
        cold = solve_steady_state(game, base_params.at(d, g), cfg)
        dist = float(l1_distance(cold.profile, traj[-1].profile))
        wdist = weighted_distance(game, cold.profile, traj[-1].profile)
    return ScanResult(traj, {d: r.profile for d, r in within.items()}, candidate, cls, unconverged,
                      cold, dist, support_tol, wdist)


# -- diagnostics -----------------------------------------------------------

def self_confirming_diagnostic(game: SignallingGame, result, tol: float = 1e-6,
                               payoff_tol: float = 1e-9) -> Verdict:
    """Receivers best respond on path, and senders only send signals that are optimal against some
    receiver strategy agreeing with the profile at that signal.

    A choice passes when the probability it puts on non-best-responding
    options is at most ``tol``; signals sent with total probability at or
    below ``tol`` are skipped on the receiver side. For the sender side the
    feasibility question has a closed form: a signal can be rationalised iff
    its payoff is at least the best worst-case payoff among other signals.
    """
    profile = result.profile if hasattr(result, "profile") else result
    v = Verdict(True)
    for j, s in enumerate(game.signals):
        post = bayes_posterior(game, profile, j)
        if post is OFF_PATH or float(sum(game.prior[i] * profile.pi1[i][j] for i in range(game.n_types))) <= tol:
            continue
        vals = [float(receiver_payoff(game, post, j, k)) for k in range(game.n_actions)]
        bad = [k for k in range(game.n_actions) if vals[k] < max(vals) - payoff_tol]
        mass = sum(float(profile.pi2[j][k]) for k in bad)
        if mass > tol:
            k = max(bad, key=lambda k: profile.pi2[j][k])
            v.witnesses.append(("receiver", s, game.actions[k]))
            v.notes.append(f"after {s}, {mass:.4g} of receivers play non-best responses")
    for i, t in enumerate(game.types):
        bad = []
        for j in range(game.n_signals):
            mine = float(sender_payoff(game, i, j, profile.pi2[j]))
            worst_else = max((float(min(game.u1[i][jj])) for jj in range(game.n_signals) if jj != j),
                             default=-math.inf)
            if mine < worst_else - payoff_tol:
                bad.append(j)
        mass = sum(float(profile.pi1[i][j]) for j in bad)
        if mass > tol:
            j = max(bad, key=lambda j: profile.pi1[i][j])
            v.witnesses.append(("sender", t, game.signals[j]))
            v.notes.append(f"{t} sends unrationalisable signals with probability {mass:.4g}")
    v.passed = not v.witnesses
    return v


@dataclass
class ProbeReport:
    gammas: list
    deltas: list
    rates: list
    ratios: list
    increasing: bool
    near_zero: bool


def experimentation_rate_probe(game: SignallingGame, params: LearningParams, profile_ref: StrategyProfile,
                               theta, s, n_grid: int = 3, solver: SolverConfig | None = None,
                               grid=None, check_precondition: bool = True) -> ProbeReport:
    """Track pi1(s | theta) / (1 - gamma) across steady states near ``profile_ref`` as gamma grows.

    ``grid`` may list explicit (delta, gamma) points; by default gamma runs
    over 1 - 10^-1 ... 1 - 10^-n_grid at ``params.delta``. A trend report,
    not a proof.
    """
    i, j = game.type_index(theta), game.signal_index(s)
    if check_precondition and game.types[i] not in undominated_types(game, profile_ref, j):
        raise ValueError(f"{game.types[i]} gains nothing from deviating to {game.signals[j]} at the reference profile")
    grid = list(grid or [(params.delta, 1 - 10.0 ** -(k + 1)) for k in range(n_grid)])
    cfg = solver or SolverConfig()
    rates, ratios = [], []
    cur = profile_ref
    for d, g in grid:
        res = solve_steady_state(game, params.at(d, g), cfg, start=cur)
        cur = res.profile
        rate = float(res.profile.pi1[i][j])
        rates.append(rate)
        ratios.append(rate / (1 - g))
    inc = all(b >= a for a, b in zip(ratios, ratios[1:]))
    near_zero = max(ratios) < 1e-6 if ratios else True
    return ProbeReport([g for _, g in grid], [d for d, _ in grid], rates, ratios, inc, near_zero)
