"""Slow reference routines used by ``siglearn verify`` to cross-check the fast paths."""

from __future__ import annotations

import numpy as np

from .gittins import index_bounds


def bisection_index(alpha, rewards, beta, horizon=300, tol=1e-9):
    """Gittins index of a two-response arm: bisect on the retirement reward of a forced-stop DP.

    The DP retires for sure at ``horizon``, so the result sits slightly
    below the true index; the gap is at most beta^horizon times the reward span.
    """
    a0, a1 = map(float, alpha)
    r0, r1 = map(float, rewards)
    if beta == 0:
        return (a0 * r0 + a1 * r1) / (a0 + a1)

    def worth_pulling(m):
        stop = m / (1 - beta)
        v = np.full(horizon + 1, stop)
        for d in range(horizon - 1, -1, -1):
            i = np.arange(d + 1)
            p = (a0 + i) / (a0 + a1 + d)
            go = p * r0 + (1 - p) * r1 + beta * (p * v[1:d + 2] + (1 - p) * v[:d + 1])
            v = np.maximum(stop, go)
        return go[0] > stop

    lo, hi = min(r0, r1), max(r0, r1)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if worth_pulling(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gittins_oracle_suite(n_arms=100, seed=0, tol=1e-5, max_beta=0.95):
    """Compare calibrated brackets against the bisection DP on random two-response arms."""
    rng = np.random.default_rng(seed)
    bad = []
    for n in range(n_arms):
        alpha = tuple(np.round(rng.uniform(0.2, 6.0, 2), 2))
        rewards = tuple(np.round(rng.uniform(-3, 3, 2), 2))
        beta = float(np.round(rng.uniform(0, max_beta), 3))
        horizon = max(50, int(np.ceil(np.log(tol * (1 - beta) / 10) / np.log(max(beta, 1e-9)))) + 1)
        ref = bisection_index(alpha, rewards, beta, horizon, tol * 1e-2)
        lo, hi, _ = index_bounds(rewards, alpha, beta, tol * 1e-2)
        mid = 0.5 * (lo + hi)
        if abs(mid - ref) > tol:
            bad.append({"alpha": alpha, "rewards": rewards, "beta": beta, "fast": mid, "reference": ref})
    return {"arms": n_arms, "mismatches": bad, "passed": not bad}
