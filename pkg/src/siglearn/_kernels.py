"""Compiled inner loops for the retirement-calibration dynamic program."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _frontier(alpha, r, S, n, last, M, upper):
    # posterior mean and variance of the mean reward at lattice point n (+ implicit last coord)
    A = alpha.shape[0]
    m = 0.0
    m2 = 0.0
    for a in range(A - 1):
        p = (alpha[a] + n[a]) / S
        m += p * r[a]
        m2 += p * r[a] * r[a]
    p = (alpha[A - 1] + last) / S
    m += p * r[A - 1]
    m2 += p * r[A - 1] * r[A - 1]
    if upper:
        var = (m2 - m * m) / (S + 1.0)
        if var < 0.0:
            var = 0.0
        x = m - M
        rt = math.sqrt(x * x + var)
        w = M + 0.5 * (x + rt)
        if rt > 0.0:
            d = 0.5 * (1.0 - x / rt)
        else:
            d = 0.0 if x > 0 else 1.0
        return w, d
    if m > M:
        return m, 0.0
    return M, 1.0


@njit(cache=True)
def continuation(alpha, r, beta, M, H, upper):
    """Value of pulling once then behaving optimally with retirement reward M.

    Per-period units; the lattice is truncated at depth H where values are
    replaced by a lower (max of M and posterior mean) or upper (bound on
    the full-information value) frontier. Returns (value, d value / d M).
    """
    A = alpha.shape[0]
    k = A - 1
    side = H + 2
    size = 1
    for _ in range(k):
        size *= side
    W = np.empty(max(size, 1))
    D = np.empty(max(size, 1))
    a_tot = 0.0
    for a in range(A):
        a_tot += alpha[a]
    n = np.zeros(max(k, 1), dtype=np.int64)
    strides = np.ones(max(k, 1), dtype=np.int64)
    for a in range(1, k):
        strides[a] = strides[a - 1] * side

    # depth H frontier
    S = a_tot + H
    for a in range(k):
        n[a] = 0
    tot = 0
    idx = 0
    while True:
        w, d = _frontier(alpha, r, S, n, H - tot, M, upper)
        W[idx] = w
        D[idx] = d
        j = 0
        while j < k:
            n[j] += 1
            tot += 1
            idx += strides[j]
            if tot <= H:
                break
            tot -= n[j]
            idx -= n[j] * strides[j]
            n[j] = 0
            j += 1
        if j == k:
            break

    for depth in range(H - 1, -1, -1):
        S = a_tot + depth
        for a in range(k):
            n[a] = 0
        tot = 0
        idx = 0
        while True:
            m = 0.0
            ev = 0.0
            ed = 0.0
            for a in range(k):
                p = (alpha[a] + n[a]) / S
                m += p * r[a]
                ev += p * W[idx + strides[a]]
                ed += p * D[idx + strides[a]]
            p = (alpha[k] + depth - tot) / S
            m += p * r[k]
            ev += p * W[idx]
            ed += p * D[idx]
            c = (1.0 - beta) * m + beta * ev
            dc = beta * ed
            if depth == 0:
                return c, dc
            if c > M:
                W[idx] = c
                D[idx] = dc
            else:
                W[idx] = M
                D[idx] = 1.0
            if k == 0:
                break
            j = 0
            while j < k:
                n[j] += 1
                tot += 1
                idx += strides[j]
                if tot <= depth:
                    break
                tot -= n[j]
                idx -= n[j] * strides[j]
                n[j] = 0
                j += 1
            if j == k:
                break
    # H == 0: one pull then the frontier
    return 0.0, 0.0


@njit(cache=True)
def continuation2(alpha, r, beta, M, H, upper):
    """Two-action specialisation of ``continuation`` (index i counts the first action)."""
    a0 = alpha[0]
    a1 = alpha[1]
    r0 = r[0]
    r1 = r[1]
    W = np.empty(H + 2)
    D = np.empty(H + 2)
    S = a0 + a1 + H
    for i in range(H + 1):
        p = (a0 + i) / S
        m = p * r0 + (1.0 - p) * r1
        if upper:
            var = (r0 - r1) ** 2 * p * (1.0 - p) / (S + 1.0)
            x = m - M
            rt = math.sqrt(x * x + var)
            W[i] = M + 0.5 * (x + rt)
            if rt > 0.0:
                D[i] = 0.5 * (1.0 - x / rt)
            else:
                D[i] = 0.0 if x > 0 else 1.0
        elif m > M:
            W[i] = m
            D[i] = 0.0
        else:
            W[i] = M
            D[i] = 1.0
    for depth in range(H - 1, -1, -1):
        S = a0 + a1 + depth
        for i in range(depth + 1):
            p = (a0 + i) / S
            m = p * r0 + (1.0 - p) * r1
            c = (1.0 - beta) * m + beta * (p * W[i + 1] + (1.0 - p) * W[i])
            dc = beta * (p * D[i + 1] + (1.0 - p) * D[i])
            if depth == 0:
                return c, dc
            if c > M:
                W[i] = c
                D[i] = dc
            else:
                W[i] = M
                D[i] = 1.0
    return 0.0, 0.0


@njit(cache=True)
def calibrate(alpha, r, beta, H, upper, M0=-np.inf, max_iter=100):
    """Newton iteration on g(M) = continuation(M) - M from the posterior mean.

    g is convex and decreasing with slope at most -(1 - beta), so the
    iterates increase monotonically to the root and M + g(M)/(1 - beta)
    bounds it from above. ``M0`` may start the iteration anywhere known to
    be at or below the root. Returns (lower, upper) bounds on the root.
    """
    a_tot = 0.0
    for a in range(alpha.shape[0]):
        a_tot += alpha[a]
    M = 0.0
    for a in range(alpha.shape[0]):
        M += alpha[a] / a_tot * r[a]
    if M0 > M:
        M = M0
    g = 0.0
    two = alpha.shape[0] == 2
    for _ in range(max_iter):
        if two:
            c, dc = continuation2(alpha, r, beta, M, H, upper)
        else:
            c, dc = continuation(alpha, r, beta, M, H, upper)
        g = c - M
        if g <= 1e-15:
            break
        step = g / (1.0 - dc)
        if step <= 1e-15 * (1.0 + abs(M)):
            break
        M = M + step
    if g < 0.0:
        g = 0.0
    return M, M + g / (1.0 - beta)
