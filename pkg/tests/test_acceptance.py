"""Acceptance checks, one test per criterion.

Each test records a one-line verdict that the terminal summary prints
(see conftest.py); run with ``pytest tests/test_acceptance.py -s`` to also
see the lines as they happen. The scan in criterion 8 takes about 12 minutes.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE
from oracles import joint_first_arm_values, retirement_index
from siglearn.compat import is_more_compatible
from siglearn.game import SignallingGame, l1_distance
from siglearn.games import beer_pooling, beer_quiche, learning_example, modified_beer_quiche, quiche_pooling
from siglearn.gittins import DirichletArm, IndexPolicy, index_bounds, index_theorem_check, posterior_mean_reward
from siglearn.receiver import arr_exact_small, arr_monte_carlo
from siglearn.refinement import (admissible_beliefs, br_membership, check_compatibility_criterion,
                                 check_strong_compatibility_criterion, is_on_path_strict)
from siglearn.sender import PreProgrammedPath, asr_exact, asr_monte_carlo, coupling_check
from siglearn.specfile import parse_game_spec
from siglearn.steady import LearningParams, SolverConfig, outcome_distance, patient_stability_scan, solve_steady_state

F = Fraction
UNIFORM = [(1, 1), (1, 1)]


def record(n, ok, budget, elapsed, detail):
    ok = bool(ok) and elapsed < budget
    line = f"{detail} [{elapsed:.1f}s of {budget:g}s]"
    ACCEPTANCE[n] = (ok, line)
    print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {line}")
    assert ok, line


def test_criterion_1_compatibility_order():
    t0 = time.perf_counter()
    g = beer_quiche()
    got = (is_more_compatible(g, "strong", "weak", "B").holds,
           is_more_compatible(g, "weak", "strong", "B").holds,
           is_more_compatible(g, "weak", "strong", "Q").holds)
    record(1, got == (True, False, True), 1, time.perf_counter() - t0,
           f"strong>B weak, weak>B strong, weak>Q strong = {got}")


def test_criterion_2_admissible_beliefs():
    t0 = time.perf_counter()
    g = beer_quiche()
    P = admissible_beliefs(g, quiche_pooling(g), "B")
    desc = P.describe(g)
    # boundary and both sides of the odds bound
    inside = P.contains(g, [F(9, 10), F(1, 10)]) and P.contains(g, [F(1), F(0)])
    outside = not P.contains(g, [F(9, 10) - F(1, 10**6), F(1, 10) + F(1, 10**6)])
    no_fight = not br_membership(g, P, "B", "F") and br_membership(g, P, "B", "NF")
    ok = desc == ["p(weak)/p(strong) <= 1/9"] and inside and outside and no_fight
    record(2, ok, 1, time.perf_counter() - t0, f"admissible set {desc}, F in BR: {not no_fight}")


def test_criterion_3_criterion_verdicts():
    t0 = time.perf_counter()
    g, m = beer_quiche(), modified_beer_quiche()
    plain = check_compatibility_criterion(g, quiche_pooling(g)).passed
    mod = check_compatibility_criterion(m, quiche_pooling(m)).passed
    strong = check_strong_compatibility_criterion(m, quiche_pooling(m)).passed
    strict = is_on_path_strict(m, quiche_pooling(m))
    ok = not plain and mod and not strong and strict
    record(3, ok, 1, time.perf_counter() - t0,
           f"beer-quiche compat {plain}; modified compat {mod}, strong {strong}, on-path strict {strict}")


def test_criterion_4_closed_form_example():
    t0 = time.perf_counter()
    g = learning_example()
    means = [posterior_mean_reward(g, "t1", "s1", DirichletArm((1, 3), (k, 0))) for k in range(7)]
    means_ok = means == [F(5 - k, 4 + k) for k in range(7)]
    errs = []
    for gamma in (0.9, 0.99):
        params = LearningParams(0.0, gamma, ((1, 3), (1, 1)), ((1, 1), (1, 1)))
        res = solve_steady_state(g, params, SolverConfig(mode="exact", prune_eps=1e-13))
        errs.append(abs(res.profile.pi1_array()[0, 0] - (1 - gamma ** 6)) if res.converged else np.inf)
    ok = means_ok and max(errs) <= 1e-9
    record(4, ok, 5, time.perf_counter() - t0,
           f"means exact {means_ok}, steady-state errors {', '.join(f'{e:.1e}' for e in errs)}")


def arm_game(rows):
    n_sig, n_act = len(rows), len(rows[0])
    return SignallingGame(("t",), tuple(f"s{j}" for j in range(n_sig)), tuple(f"a{k}" for k in range(n_act)),
                          (F(1),), [[[F(x) for x in r] for r in rows]], [[[F(0)] * n_act for _ in range(n_sig)]])


def random_arm(rng):
    alpha = tuple(float(x) for x in np.round(rng.uniform(0.2, 6.0, 2), 2))
    while True:
        rew = tuple(float(x) for x in np.round(rng.uniform(-3, 3, 2), 2))
        if rew[0] != rew[1]:
            return alpha, rew


def test_criterion_5_gittins_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        alpha, rew = random_arm(rng)
        beta = float(rng.uniform(0, 0.95))
        lo, hi, _ = index_bounds(rew, alpha, beta, 1e-8)
        worst = max(worst, abs(0.5 * (lo + hi) - retirement_index(alpha, rew, beta, horizon=600)))
    decisive = mismatches = 0
    for _ in range(100):
        (a0, r0), (a1, r1) = random_arm(rng), random_arm(rng)
        beta = float(rng.uniform(0, 0.95))
        b0, b1 = index_bounds(r0, a0, beta, 1e-9), index_bounds(r1, a1, beta, 1e-9)
        if not (b0[0] > b1[1] or b1[0] > b0[1]):
            continue
        dp = joint_first_arm_values([(a0, r0), (a1, r1)], beta, horizon=20)
        if not (dp[0][0] > dp[1][1] or dp[1][0] > dp[0][1]):
            continue
        decisive += 1
        pol = IndexPolicy(arm_game([r0, r1]), "t", [a0, a1], beta)
        mismatches += pol(((0, 0), (0, 0))) != (0 if dp[0][0] > dp[1][1] else 1)
    ok = worst < 1e-5 and mismatches == 0 and decisive > 0
    record(5, ok, 120, time.perf_counter() - t0,
           f"max index gap {worst:.1e} over 100 arms; first-arm mismatches {mismatches} of {decisive} decisive pairs")


def test_criterion_6_index_ordering():
    t0 = time.perf_counter()
    rep = index_theorem_check(beer_quiche(), "strong", "weak", "B", samples=500, beta_grid=(0.0, 0.5, 0.9, 0.99))
    ok = rep.checked == 2000 and not rep.violations
    record(6, ok, 300, time.perf_counter() - t0,
           f"{len(rep.violations)} violations in {rep.checked} cases "
           f"(premise held {rep.premise_held}, undecided {rep.undecided})")


def test_criterion_7_coupling_and_comonotone_shares():
    t0 = time.perf_counter()
    g = beer_quiche()
    rng = np.random.default_rng(7)
    paths = []
    for n in range(200):
        p = rng.uniform(0, 1, 2)
        paths.append(PreProgrammedPath(2, 2, seed=n, pi2=[[p[0], 1 - p[0]], [p[1], 1 - p[1]]]))
    rep = coupling_check(g, "strong", "weak", "B", paths, 100, UNIFORM)
    gaps = []
    for _ in range(20):
        p = rng.uniform(0, 1, 2)
        pi2 = [[p[0], 1 - p[0]], [p[1], 1 - p[1]]]
        hi = asr_exact(g, "strong", pi2, UNIFORM, 0.9, 0.8, prune_eps=1e-10, tol=1e-8)
        lo = asr_exact(g, "weak", pi2, UNIFORM, 0.9, 0.8, prune_eps=1e-10, tol=1e-8)
        gaps.append(hi.probs[0] - lo.probs[0])
    ok = rep.precondition and rep.paths == 200 and not rep.violations and min(gaps) >= -1e-6
    record(7, ok, 300, time.perf_counter() - t0,
           f"{len(rep.violations)} coupling violations on {rep.paths} paths; "
           f"min R1(B|strong) - R1(B|weak) over 20 responses {min(gaps):.3g}")


def test_criterion_8_patient_stability_scan():
    t0 = time.perf_counter()
    spec = parse_game_spec("beerquiche.spec")
    g = spec.game
    res = patient_stability_scan(g, spec.params, solver=SolverConfig())
    c = res.classification
    ref = beer_pooling(g)
    dist = outcome_distance(g, res.candidate, ref)
    full = float(l1_distance(res.candidate, ref))
    sender = float(np.abs(res.candidate.pi1_array() - ref.pi1_array()).sum())
    ok = dist <= 0.1 and c.nash.passed and c.pbe_hetero.passed and c.compatibility.passed
    record(8, ok, 1800, time.perf_counter() - t0,
           f"distance to beer-pooling equilibria {dist:.4f} (sender part {sender:.4f}, to the pure representative "
           f"{full:.4f}); Nash {c.nash.passed}, PBE {c.pbe_hetero.passed}, compatibility {c.compatibility.passed}; "
           f"cold start {res.cold_start_distance:.3f} l1, {res.cold_start_weighted_distance:.3f} weighted")


def random_small_game(rng, n):
    n_act = 2 + n % 2
    w = rng.integers(1, 5, 2)
    prior = (F(int(w[0]), int(w.sum())), F(int(w[1]), int(w.sum())))
    u = lambda: [[[F(int(x)) for x in rng.integers(-3, 4, n_act)] for _ in range(2)] for _ in range(2)]
    return SignallingGame(("a", "b"), ("s", "r"), tuple(f"x{k}" for k in range(n_act)), prior, u(), u(),
                          name=f"random{n}")


def test_criterion_9_cross_method_consistency():
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    delta, gamma, n_mc = 0.9, 0.8, 100_000
    worst_asr = worst_arr = 0.0
    for n in range(10):
        g = random_small_game(rng, n)
        sender_prior = [tuple(int(x) for x in rng.integers(1, 3, g.n_actions)) for _ in range(2)]
        receiver_prior = [tuple(int(x) for x in rng.integers(1, 3, 2)) for _ in range(2)]
        pi2 = rng.dirichlet(np.ones(g.n_actions), 2)
        theta = g.types[n % 2]
        ex = asr_exact(g, theta, pi2, sender_prior, delta, gamma, prune_eps=1e-10, tol=1e-9)
        mc = asr_monte_carlo(g, theta, pi2, sender_prior, delta, gamma, n_lifetimes=n_mc, seed=n)
        # a zero sample variance (no plays of a rare signal) gets the resolution of one lifetime
        se = np.maximum(mc.std_err, 1 / n_mc)
        worst_asr = max(worst_asr, float(np.max(np.abs(ex.probs - mc.probs) / (ex.error_bound + 3 * se))))
        pi1 = rng.dirichlet(np.ones(2), 2)
        rx = arr_exact_small(g, pi1, receiver_prior, gamma, 50)
        rm = arr_monte_carlo(g, pi1, receiver_prior, gamma, n_lifetimes=n_mc, seed=n)
        se = np.maximum(rm.std_err, 1 / n_mc)
        worst_arr = max(worst_arr, float(np.max(np.abs(rx.pi2 - rm.pi2) / (rx.tail + 4 * se))))
    ok = worst_asr <= 1 and worst_arr <= 1
    record(9, ok, 600, time.perf_counter() - t0,
           f"largest gap as a fraction of its allowance: sender {worst_asr:.2f}, receiver {worst_arr:.2f} (10 games)")
