"""Command-line entry point: ``siglearn {analyze,steady,scan,verify,report}``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .compat import compatibility_relation, relation_properties_check
from .game import SignallingGame, StrategyProfile, is_nash, is_pbe_hetero, l1_distance
from .gittins import index_theorem_check
from .oracle import gittins_oracle_suite
from .refinement import (admissible_beliefs, check_compatibility_criterion,
                         check_strong_compatibility_criterion, is_on_path_strict,
                         strongly_admissible_beliefs, EmptyBeliefSetError)
from .report import digest, new_report, read_json, render, write_json
from .sender import PreProgrammedPath, asr_exact, coupling_check
from .specfile import GameSpec, SpecError, load_profile, parse_game_spec, profile_to_dict, resolve_input
from .steady import (SolverConfig, outcome_distance, patient_stability_scan, random_profile,
                     self_confirming_diagnostic, solve_steady_state)

log = logging.getLogger("siglearn")


def _game_info(game: SignallingGame) -> dict:
    return {
        "name": game.name,
        "types": list(game.types),
        "signals": list(game.signals),
        "actions": list(game.actions),
        "prior": list(game.prior),
    }


def _verdict(v) -> dict:
    d = v.to_dict()
    return {"passed": d["passed"], "witnesses": [list(w) for w in d["witnesses"]], "notes": d["notes"]}


def _apply_threads():
    n = os.environ.get("SIGLEARN_THREADS")
    if not n:
        return
    import numba
    try:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
    except ValueError:
        log.warning("ignoring SIGLEARN_THREADS=%r", n)


def _solver(args, spec: GameSpec) -> SolverConfig:
    d = spec.defaults
    mode = args.mode or d["mode"]
    n = args.samples
    return SolverConfig(
        damping=d["damping"],
        tol=args.tol if args.tol is not None else d["tol"],
        max_iter=d["max_iter"],
        mode=mode,
        seed=args.seed if args.seed is not None else d["seed"],
        n_lifetimes=n if n else d["n_lifetimes"],
        n_receivers=5 * n if n else d["n_receivers"],
    )


def _inputs(args, *extra):
    parts = [Path(args.spec).read_bytes()]
    if getattr(args, "profile", None):
        parts.append(Path(args.profile).read_bytes())
    parts += [repr(sorted((k, v) for k, v in vars(args).items() if k not in ("out", "func", "verbose")))]
    return digest(*parts, *extra)


def _steady_block(game, res) -> dict:
    return {
        "delta": res.delta,
        "gamma": res.gamma,
        "residual": res.residual,
        "iterations": res.iterations,
        "converged": res.converged,
        "restarts": res.restarts,
        "error_bound": res.error_bound,
        "residuals": list(res.residuals),
        "profile": profile_to_dict(game, res.profile),
    }


def _finish(report, args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = write_json(report, out / f"{report['command']}.json")
    files = [path] + render(report, out)
    for f in files:
        print(f"wrote {f}")


# -- subcommands -----------------------------------------------------------

def cmd_analyze(args, spec: GameSpec) -> int:
    g = spec.game
    rel = {s: sorted([list(p) for p in compatibility_relation(g, j)]) for j, s in enumerate(g.signals)}
    rep = new_report("analyze", _inputs(args), args.seed, game=_game_info(g), relation=rel, profile=None)
    print(f"game {g.name or args.spec}: {g.n_types} types, {g.n_signals} signals, {g.n_actions} actions")
    for s, pairs in rel.items():
        print(f"  at {s}: " + (", ".join(f"{a} > {b}" for a, b in pairs) or "no comparable pairs"))
    if args.profile:
        p = load_profile(g, args.profile)
        checks = {
            "nash": is_nash(g, p),
            "pbe_hetero": is_pbe_hetero(g, p),
            "compatibility_criterion": check_compatibility_criterion(g, p),
            "strong_compatibility_criterion": check_strong_compatibility_criterion(g, p),
        }
        beliefs = {}
        for j, s in enumerate(g.signals):
            beliefs[s] = {"admissible": admissible_beliefs(g, p, j).describe(g),
                          "strongly_admissible": strongly_admissible_beliefs(g, p, j).describe(g)}
        rep["profile"] = profile_to_dict(g, p)
        rep["checks"] = {k: _verdict(v) for k, v in checks.items()}
        rep["on_path_strict"] = is_on_path_strict(g, p)
        rep["belief_sets"] = beliefs
        for k, v in checks.items():
            wit = "; ".join(" ".join(map(str, w)) for w in v.witnesses)
            print(f"  {k}: {'PASS' if v.passed else 'FAIL'}" + (f" (witness {wit})" if wit else ""))
        print(f"  on-path strict: {rep['on_path_strict']}")
    _finish(rep, args)
    return 0


def cmd_steady(args, spec: GameSpec) -> int:
    g = spec.game
    params = spec.params.at(args.delta if args.delta is not None else spec.params.delta,
                            args.gamma if args.gamma is not None else spec.params.gamma)
    cfg = _solver(args, spec)
    start = load_profile(g, args.profile) if args.profile else None
    t0 = time.perf_counter()
    res = solve_steady_state(g, params, cfg, start)
    diag = self_confirming_diagnostic(g, res, args.diag_tol)
    rep = new_report("steady", _inputs(args), cfg.seed, game=_game_info(g), mode=cfg.mode, tol=cfg.tol,
                     result=_steady_block(g, res), self_confirming=_verdict(diag))
    print(f"steady state at delta={params.delta:g}, gamma={params.gamma:g}: "
          f"{'converged' if res.converged else 'NOT converged'} after {res.iterations} iterations, "
          f"residual {res.residual:.3g} ({time.perf_counter() - t0:.1f}s)")
    _finish(rep, args)
    return 0 if res.converged else 3


def _parse_schedule(text):
    pts = []
    for item in text.split(","):
        d, _, gm = item.partition(":")
        pts.append((float(d), float(gm)))
    return pts


def cmd_scan(args, spec: GameSpec) -> int:
    from .games import beer_quiche
    g = spec.game
    cfg = _solver(args, spec)
    schedule = _parse_schedule(args.schedule) if args.schedule else None
    start = load_profile(g, args.profile) if args.profile else None

    def progress(r):
        print(f"  delta={r.delta:g} gamma={r.gamma:g}: {'ok' if r.converged else 'NOT converged'}, "
              f"{r.iterations} iterations, residual {r.residual:.3g}", flush=True)

    res = patient_stability_scan(g, spec.params, schedule, cfg, start, cold_check=not args.no_cold_start,
                                 support_tol=args.support_tol, progress=progress)
    c = res.classification
    rep = new_report("scan", _inputs(args), cfg.seed, game=_game_info(g), mode=cfg.mode, tol=cfg.tol,
                     support_tol=res.support_tol,
                     trajectory=[_steady_block(g, r) for r in res.trajectory],
                     unconverged=[list(x) for x in res.unconverged],
                     within_delta_limits={repr(d): profile_to_dict(g, p) for d, p in res.within_limits.items()},
                     candidate={"profile": profile_to_dict(g, res.candidate), "classification": c.to_dict()},
                     cold_start=None)
    if res.cold_start is not None:
        rep["cold_start"] = {"result": _steady_block(g, res.cold_start), "distance_to_warm": res.cold_start_distance,
                            "weighted_distance_to_warm": res.cold_start_weighted_distance}
    if g == beer_quiche():
        from .games import beer_pooling
        rep["candidate"]["distance_to_beer_pooling"] = float(l1_distance(res.candidate, beer_pooling(g)))
        rep["candidate"]["outcome_distance_to_beer_pooling"] = outcome_distance(g, res.candidate, beer_pooling(g))
    if args.starts:
        rng = np.random.default_rng([cfg.seed, 99])
        d, gm = (schedule or [(r.delta, r.gamma) for r in res.trajectory])[-1]
        found = []
        for _ in range(args.starts):
            r = solve_steady_state(g, spec.params.at(d, gm), cfg, random_profile(g, rng))
            found.append(_steady_block(g, r))
        rep["multistart"] = found
    label = "compatible" if c.compatibility.passed else "NOT compatible"
    near = rep["candidate"].get("outcome_distance_to_beer_pooling")
    print(f"candidate: nash {'PASS' if c.nash.passed else 'FAIL'}, pbe-hetero {'PASS' if c.pbe_hetero.passed else 'FAIL'}, "
          f"compatibility {'PASS' if c.compatibility.passed else 'FAIL'}, "
          f"strong {'PASS' if c.strong_compatibility.passed else 'FAIL'}")
    print(f"limit classification: {label}" + (f", outcome distance to beer-pooling {near:.3f}"
                                               + (" (near beer-pooling)" if near <= 0.1 else "") if near is not None else ""))
    for v in c.invariant_violations:
        print(f"  warning: {v}")
    _finish(rep, args)
    return 0 if c.compatibility.passed else 4


def cmd_verify(args, spec: GameSpec) -> int:
    g = spec.game
    seed = args.seed if args.seed is not None else spec.defaults["seed"]
    samples = args.samples or 500
    suites = {}
    for j, s in enumerate(g.signals):
        r = relation_properties_check(g, j, seed=seed)
        suites[f"relation_properties[{s}]"] = {
            "passed": r.ok, "relation": sorted(list(p) for p in r.relation),
            "transitivity_violations": r.transitivity_violations, "asymmetry_violations": r.asymmetry_violations,
            "dominance_exceptions": r.dominance_exceptions,
            "sampled_soundness_violations": r.sampled_soundness_violations}
    pairs = [(hi, lo, s) for j, s in enumerate(g.signals) for hi, lo in sorted(compatibility_relation(g, j))]
    prior = spec.params.sender_prior
    rng = np.random.default_rng([seed, 3])
    for hi, lo, s in pairs:
        r = index_theorem_check(g, hi, lo, s, samples=samples, seed=seed)
        suites[f"index_ordering[{hi}>{lo}@{s}]"] = {
            "passed": r.ok, "checked": r.checked, "premise_held": r.premise_held,
            "violations": [list(map(str, v)) for v in r.violations[:20]], "undecided": r.undecided}
        paths = [PreProgrammedPath(g.n_signals, g.n_actions, seed=int(x),
                                   pi2=rng.dirichlet(np.ones(g.n_actions), g.n_signals))
                 for x in rng.integers(0, 2**31, max(samples // 2, 20))]
        c = coupling_check(g, hi, lo, s, paths, 100, prior)
        suites[f"coupling[{hi}>{lo}@{s}]"] = {
            "passed": c.ok, "paths": c.paths, "violations": [list(map(str, v)) for v in c.violations[:20]],
            "mean_share_gap": c.mean_gap}
        viol = []
        for _ in range(20):
            pi2 = rng.dirichlet(np.ones(g.n_actions), g.n_signals)
            a = asr_exact(g, hi, pi2, prior, 0.5, 0.8, 1e-10, 1e-8)
            b = asr_exact(g, lo, pi2, prior, 0.5, 0.8, 1e-10, 1e-8)
            jj = g.signal_index(s)
            if a.probs[jj] < b.probs[jj] - 1e-6 - a.error_bound - b.error_bound:
                viol.append([pi2.tolist(), float(a.probs[jj]), float(b.probs[jj])])
        suites[f"response_comonotone[{hi}>{lo}@{s}]"] = {"passed": not viol, "draws": 20, "violations": viol}
    if g.n_actions == 2:
        suites["gittins_oracle"] = gittins_oracle_suite(100, seed)
    rep = new_report("verify", _inputs(args), seed, game=_game_info(g), samples=samples, suites=suites)
    failed = [k for k, v in suites.items() if not v["passed"]]
    for k, v in suites.items():
        print(f"  {'PASS' if v['passed'] else 'FAIL'}  {k}")
    _finish(rep, args)
    return 1 if failed else 0


def cmd_report(args) -> int:
    rep = read_json(args.report)
    out = Path(args.out) if args.out else Path(args.report).parent
    for f in render(rep, out):
        print(f"wrote {f}")
    cand = rep.get("candidate")
    if cand:
        for k, v in cand["classification"].items():
            if isinstance(v, dict):
                print(f"  {k}: {'PASS' if v['passed'] else 'FAIL'}")
    for k, v in (rep.get("checks") or rep.get("suites") or {}).items():
        print(f"  {k}: {'PASS' if v['passed'] else 'FAIL'}")
    return 0


# -- argument parsing ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="siglearn", description="Learning and equilibrium refinement in signalling games.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, profile_help):
        sp.add_argument("spec", help="game spec file")
        sp.add_argument("--out", default="siglearn-out", help="output directory (default: %(default)s)")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--mode", choices=("exact", "mc"), default=None)
        sp.add_argument("--samples", type=int, default=None)
        sp.add_argument("--profile", default=None, help=profile_help)

    a = sub.add_parser("analyze", help="compatibility relation and criterion checks")
    common(a, "profile file to check")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("steady", help="solve one steady state")
    common(s, "start profile")
    s.add_argument("--delta", type=float, default=None)
    s.add_argument("--gamma", type=float, default=None)
    s.add_argument("--diag-tol", type=float, default=0.05, help="tolerance of the self-confirming diagnostic")
    s.set_defaults(func=cmd_steady)

    c = sub.add_parser("scan", help="patient-stability scan")
    common(c, "start profile")
    c.add_argument("--schedule", default=None, help="comma-separated delta:gamma points")
    c.add_argument("--starts", type=int, default=0, help="extra random starts at the last grid point")
    c.add_argument("--support-tol", type=float, default=0.02)
    c.add_argument("--no-cold-start", action="store_true")
    c.set_defaults(func=cmd_scan)

    v = sub.add_parser("verify", help="property suites")
    common(v, "unused")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("report", help="render a stored report")
    r.add_argument("report", help="report JSON written by another subcommand")
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    _apply_threads()
    if args.command == "report":
        return args.func(args)
    args.spec = str(resolve_input(args.spec))
    if args.profile:
        args.profile = str(resolve_input(args.profile))
    try:
        spec = parse_game_spec(args.spec)
    except FileNotFoundError:
        parser.error(f"no such file: {args.spec}")
    except SpecError as e:
        for line in e.errors:
            print(line, file=sys.stderr)
        return 2
    try:
        return args.func(args, spec)
    except (ValueError, EmptyBeliefSetError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
