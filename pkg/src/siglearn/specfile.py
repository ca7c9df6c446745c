"""Reading and writing game-spec files and profile files.

A spec file is line oriented with ``[section]`` headers; ``#`` starts a
comment. See docs/game-format.md for the grammar.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib.resources import files
from pathlib import Path

from .compat import validate_separable
from .game import SignallingGame, StrategyProfile
from .steady import LearningParams

DEFAULTS = {
    "delta": 0.9,
    "gamma": 0.99,
    "tol": None,
    "seed": 0,
    "mode": "mc",
    "n_lifetimes": 4000,
    "n_receivers": 20000,
    "damping": 0.5,
    "max_iter": 200,
    "tie": "lex",
}
_INT_KEYS = {"seed", "n_lifetimes", "n_receivers", "max_iter"}
_STR_KEYS = {"mode", "tie"}


class SpecError(ValueError):
    """Raised with every problem found in a spec file, each prefixed by its location."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass
class GameSpec:
    game: SignallingGame
    params: LearningParams
    defaults: dict = field(default_factory=dict)
    separable: tuple | None = None


def parse_number(text: str) -> Fraction:
    """Exact value of a decimal or ``p/q`` literal."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a number: {text!r}") from None


def _lines(text):
    section = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            yield no, section, None
            continue
        yield no, section, line


def parse_game_spec_text(text: str, source: str = "<spec>") -> GameSpec:
    errors = []

    def err(no, msg):
        errors.append(f"{source}:{no}: {msg}")

    header = {}
    tables = {"u1": {}, "u2": {}}
    sep = {"v": {}, "z": {}}
    sep_seen = None
    priors: dict = {}
    mixture: dict = {}
    defaults = dict(DEFAULTS)
    seen_sections = set()

    for no, section, line in _lines(text):
        if line is None:
            base = section.split()[0] if section else ""
            if base not in ("game", "u1", "u2", "separable", "priors", "mixture", "defaults"):
                err(no, f"unknown section [{section}]")
            if base == "mixture" and len(section.split()) != 2:
                err(no, "mixture sections need a name: [mixture NAME]")
            if section in seen_sections:
                err(no, f"section [{section}] appears twice")
            seen_sections.add(section)
            if base == "mixture" and len(section.split()) == 2:
                mixture[section.split()[1]] = {"line": no, "weight": None, "sender": {}, "receiver": {}}
            if base == "separable":
                sep_seen = no
            continue
        if section is None:
            err(no, "content before the first section header")
            continue
        base = section.split()[0]
        if base == "game":
            key, eq, val = line.partition("=")
            if not eq:
                err(no, "expected 'key = value'")
                continue
            key = key.strip()
            if key not in ("name", "types", "signals", "actions", "prior"):
                err(no, f"unknown game key {key!r}")
            header[key] = (no, val.split() if key != "name" else val.strip())
        elif base in ("u1", "u2"):
            parts = line.split()
            if len(parts) != 4:
                err(no, "payoff rows read 'type signal action value'")
                continue
            try:
                v = parse_number(parts[3])
            except ValueError as e:
                err(no, str(e))
                continue
            key = tuple(parts[:3])
            if key in tables[base]:
                err(no, f"duplicate {base} entry for {' '.join(key)}")
            tables[base][key] = (no, v)
        elif base == "separable":
            parts = line.split()
            try:
                if parts and parts[0] == "v" and len(parts) == 4:
                    sep["v"][(parts[1], parts[2])] = (no, parse_number(parts[3]))
                elif parts and parts[0] == "z" and len(parts) == 3:
                    sep["z"][parts[1]] = (no, parse_number(parts[2]))
                else:
                    err(no, "separable rows read 'v type signal value' or 'z action value'")
            except ValueError as e:
                err(no, str(e))
        elif base in ("priors", "mixture"):
            target = priors if base == "priors" else mixture.get(section.split()[1] if len(section.split()) == 2 else "")
            if target is None:
                continue
            key, eq, val = line.partition("=")
            words = key.split()
            if not eq:
                err(no, "expected 'sender SIGNAL = ...', 'receiver TYPE = ...' or 'weight = ...'")
                continue
            try:
                nums = [parse_number(x) for x in val.split()]
            except ValueError as e:
                err(no, str(e))
                continue
            if words == ["weight"] and base == "mixture":
                if len(nums) != 1:
                    err(no, "weight takes one number")
                else:
                    target["weight"] = (no, nums[0])
            elif len(words) == 2 and words[0] in ("sender", "receiver"):
                target.setdefault(words[0], {})[words[1]] = (no, nums)
            else:
                err(no, f"unrecognised prior line {key.strip()!r}")
        elif base == "defaults":
            key, eq, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not eq or key not in DEFAULTS:
                err(no, f"unknown default {key!r}")
                continue
            try:
                if key in _STR_KEYS:
                    defaults[key] = val
                elif key in _INT_KEYS:
                    defaults[key] = int(val)
                else:
                    defaults[key] = float(parse_number(val))
            except ValueError:
                err(no, f"bad value for {key}: {val!r}")

    for key in ("types", "signals", "actions", "prior"):
        if key not in header:
            errors.append(f"{source}: [game] is missing '{key}'")
    if errors:
        raise SpecError(errors)

    types, signals, actions = header["types"][1], header["signals"][1], header["actions"][1]
    name = header.get("name", (0, ""))[1]
    prior_no, prior_txt = header["prior"]
    try:
        prior = [parse_number(x) for x in prior_txt]
    except ValueError as e:
        raise SpecError([f"{source}:{prior_no}: {e}"]) from None
    if len(prior) != len(types):
        err(prior_no, f"prior lists {len(prior)} weights for {len(types)} types")

    def table(which):
        out = {}
        for t in types:
            for s in signals:
                for a in actions:
                    cell = tables[which].get((t, s, a))
                    if cell is None:
                        errors.append(f"{source}: [{which}] is missing the entry for {t} {s} {a}")
                    else:
                        out.setdefault(t, {}).setdefault(s, {})[a] = cell[1]
        for (t, s, a), (no, _) in tables[which].items():
            if t not in types or s not in signals or a not in actions:
                err(no, f"[{which}] entry {t} {s} {a} names an undeclared type, signal or action")
        return out

    u1, u2 = table("u1"), table("u2")

    def prior_rows(block, where):
        snd = block.get("sender", {})
        rcv = block.get("receiver", {})
        rows_s, rows_r = [], []
        for s in signals:
            if s not in snd:
                errors.append(f"{source}: {where} has no sender pseudo-counts for signal {s}")
                rows_s.append([Fraction(1)] * len(actions))
                continue
            no, nums = snd[s]
            if len(nums) != len(actions):
                err(no, f"sender pseudo-counts for {s} need {len(actions)} entries")
            if any(x <= 0 for x in nums):
                err(no, f"sender pseudo-counts for {s} must be positive")
            rows_s.append(nums)
        for t in types:
            if t not in rcv:
                errors.append(f"{source}: {where} has no receiver pseudo-counts for type {t}")
                rows_r.append([Fraction(1)] * len(signals))
                continue
            no, nums = rcv[t]
            if len(nums) != len(signals):
                err(no, f"receiver pseudo-counts for {t} need {len(signals)} entries")
            if any(x <= 0 for x in nums):
                err(no, f"receiver pseudo-counts for {t} must be positive")
            rows_r.append(nums)
        for s, (no, _) in snd.items():
            if s not in signals:
                err(no, f"unknown signal {s!r}")
        for t, (no, _) in rcv.items():
            if t not in types:
                err(no, f"unknown type {t!r}")
        return rows_s, rows_r

    if priors or not mixture:
        if not priors:
            sp = [[Fraction(1)] * len(actions) for _ in signals]
            rp = [[Fraction(1)] * len(signals) for _ in types]
        else:
            sp, rp = prior_rows(priors, "[priors]")
    mix = None
    if mixture:
        mix = []
        for mname, block in mixture.items():
            if block["weight"] is None:
                err(block["line"], f"mixture component {mname} has no weight")
                continue
            msp, mrp = prior_rows(block, f"[mixture {mname}]")
            mix.append((block["weight"][1], msp, mrp))
        if not priors:
            sp, rp = (mix[0][1], mix[0][2]) if mix else ([], [])
        total = sum(w for w, _, _ in mix)
        if mix and total != 1:
            errors.append(f"{source}: mixture weights sum to {total}, not 1")
    if errors:
        raise SpecError(errors)

    try:
        game = SignallingGame.from_dicts(types, signals, actions, dict(zip(types, prior)), u1, u2, name=name)
    except ValueError as e:
        raise SpecError([f"{source}:{prior_no}: {e}" if "prior" in str(e) else f"{source}: {e}"]) from None

    separable = None
    if sep_seen is not None:
        v = [[sep["v"].get((t, s), (0, None))[1] for s in signals] for t in types]
        z = [sep["z"].get(a, (0, None))[1] for a in actions]
        if any(x is None for row in v for x in row) or any(x is None for x in z):
            raise SpecError([f"{source}:{sep_seen}: [separable] must give v for every type and signal and z for every action"])
        try:
            validate_separable(game, v, z)
        except ValueError as e:
            raise SpecError([f"{source}:{sep_seen}: {e}"]) from None
        separable = (tuple(tuple(r) for r in v), tuple(z))

    try:
        params = LearningParams(defaults["delta"], defaults["gamma"], sp, rp,
                                prior_mixture=tuple(mix) if mix else None, tie=defaults["tie"])
    except ValueError as e:
        raise SpecError([f"{source}: [defaults] {e}"]) from None
    return GameSpec(game, params, defaults, separable)


def resolve_input(path) -> Path:
    """``path`` itself if it exists, else the bundled example file of that name, else ``path`` unchanged."""
    path = Path(path)
    if path.exists() or path.parent != Path("."):
        return path
    bundled = files("siglearn").joinpath("data", path.name)
    return Path(str(bundled)) if bundled.is_file() else path


def parse_game_spec(path) -> GameSpec:
    """Parse a spec file; a bare name not found locally falls back to the bundled examples."""
    path = resolve_input(path)
    return parse_game_spec_text(path.read_text(encoding="utf-8"), str(path))


def _fmt(x) -> str:
    x = Fraction(x) if not isinstance(x, float) else Fraction(repr(x))
    return str(x)


def dump_game_spec(spec: GameSpec) -> str:
    """Text that parses back to an equal spec."""
    g, p = spec.game, spec.params
    out = ["[game]"]
    if g.name:
        out.append(f"name = {g.name}")
    out += [f"types = {' '.join(g.types)}", f"prior = {' '.join(_fmt(x) for x in g.prior)}",
            f"signals = {' '.join(g.signals)}", f"actions = {' '.join(g.actions)}", ""]
    for which, u in (("u1", g.u1), ("u2", g.u2)):
        out.append(f"[{which}]")
        for i, t in enumerate(g.types):
            for j, s in enumerate(g.signals):
                for k, a in enumerate(g.actions):
                    out.append(f"{t} {s} {a} {_fmt(u[i][j][k])}")
        out.append("")
    if spec.separable:
        v, z = spec.separable
        out.append("[separable]")
        for i, t in enumerate(g.types):
            for j, s in enumerate(g.signals):
                out.append(f"v {t} {s} {_fmt(v[i][j])}")
        for k, a in enumerate(g.actions):
            out.append(f"z {a} {_fmt(z[k])}")
        out.append("")

    def prior_block(sp, rp):
        rows = [f"sender {s} = {' '.join(_fmt(x) for x in sp[j])}" for j, s in enumerate(g.signals)]
        rows += [f"receiver {t} = {' '.join(_fmt(x) for x in rp[i])}" for i, t in enumerate(g.types)]
        return rows

    out.append("[priors]")
    out += prior_block(p.sender_prior, p.receiver_prior)
    out.append("")
    for n, (w, sp, rp) in enumerate(p.prior_mixture or ()):
        out.append(f"[mixture c{n}]")
        out.append(f"weight = {_fmt(w)}")
        out += prior_block(sp, rp)
        out.append("")
    out.append("[defaults]")
    d = dict(spec.defaults)
    d["delta"], d["gamma"], d["tie"] = p.delta, p.gamma, p.tie
    for key in DEFAULTS:
        val = d.get(key, DEFAULTS[key])
        if val is None:
            continue
        out.append(f"{key} = {val if isinstance(val, (int, str)) else _fmt(val)}")
    return "\n".join(out) + "\n"


# -- profiles ----------------------------------------------------------------

def _num_text(x):
    return str(x) if isinstance(x, Fraction) else float(x)


def profile_to_dict(game: SignallingGame, profile: StrategyProfile) -> dict:
    """Profile block as used in reports: exact entries become "p/q" strings, floats stay numbers."""
    return {
        "sender": {t: {s: _num_text(profile.pi1[i][j]) for j, s in enumerate(game.signals)}
                   for i, t in enumerate(game.types)},
        "receiver": {s: {a: _num_text(profile.pi2[j][k]) for k, a in enumerate(game.actions)}
                     for j, s in enumerate(game.signals)},
    }


def profile_from_dict(game: SignallingGame, data: dict) -> StrategyProfile:
    def val(x):
        return parse_number(x) if isinstance(x, str) else x
    if "sender" not in data or "receiver" not in data:
        raise ValueError("profile needs 'sender' and 'receiver' blocks")
    pi1 = {t: {s: val(x) for s, x in row.items()} for t, row in data["sender"].items()}
    pi2 = {s: {a: val(x) for a, x in row.items()} for s, row in data["receiver"].items()}
    return StrategyProfile.from_dicts(game, pi1, pi2)


def load_profile(game: SignallingGame, path) -> StrategyProfile:
    data = json.loads(resolve_input(path).read_text(encoding="utf-8"))
    if "profile" in data and "sender" not in data:
        data = data["profile"]
    return profile_from_dict(game, data)
