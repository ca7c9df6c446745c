"""Report documents: JSON with a fixed key order, trajectory CSV, and matplotlib figures."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__


def digest(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(p if isinstance(p, bytes) else str(p).encode("utf-8"))
        h.update(b"\0")
    return h.hexdigest()


def jsonable(x):
    """Plain JSON values: Fractions become "p/q" strings, numpy scalars and arrays become lists/numbers."""
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else int(x)
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def new_report(command: str, inputs_digest: str, seed, **fields) -> dict:
    rep = {
        "command": command,
        "tool_version": __version__,
        "inputs_digest": inputs_digest,
        "seed": seed,
        "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    rep.update(fields)
    return rep


def write_json(report: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(jsonable(report), indent=2) + "\n", encoding="utf-8")
    return path


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def trajectory_columns(game_info: dict) -> list:
    types, signals, actions = game_info["types"], game_info["signals"], game_info["actions"]
    cols = ["delta", "gamma", "residual", "iterations"]
    cols += [f"pi1[{t}][{s}]" for t in types for s in signals]
    cols += [f"pi2[{s}][{a}]" for s in signals for a in actions]
    return cols


def _flat(profile_block, game_info):
    types, signals, actions = game_info["types"], game_info["signals"], game_info["actions"]
    vals = [profile_block["sender"][t][s] for t in types for s in signals]
    vals += [profile_block["receiver"][s][a] for s in signals for a in actions]
    return [float(Fraction(v)) if isinstance(v, str) else float(v) for v in vals]


def write_trajectory_csv(report: dict, path) -> Path:
    """One row per grid point; columns as in ``trajectory_columns``."""
    path = Path(path)
    info = report["game"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(trajectory_columns(info))
        for row in report["trajectory"]:
            w.writerow([repr(float(row["delta"])), repr(float(row["gamma"])), repr(float(row["residual"])),
                        row["iterations"]] + [repr(v) for v in _flat(row["profile"], info)])
    return path


# -- figures ---------------------------------------------------------------

def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_profile(report_profile: dict, game_info: dict, path, title=""):
    """Bar charts of the sender and receiver strategies."""
    plt = _plt()
    types, signals, actions = game_info["types"], game_info["signals"], game_info["actions"]
    flat = _flat(report_profile, game_info)
    p1 = np.array(flat[:len(types) * len(signals)]).reshape(len(types), len(signals))
    p2 = np.array(flat[len(types) * len(signals):]).reshape(len(signals), len(actions))
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for ax, mat, rows, cols, lab in ((axes[0], p1, types, signals, "sender"),
                                      (axes[1], p2, signals, actions, "receiver")):
        x = np.arange(len(rows))
        width = 0.8 / len(cols)
        for c, name in enumerate(cols):
            ax.bar(x + c * width, mat[:, c], width, label=name)
        ax.set_xticks(x + 0.4 - width / 2, rows)
        ax.set_ylim(0, 1.05)
        ax.set_title(lab)
        ax.legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_trajectory(report: dict, path):
    """Every strategy entry and the residual along the scan's grid."""
    plt = _plt()
    info = report["game"]
    rows = report["trajectory"]
    cols = trajectory_columns(info)[4:]
    data = np.array([_flat(r["profile"], info) for r in rows])
    x = np.arange(len(rows))
    labels = [f"{r['delta']:g}/{1 - r['gamma']:.0e}" for r in rows]
    fig, (ax, ax2) = plt.subplots(2, 1, figsize=(9, 6), sharex=True, gridspec_kw={"height_ratios": [3, 1]})
    for c, name in enumerate(cols):
        ax.plot(x, data[:, c], marker="o", ms=3, label=name)
    ax.set_ylabel("probability")
    ax.legend(fontsize=7, ncol=2)
    ax2.semilogy(x, [max(float(r["residual"]), 1e-16) for r in rows], marker="s", color="k")
    ax2.set_ylabel("residual")
    ax2.set_xticks(x, labels, rotation=45, fontsize=7)
    ax2.set_xlabel("delta / (1 - gamma)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_residuals(residuals, path, title=""):
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.semilogy(np.arange(1, len(residuals) + 1), [max(float(r), 1e-16) for r in residuals], marker=".")
    ax.set_xlabel("iteration")
    ax.set_ylabel("residual (l1)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def render(report: dict, out_dir) -> list:
    """Write the CSV tables and figures belonging to ``report`` into ``out_dir``; return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cmd = report.get("command")
    info = report.get("game")
    paths = []
    if cmd == "scan":
        paths.append(write_trajectory_csv(report, out / "trajectory.csv"))
        paths.append(plot_trajectory(report, out / "trajectory.png"))
        paths.append(plot_profile(report["candidate"]["profile"], info, out / "candidate.png",
                                  "extrapolated candidate"))
    elif cmd == "steady":
        paths.append(write_trajectory_csv({"game": info, "trajectory": [report["result"]]},
                                          out / "steady.csv"))
        paths.append(plot_profile(report["result"]["profile"], info, out / "steady_profile.png",
                                  f"delta={report['result']['delta']:g}, gamma={report['result']['gamma']:g}"))
        paths.append(plot_residuals(report["result"]["residuals"], out / "residuals.png"))
    elif cmd == "analyze" and report.get("profile") is not None:
        paths.append(plot_profile(report["profile"], info, out / "profile.png", "analysed profile"))
    elif cmd == "verify":
        paths.append(_plot_verify(report, out / "verify.png"))
    return paths


def _plot_verify(report, path):
    plt = _plt()
    suites = report["suites"]
    names = list(suites)
    ok = [1 if suites[n]["passed"] else 0 for n in names]
    fig, ax = plt.subplots(figsize=(7, 0.5 + 0.4 * len(names)))
    ax.barh(names, [1] * len(names), color=["tab:green" if o else "tab:red" for o in ok])
    ax.set_xticks([])
    ax.set_title("property suites (green = pass)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
