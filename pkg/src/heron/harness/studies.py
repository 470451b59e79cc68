"""Comparative studies built from single-seed runs.

Each study trains several arms over the config's seeds, writes every run
under ``<root>/<study>/<arm>/seed_<k>/`` and a flat ``report.csv`` with one
row per (arm, seed), and returns the report rows plus per-arm summaries.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..core import InvalidInputError
from .config import ENVIRONMENTS, ExperimentConfig, ShiftSpec
from .experiment import output_root, read_metrics, return_ratio, run_seed, summarize

log = logging.getLogger(__name__)


def _run_arms(study: str, arms: Sequence[tuple], root=None, write_runs: bool = True) -> list:
    """``arms`` is a list of ``(arm_name, config)``; returns report rows."""
    base = output_root(root) / study
    rows = []
    for arm, cfg in arms:
        cfg = replace(cfg, name=arm).validate()
        for seed in cfg.seeds:
            directory = base / arm / f"seed_{seed}" if write_runs else None
            rec = run_seed(cfg, int(seed), directory)
            row = {"arm": arm, "seed": int(seed), "final_return": rec.final.mean_return}
            row.update({f"z_{k}": v for k, v in rec.final.signal_means.items()})
            rows.append(row)
            log.info("%s/%s seed %s: %.2f", study, arm, seed, rec.final.mean_return)
    if write_runs:
        write_report(base / "report.csv", rows)
    return rows


def write_report(path, rows: list) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    keys = list(rows[0]) if rows else ["arm", "seed", "final_return"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        w.writerows(rows)


def arm_summary(rows: list, column: str = "final_return") -> dict:
    out: dict = {}
    for arm in dict.fromkeys(r["arm"] for r in rows):
        out[arm] = summarize([r[column] for r in rows if r["arm"] == arm])
    return out


def _write_summary(study: str, summary: dict, root, write_runs: bool) -> None:
    if write_runs:
        path = output_root(root) / study / "summary.json"
        path.write_text(json.dumps(summary, indent=2, sort_keys=True))


# -- flexibility ----------------------------------------------------------------

def first_and_last(signal: str, order: Sequence[str]) -> tuple:
    """The base order with ``signal`` moved to the top, and to the bottom."""
    if signal not in order:
        raise InvalidInputError(f"hierarchy: unknown signal {signal!r}")
    rest = [s for s in order if s != signal]
    return tuple([signal] + rest), tuple(rest + [signal])


def flexibility_study(cfg: ExperimentConfig, hierarchies: Sequence[Sequence[str]], root=None,
                      write_runs: bool = True) -> dict:
    """One HERON arm per hierarchy; reports per-signal evaluation means."""
    if len(hierarchies) < 2:
        raise InvalidInputError("flexibility study needs at least 2 hierarchies")
    arms = []
    for h in hierarchies:
        name = "-".join(h)
        arms.append((name, replace(cfg, hierarchy=tuple(h))))
    rows = _run_arms("flexibility", arms, root, write_runs)
    summary = {arm: {k[2:]: summarize([r[k] for r in rows if r["arm"] == arm])["mean"]
                     for k in rows[0] if k.startswith("z_")}
               for arm in dict.fromkeys(r["arm"] for r in rows)}
    _write_summary("flexibility", summary, root, write_runs)
    return {"rows": rows, "signal_means": summary}


def first_vs_last_study(cfg: ExperimentConfig, signals: Sequence[str], root=None,
                        write_runs: bool = True) -> dict:
    """For each tested signal, does ranking it first beat ranking it last?

    Signal means are compared sense-adjusted, so for a cost signal a lower
    raw mean counts as better.
    """
    names, senses = ENVIRONMENTS[cfg.environment]
    order = cfg.resolved_hierarchy
    hierarchies = []
    for s in signals:
        hierarchies.extend(first_and_last(s, order))
    hierarchies = list(dict.fromkeys(hierarchies))
    report = flexibility_study(cfg, hierarchies, root, write_runs)
    verdicts = {}
    for s in signals:
        first, last = ("-".join(h) for h in first_and_last(s, order))
        sense = senses[names.index(s)]
        a = report["signal_means"][first][s]
        b = report["signal_means"][last][s]
        verdicts[s] = {"first": a, "last": b, "improved": bool(sense * a > sense * b)}
    report["verdicts"] = verdicts
    _write_summary("flexibility", {"signal_means": report["signal_means"],
                                   "verdicts": verdicts}, root, write_runs)
    return report


# -- robustness -----------------------------------------------------------------

HIGH_LR, LOW_LR = 1e-3, 1e-5


def robustness_study(cfg: ExperimentConfig, shift: Optional[ShiftSpec] = None, root=None,
                     write_runs: bool = True, low_lr: bool = True) -> dict:
    """HERON and engineered rewards (high and low learning rate) trained with
    a mid-run shift, each against a control trained on the post-shift
    environment throughout; both evaluated post-shift."""
    pre_params = dict(cfg.env_params)
    shift = shift or cfg.shift
    if shift is None:
        # default: capacity halves at mid-run, from twice the configured rate back to it
        rate = int(pre_params.get("discharge_rate", 1))
        pre_params["discharge_rate"] = 2 * rate
        shift = ShiftSpec("discharge_rate", rate, cfg.total_steps // 2)
    heron_src = cfg.reward_source if cfg.reward_source.startswith("heron") else "heron"
    post_params = {**pre_params, shift.param: shift.value}
    if shift.param == "discharge_rate":
        post_params[shift.param] = int(shift.value)
    methods = [("heron", replace(cfg, reward_source=heron_src)),
               ("engineered-high-lr", replace(cfg, reward_source="engineered", policy_lr=HIGH_LR))]
    if low_lr:
        methods.append(("engineered-low-lr",
                        replace(cfg, reward_source="engineered", policy_lr=LOW_LR)))
    arms = []
    for name, mcfg in methods:
        arms.append((f"{name}-shifted", replace(mcfg, shift=shift, env_params=pre_params)))
        arms.append((f"{name}-control", replace(mcfg, shift=None, env_params=post_params)))
    rows = _run_arms("robustness", arms, root, write_runs)
    summary = arm_summary(rows)
    ratios = {}
    for name, _ in methods:
        s = summary[f"{name}-shifted"]["mean"]
        c = summary[f"{name}-control"]["mean"]
        ratios[name] = {"shifted": s, "control": c, "ratio": return_ratio(s, c)}
    _write_summary("robustness", {"arms": summary, "ratios": ratios}, root, write_runs)
    return {"rows": rows, "arms": summary, "ratios": ratios, "shift": shift}


# -- ablations --------------------------------------------------------------------

def ablate_delta(cfg: ExperimentConfig, multipliers: Sequence[float] = (0.0, 0.5, 1.0, 2.0),
                 root=None, write_runs: bool = True) -> dict:
    arms = [(f"delta-{m:g}", replace(cfg, reward_source="heron", margin_multiplier=float(m)))
            for m in multipliers]
    rows = _run_arms("ablate-delta", arms, root, write_runs)
    summary = arm_summary(rows)
    _write_summary("ablate-delta", summary, root, write_runs)
    return {"rows": rows, "arms": summary}


def ablate_alpha(cfg: ExperimentConfig, alphas: Sequence[float] = (1.0, 2.0, 3.0), root=None,
                 write_runs: bool = True) -> dict:
    arms = [(f"alpha-{a:g}", replace(cfg, reward_source="heron" if a == 1 else "heron-scaled",
                                     reward_alpha=float(a)))
            for a in alphas]
    rows = _run_arms("ablate-alpha", arms, root, write_runs)
    summary = arm_summary(rows)
    _write_summary("ablate-alpha", summary, root, write_runs)
    return {"rows": rows, "arms": summary}


# -- plot exports -------------------------------------------------------------------

def export_plots(root=None, out_dir=None) -> list:
    """Collect every ``metrics.jsonl`` below ``root`` into per-study curve CSVs.

    Runs are grouped by their parent directory (the arm); each CSV row holds
    the mean and std of the evaluation return across seeds at one step.
    """
    root = output_root(root)
    out_dir = Path(out_dir) if out_dir is not None else root / "plots"
    groups: dict = {}
    for path in sorted(root.rglob("metrics.jsonl")):
        if out_dir in path.parents:
            continue
        arm_dir = path.parent.parent
        rel = arm_dir.relative_to(root)
        study = rel.parts[0] if len(rel.parts) > 1 else "runs"
        arm = "/".join(rel.parts[1:]) if len(rel.parts) > 1 else rel.parts[0] if rel.parts else "run"
        for row in read_metrics(path):
            groups.setdefault(study, {}).setdefault(arm, {}).setdefault(row["step"], []).append(
                row["eval_return"])
    written = []
    out_dir.mkdir(parents=True, exist_ok=True)
    for study, arms in sorted(groups.items()):
        path = out_dir / f"{study}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["arm", "step", "mean_return", "std_return", "n"])
            for arm, steps in sorted(arms.items()):
                for step in sorted(steps):
                    v = np.asarray(steps[step])
                    w.writerow([arm, step, repr(float(v.mean())), repr(float(v.std())), v.size])
        written.append(path)
    return written
