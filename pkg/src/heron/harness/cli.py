"""Command-line entry point: ``heron <subcommand> --config FILE --seed N``.

Outputs go under ``$HERON_OUTPUT_ROOT`` (default ``./runs``).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..core import HeronError, compute_margins, read_segment_records, write_segment_records
from ..elicit import build_preference_dataset, utilization_fractions, write_dataset
from .config import ExperimentConfig, ShiftSpec, load_config
from .experiment import (eval_env, evaluate, hierarchy_of, output_root, run_experiment,
                         trace_segments)
from .persist import load_policy
from .studies import (ablate_alpha, ablate_delta, export_plots, first_vs_last_study,
                      robustness_study)

log = logging.getLogger("heron")


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig().validate()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def cmd_train(args) -> int:
    cfg = _config(args)
    records = run_experiment(cfg)
    for rec in records:
        print(json.dumps({"seed": rec.seed, "final_return": rec.final.mean_return,
                          "run_dir": str(rec.directory)}))
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    policy, meta = load_policy(args.policy)
    if meta.get("environment") not in (None, cfg.environment):
        raise HeronError(f"policy was trained on {meta['environment']!r}, "
                         f"config selects {cfg.environment!r}")
    episodes = args.episodes or cfg.eval_episodes
    seed = cfg.seeds[0] if args.seed is None else args.seed
    trace = [] if args.trace else None
    res = evaluate(policy, eval_env(cfg), episodes, seed, trace)
    out = {"mean_return": res.mean_return, "signal_means": res.signal_means,
           "episodes": episodes, "seed": seed}
    if trace is not None:
        segs = trace_segments(trace, args.segment_length or cfg.segment_length)
        out["trace_rows"] = write_segment_records(args.trace, segs)
    print(json.dumps(out, sort_keys=True))
    return 0


def cmd_elicit(args) -> int:
    cfg = _config(args)
    segments = read_segment_records(args.trace)
    h = hierarchy_of(cfg)
    margins = compute_margins(segments, h, cfg.margin_multiplier)
    seed = cfg.seeds[0]
    ds = build_preference_dataset(segments, h, margins, args.pairs or cfg.pairs_per_round,
                                  np.random.default_rng(seed))
    out = Path(args.out) if args.out else output_root() / "elicit" / f"{Path(args.trace).stem}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(out, ds)
    out.with_suffix(".utilization.txt").write_text(ds.stats.to_text())
    print(json.dumps({"dataset": str(out), "pairs": len(ds), "margins": list(margins.deltas),
                      "utilization": utilization_fractions(ds.stats)}))
    return 0


def cmd_study(args) -> int:
    cfg = _config(args)
    if args.kind == "flexibility":
        report = first_vs_last_study(cfg, args.signals)
        print(json.dumps(report["verdicts"], indent=2))
    elif args.kind == "robustness":
        shift = None
        if args.shift_param is not None:
            step = args.shift_step if args.shift_step is not None else cfg.total_steps // 2
            shift = ShiftSpec(args.shift_param, args.shift_value, step)
        report = robustness_study(cfg, shift)
        print(json.dumps(report["ratios"], indent=2))
    elif args.kind == "ablate-delta":
        report = ablate_delta(cfg, args.values or (0.0, 0.5, 1.0, 2.0))
        print(json.dumps(report["arms"], indent=2))
    else:
        report = ablate_alpha(cfg, args.values or (1.0, 2.0, 3.0))
        print(json.dumps(report["arms"], indent=2))
    return 0


def cmd_export_plots(args) -> int:
    _config(args)
    for path in export_plots(args.root, args.out):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config (defaults if omitted)")
    common.add_argument("--seed", type=int, help="run only this seed")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="heron", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train every seed of one config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="evaluate a saved policy")
    p.add_argument("--policy", required=True, help="policy directory from a run")
    p.add_argument("--episodes", type=int)
    p.add_argument("--trace", help="also write the rollouts as segment records here")
    p.add_argument("--segment-length", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("elicit", parents=[common], help="label pairs from a segment trace")
    p.add_argument("--trace", required=True, help="segment record CSV")
    p.add_argument("--pairs", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_elicit)

    p = sub.add_parser("study", parents=[common], help="run a comparative study")
    p.add_argument("kind", choices=["flexibility", "robustness", "ablate-delta", "ablate-alpha"])
    p.add_argument("--signals", nargs="+", default=["vl", "q", "fl"],
                   help="flexibility: signals to move first vs last")
    p.add_argument("--values", nargs="+", type=float, help="ablation grid")
    p.add_argument("--shift-param")
    p.add_argument("--shift-value", type=float, default=1.0)
    p.add_argument("--shift-step", type=int)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("export-plots", parents=[common], help="curve CSVs from run metrics")
    p.add_argument("--root", help="directory to scan (default: output root)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_plots)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except HeronError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
