"""Command-line front end.

``train`` runs one configured experiment, writing the per-epoch CSV and a
learning-curve figure into the output directory. ``compare`` runs two
configs over a seed list and writes per-seed CSVs, summary CSVs and a
comparison figure. Exit code 0 on success, 1 with a message on any error.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .harness import (
    RunConfig,
    compare,
    load_config,
    parse_config_value,
    run,
)

_FLAGGABLE_KEYS = [f for f in RunConfig.__dataclass_fields__]


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    for key in _FLAGGABLE_KEYS:
        parser.add_argument(
            "--" + key.replace("_", "-"),
            dest=key,
            default=None,
            metavar="V",
            help=f"override config key {key}",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddpglab",
        description="Train and compare DDPG / prioritized-DDPG agents "
                    "on built-in continuous-control tasks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run one training experiment")
    train.add_argument("--config", default=None, help="key = value config file")
    train.add_argument("--no-figures", action="store_true",
                       help="skip figure rendering")
    _add_config_flags(train)

    comp = sub.add_parser("compare", help="run two configs over many seeds")
    comp.add_argument("--config-a", required=True)
    comp.add_argument("--config-b", required=True)
    comp.add_argument("--seeds", required=True,
                      help="comma-separated seed list, e.g. 1,2,3")
    comp.add_argument("--out", required=True)
    comp.add_argument("--no-figures", action="store_true")
    return parser


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for key in _FLAGGABLE_KEYS:
        raw = getattr(args, key, None)
        if raw is not None:
            overrides[key] = parse_config_value(key, str(raw))
    return replace(cfg, **overrides)


def _cmd_train(args) -> int:
    cfg = _config_from_args(args)
    if cfg.out is None:
        raise ValueError("an output directory is required (--out or config key)")
    records = run(cfg)
    final = records[-1].overall_reward if records else float("nan")
    print(f"run complete: {len(records)} epochs, overall reward {final}")
    print(f"csv: {os.path.join(cfg.out, 'run.csv')}")
    if not args.no_figures:
        from . import plots

        fig_path = os.path.join(cfg.out, "learning_curve.png")
        plots.save_learning_curve(
            records, fig_path, title=f"{cfg.env} / {cfg.algo} / {cfg.noise}"
        )
        print(f"figure: {fig_path}")
    return 0


def _cmd_compare(args) -> int:
    cfg_a = load_config(args.config_a)
    cfg_b = load_config(args.config_b)
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    result = compare(cfg_a, cfg_b, seeds, out_dir=args.out)
    for label in ("a", "b"):
        print(
            f"config {label}: median final {result.median_final[label]}, "
            f"median aulc {result.median_aulc[label]}, "
            f"aulc wins {result.aulc_wins[label]}"
        )
    print(f"csvs: {os.path.join(args.out, 'compare_runs.csv')}, "
          f"{os.path.join(args.out, 'compare_summary.csv')}")
    if not args.no_figures:
        from . import plots

        fig_path = os.path.join(args.out, "compare.png")
        plots.save_comparison(result, fig_path,
                              title=f"{cfg_a.env}: a vs b")
        print(f"figure: {fig_path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            return _cmd_train(args)
        return _cmd_compare(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
