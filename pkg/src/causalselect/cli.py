"""Command-line interface.

Subcommands: ``simulate`` (dataset CSV from a config), ``select`` (risk table
for one dataset), ``ntv`` (overlap of one dataset), ``campaign`` (full
results CSV). Progress goes to stderr; results go only to the output file or
stdout. Exit code 0 on success, 1 with a one-line ``error: ...`` message on
failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .campaign import CampaignConfig, config_from_json, recipe, run_campaign
from .candidates import caussim_family, gbt_family
from .datagen import SimConfig, simulate
from .dataset_io import ingest_csv, write_dataset_csv
from .errors import CausalSelectError, ConfigurationError
from .overlap import ntv, ntv_plugin
from .selection import SelectionConfig, run_selection


def _sim_config_from_json(path: str) -> SimConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"invalid simulate JSON: {exc}") from exc
    try:
        return SimConfig(**payload)
    except TypeError as exc:
        raise ConfigurationError(f"bad simulate config: {exc}") from exc


def _cmd_simulate(args) -> int:
    cfg = _sim_config_from_json(args.config)
    data = simulate(cfg)
    write_dataset_csv(data, args.out)
    print(f"wrote {data.n} rows to {args.out}", file=sys.stderr)
    return 0


def _cmd_select(args) -> int:
    data = ingest_csv(args.data)
    if args.family == "caussim_120":
        family = caussim_family(seed=args.seed)
    else:
        family = gbt_family()
    cfg = SelectionConfig(
        procedure=args.procedure,
        train_frac=args.train_frac,
        test_frac=args.test_frac,
        nuisance_frac=args.nuisance_frac,
        nuisance_variant=args.nuisance,
        hp_budget=args.hp_budget,
        seed=args.seed,
    )
    run = run_selection(data, family, cfg)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write(run.risk_table.to_csv())
    for name, cid in sorted(run.selected.items()):
        print(f"selected[{name}] = {cid}", file=sys.stderr)
    return 0


def _cmd_ntv(args) -> int:
    data = ingest_csv(args.data)
    source = args.source
    if source == "auto":
        source = "oracle" if data.e is not None else "plugin_gbt"
    if source == "oracle":
        if data.e is None:
            raise ConfigurationError("oracle NTV needs the e column in the CSV")
        value = ntv(data.e, float(np.mean(data.a)))
        calibrated = False
    else:
        report = ntv_plugin(
            data,
            model=source.removeprefix("plugin_"),
            calibrate=args.calibrated,
            seed=args.seed,
        )
        value, calibrated = report.ntv, report.calibrated
    print(f"{value:.17g},{source},{str(calibrated).lower()}")
    return 0


def _cmd_campaign(args) -> int:
    if (args.config is None) == (args.recipe is None):
        raise ConfigurationError("pass exactly one of --config or --recipe")
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg: CampaignConfig = config_from_json(fh.read())
    else:
        cfg = recipe(args.recipe)
    run_campaign(cfg, args.out, jobs=args.jobs, quiet=args.quiet)
    print(f"campaign {cfg.name!r} written to {args.out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalselect",
        description="Generate causal benchmarks, run model selection, measure overlap.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a dataset CSV from a JSON config")
    p.add_argument("--config", required=True, help="SimConfig JSON file")
    p.add_argument("--out", required=True, help="output dataset CSV")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("select", help="risk table for one dataset CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--family", choices=("caussim_120", "gbt_18"), default="caussim_120")
    p.add_argument("--procedure", choices=("shared", "separate"), default="shared")
    p.add_argument("--nuisance", choices=("oracle", "linear", "stacked"), default="stacked")
    p.add_argument("--train-frac", type=float, default=0.9)
    p.add_argument("--test-frac", type=float, default=0.1)
    p.add_argument("--nuisance-frac", type=float, default=0.0)
    p.add_argument("--hp-budget", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("ntv", help="overlap of a dataset CSV, as one CSV line")
    p.add_argument("--data", required=True)
    p.add_argument(
        "--source",
        choices=("auto", "oracle", "plugin_linear", "plugin_gbt"),
        default="auto",
    )
    p.add_argument("--calibrated", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_ntv)

    p = sub.add_parser("campaign", help="run a campaign to a results CSV")
    p.add_argument("--config", help="CampaignConfig JSON file")
    p.add_argument(
        "--recipe",
        choices=("fig4_desk", "fig6_desk", "fig7_desk", "fig8_desk"),
        help="named desk-scale recipe instead of --config",
    )
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_campaign)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CausalSelectError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
