"""
lpssl - command line entry point
"""

import argparse
import json
import logging
import sys
from typing import Any

from dotenv import load_dotenv

from .config import ExperimentConfig, load_config
from .errors import ConfigError, LPSSLError

logger = logging.getLogger(__name__)

# CLI flag -> config key
FLAG_KEYS = {
    "dataset": "dataset_path",
    "seed": "seed",
    "out": "out_dir",
    "k": "k",
    "gamma": "gamma",
    "alpha": "alpha",
    "label_fraction": "label_fraction",
    "hidden_dim": "hidden_dim",
}


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Flat key = value config file.")
    common.add_argument("--dataset", help="label,text CSV (dataset_path).")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="Output directory (out_dir).")
    common.add_argument("--k", type=int, help="Nearest neighbors per point.")
    common.add_argument("--gamma", type=float, help="Affinity exponent.")
    common.add_argument("--alpha", type=float, help="Diffusion parameter in (0, 1).")
    common.add_argument("--label-fraction", type=float)
    common.add_argument("--hidden-dim", type=int)
    common.add_argument("--epochs", help="Epochs per stage as M,E,N.")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="Any other config key; repeatable.")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging.")
    return common


def _parse_epochs(text: str) -> dict[str, str]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3 or not all(parts):
        raise ConfigError(f"--epochs expects M,E,N, got '{text}'")
    return dict(zip(("epochs_m", "epochs_e", "epochs_n"), parts))


def _parse_assignment(text: str, flag: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"{flag} expects KEY=VALUE, got '{text}'")
    return key.strip(), value.strip()


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    overrides: dict[str, Any] = {}
    for item in args.set:
        key, value = _parse_assignment(item, "--set")
        overrides[key] = value
    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = value
    if args.epochs:
        overrides.update(_parse_epochs(args.epochs))
    return overrides


def _config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config, _overrides(args))
    config_errors = cfg.validate()
    if config_errors:
        for error in config_errors:
            logger.error(f"❌ {error}")
        raise ConfigError(f"Invalid configuration ({len(config_errors)} problem(s))")
    logger.info(f"✅ Config OK ({cfg.digest})")
    return cfg


def _sweep(args: argparse.Namespace) -> dict[str, list[str]]:
    sweep: dict[str, list[str]] = {}
    for item in args.sweep:
        key, values = _parse_assignment(item, "--sweep")
        sweep[key] = [v.strip() for v in values.split(",") if v.strip()]
    shortcuts = {
        "label_fraction": args.label_fractions,
        "hidden_dim": args.hidden_dims,
        "k": args.ks,
        "vocab_max_size": args.vocab_sizes,
    }
    for key, values in shortcuts.items():
        if values:
            sweep[key] = [v.strip() for v in values.split(",") if v.strip()]
    unknown = sorted(set(sweep) - set(ExperimentConfig.field_types()))
    if unknown:
        raise ConfigError(f"Unknown sweep axes: {', '.join(unknown)}")
    if not sweep:
        raise ConfigError("grid needs at least one --sweep KEY=V1,V2 (or a shortcut flag)")
    return sweep


def _print(payload: Any) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True, default=str))


def _cmd_prepare(args):
    from .embeddings import embedding_stats
    from .pipeline import prepare

    prepared = prepare(_config(args))
    _print({
        "vocab_size": len(prepared.vocab),
        "train_size": len(prepared.train),
        "labeled_count": prepared.train.labeled_count,
        "validation_size": len(prepared.validation),
        "embedding": embedding_stats(prepared.embeddings),
        "artifacts_dir": prepared.directory,
    })


def _cmd_baseline(args):
    from .pipeline import run_baseline

    _print(run_baseline(_config(args)).metrics_payload())


def _cmd_supervised(args):
    from .pipeline import run_fully_supervised

    _print(run_fully_supervised(_config(args)).metrics_payload())


def _cmd_lp(args):
    from .pipeline import propagate_only

    pseudo = propagate_only(_config(args))
    _print({"points": len(pseudo), "seed_points": int(pseudo.source_mask.sum()),
            "class_weights": pseudo.class_weights.tolist()})


def _cmd_run(args):
    from .pipeline import run_experiment

    _print([record.metrics_payload() for record in run_experiment(_config(args))])


def _cmd_grid(args):
    from .pipeline import run_grid

    sweep = _sweep(args)
    result = run_grid(_config(args), sweep)
    _print({"records": len(result.records), "failures": result.failures,
            "summary_csv": result.summary_path, "charts": result.charts})
    if result.failures and not result.records:
        raise LPSSLError("Every grid cell failed")


def _cmd_chart(args):
    from .charts import emit_charts, emit_heatmap, emit_radar_chart, emit_trend_chart
    from .pipeline import load_records

    records = load_records(args.records)
    if not records:
        raise ConfigError(f"No metrics.json files found under {args.records}")
    out = args.out or f"{args.records}/charts"
    paths = []
    for axis in args.axis:
        if axis not in ExperimentConfig.field_types():
            raise ConfigError(f"Unknown chart axis '{axis}'")
        paths.extend(emit_charts(records, axis, out))
        if args.trend:
            paths.append(emit_trend_chart(records, axis, out))
        if args.radar:
            paths.append(emit_radar_chart(records, axis, out))
    if args.heatmap:
        paths.append(emit_heatmap(records, args.axis, out))
    _print([str(p) for p in paths])


def _cmd_synth(args):
    from .synthetic import write_synthetic_csv

    write_synthetic_csv(args.output, n_docs=args.n_docs, seed=args.seed, num_classes=args.num_classes)


def _cmd_serve(args):
    from .server import mcp

    logger.info("🧪 Starting lpssl MCP Server")
    mcp.run()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpssl",
        description="Graph label propagation for semi-supervised text classification",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    common = _common_options()

    for name, func, help_text in (
        ("prepare", _cmd_prepare, "Corpus to indexed artifacts."),
        ("baseline", _cmd_baseline, "Train on the labeled subset only."),
        ("supervised", _cmd_supervised, "Train on every training label."),
        ("lp", _cmd_lp, "Propagate labels and export pseudo-labels."),
        ("run", _cmd_run, "All stages end to end."),
    ):
        sub = commands.add_parser(name, parents=[common], help=help_text)
        sub.set_defaults(func=func)

    grid = commands.add_parser("grid", parents=[common], help="Cartesian sweep of full runs.")
    grid.add_argument("--sweep", action="append", default=[], metavar="KEY=V1,V2",
                      help="Sweep axis; repeatable.")
    grid.add_argument("--label-fractions", help="Shortcut for --sweep label_fraction=...")
    grid.add_argument("--hidden-dims", help="Shortcut for --sweep hidden_dim=...")
    grid.add_argument("--ks", help="Shortcut for --sweep k=...")
    grid.add_argument("--vocab-sizes", help="Shortcut for --sweep vocab_max_size=...")
    grid.set_defaults(func=_cmd_grid)

    chart = commands.add_parser("chart", help="Charts from a directory of finished runs.")
    chart.add_argument("--records", required=True, help="Directory holding run outputs.")
    chart.add_argument("--axis", action="append", required=True, help="Config key to group by; repeatable.")
    chart.add_argument("--out", help="Chart directory (default <records>/charts).")
    chart.add_argument("--trend", action="store_true", help="Also draw metric-vs-axis line charts.")
    chart.add_argument("--heatmap", action="store_true", help="Also draw an accuracy heat map.")
    chart.add_argument("--radar", action="store_true", help="Also draw per-value radar charts of the metrics.")
    chart.add_argument("-v", "--verbose", action="store_true")
    chart.set_defaults(func=_cmd_chart)

    synth = commands.add_parser("synth", help="Write the synthetic review corpus as CSV.")
    synth.add_argument("--output", required=True)
    synth.add_argument("--n-docs", type=int, default=2000)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--num-classes", type=int, default=2)
    synth.add_argument("-v", "--verbose", action="store_true")
    synth.set_defaults(func=_cmd_synth)

    serve = commands.add_parser("serve", help="Run the MCP server over stdio.")
    serve.add_argument("-v", "--verbose", action="store_true")
    serve.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)

    # Configure logging
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s:%(name)s:%(levelname)s: %(message)s",
    )

    try:
        args.func(args)
    except LPSSLError as e:
        logger.error(f"{type(e).__name__}: {str(e)}")
        return e.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
