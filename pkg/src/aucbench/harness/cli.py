"""Command line entry point: ``aucbench {train,sweep,bench-time,eval}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..errors import ConfigError, DataError
from ..metrics import auroc
from ..model import Mlp
from .config import ExperimentConfig, load_config, resolve_dataset
from .sweep import emit_results, render_csv, render_json, run_sweep
from .timing import DEFAULT_PAIRS, time_iterations
from .trial import train_trial

log = logging.getLogger("aucbench")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3


def _config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "dataset", None):
        config = config.with_override("dataset.source", args.dataset)
    if getattr(args, "seed", None) is not None:
        config = config.with_override("seeds", (args.seed,))
    return config


def _write(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_train(args) -> int:
    config = _config(args)
    dataset = resolve_dataset(config.dataset.source, config.dataset.label_column)
    result, model = train_trial(config, dataset, args.fold, config.seeds[0])
    _write(json.dumps(result.to_dict(), indent=2) + "\n", args.out)
    if result.diverged:
        log.error("trial diverged: %s", result.failure)
        return EXIT_DIVERGED
    log.info("best epoch %d: val %.4f test %.4f", result.best_epoch, result.best_val_auroc, result.test_at_best)
    if args.save_model:
        model.save(args.save_model)
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _config(args)
    dataset = resolve_dataset(config.dataset.source, config.dataset.label_column)
    table = run_sweep(config, dataset, jobs=args.jobs)
    if args.out:
        emit_results(table, args.out, args.format)
    else:
        sys.stdout.write(render_csv(table) if args.format == "csv" else render_json(table))
    if table.total_trials and table.total_failures == table.total_trials:
        log.error("all %d trials diverged", table.total_trials)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_bench_time(args) -> int:
    rows = time_iterations(DEFAULT_PAIRS, batch_size=args.batch_size, repeats=args.repeats,
                           iterations=args.iterations, seed=args.seed or 0)
    if args.format == "json":
        payload = {k: {"mean_ms": r.mean, "std_ms": r.std, "repeats_ms": list(r.ms)} for k, r in rows.items()}
        text = json.dumps(payload, indent=2) + "\n"
    else:
        lines = ["loss,mean_ms,std_ms,repeats,display"]
        lines += [f"{k},{r.mean:.6f},{r.std:.6f},{len(r.ms)},{r.display}" for k, r in rows.items()]
        text = "\n".join(lines) + "\n"
    _write(text, args.out)
    for pairwise, composite in DEFAULT_PAIRS:
        if rows[composite].mean > rows[pairwise].mean:
            log.warning("%s (%.3f ms) slower than %s (%.3f ms) on this machine",
                        composite, rows[composite].mean, pairwise, rows[pairwise].mean)
    return EXIT_OK


def cmd_eval(args) -> int:
    try:
        model = Mlp.load(args.checkpoint)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load checkpoint {args.checkpoint}: {exc}") from exc
    dataset = resolve_dataset(args.dataset, args.label_column)
    value = auroc(model.raw_scores(dataset.X), dataset.y)
    _write(json.dumps({"dataset": dataset.name, "n": len(dataset), "auroc": value}) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aucbench", description="Deep AUROC maximization benchmarks")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def verbose(p):
        # SUPPRESS keeps a flag given before the subcommand from being reset here
        p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    def common(p, dataset=True):
        verbose(p)
        p.add_argument("--config", help="experiment config (JSON)")
        if dataset:
            p.add_argument("--dataset", help="CSV path or synth:n=..,dim=..,pr=..,sep=..,seed=..")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("train", help="run a single trial")
    common(p)
    p.add_argument("--fold", type=int, default=0)
    p.add_argument("--save-model", help="write the trained network checkpoint here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="run a hyperparameter sweep and write a mean(std) table")
    common(p)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench-time", help="time pairwise vs composite iterations")
    common(p, dataset=False)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--iterations", type=int, default=40)
    p.add_argument("--batch-size", type=int, default=64)
    p.set_defaults(func=cmd_bench_time)

    p = sub.add_parser("eval", help="AUROC of a saved model on a labelled dataset")
    verbose(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--label-column", default="label")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except DataError as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
