"""Command-line experiment driver.

Subcommands: gen-data, train, eval-sweep, analyze, lambda-sweep. Every run
is fully described by one JSON config; --seed and --out override the config,
--precision selects the float width. Exit code 0 on success, 1 on any
structured error.
"""

from __future__ import annotations

import argparse
import sys

from .autodiff import set_precision
from .config import ExperimentConfig
from .errors import LoopLabError
from . import runner


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", default=None, help="override output directory")
    p.add_argument("--seed", type=int, default=None, help="override global seed")
    p.add_argument(
        "--precision",
        type=int,
        choices=(32, 64),
        default=64,
        help="float width for all computation",
    )


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    if args.out is not None:
        cfg.output_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    set_precision(args.precision)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="looplab",
        description=(
            "Train, evaluate, and analyze looped transformer models on the "
            "multi-digit addition testbed."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write the training dataset file")
    _add_common(p)

    p = sub.add_parser("train", help="run the configured training steps")
    _add_common(p)
    p.add_argument("--resume", action="store_true", help="continue from the latest checkpoint")

    p = sub.add_parser("eval-sweep", help="sweep test-time loop depth")
    _add_common(p)
    p.add_argument("--checkpoint", default=None, help="checkpoint path (default: run's final)")

    p = sub.add_parser("analyze", help="trajectory/PCA/spectral analysis of one input")
    _add_common(p)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--sample", default=None, help='input like "12+34=46"')
    p.add_argument("--t", type=int, default=None, help="loop depth to unroll")

    p = sub.add_parser("lambda-sweep", help="one training run per regularization weight")
    _add_common(p)
    p.add_argument(
        "--lambdas",
        default="0.05,0.1,0.15,0.2",
        help="comma-separated regularization weights",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.command == "gen-data":
            path = runner.gen_data(cfg)
            print(f"wrote {path}")
        elif args.command == "train":
            artifacts = runner.train_run(cfg, resume=args.resume)
            print(f"final checkpoint: {artifacts.final_checkpoint}")
        elif args.command == "eval-sweep":
            points = runner.eval_sweep_run(cfg, checkpoint=args.checkpoint)
            for p in points:
                print(
                    f"t={p.t:<4d} accuracy={p.accuracy:.4f} "
                    f"norm={p.mean_state_norm:.3f} rho={p.mean_rho_estimate:.3f}"
                )
        elif args.command == "analyze":
            doc = runner.analyze_run(
                cfg,
                checkpoint=args.checkpoint,
                sample_text=args.sample,
                t_max=args.t,
            )
            print(
                f"input {doc['input']}: verdict={doc['convergence']['verdict']} "
                f"final rho={doc['probes'][-1]['rho_estimate']:.4f}"
            )
        elif args.command == "lambda-sweep":
            lambdas = [float(x) for x in args.lambdas.split(",") if x.strip()]
            runner.lambda_sweep_run(cfg, lambdas)
            print(f"lambda sweep finished for {lambdas}")
    except LoopLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
