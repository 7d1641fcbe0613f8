"""Command-line entry point: train, eval, sweep-beta, plot.

Exit codes: 0 success, 2 config error, 3 runtime abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .errors import ConfigError
from .harness import (
    ExperimentConfig,
    MetricsLog,
    evaluate,
    load_checkpoint,
    make_env,
    run_experiment,
    sweep_beta,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _load_config(path, seeds=None) -> ExperimentConfig:
    with open(path) as fh:
        obj = json.load(fh)
    cfg = ExperimentConfig.from_dict(obj)
    if seeds:
        cfg = dataclasses.replace(cfg, seeds=tuple(seeds))
    return cfg


def _cmd_train(args) -> int:
    cfg = _load_config(args.config, args.seed)
    log = run_experiment(cfg)
    for err in log.errors:
        print(f"seed {err['seed']} aborted: {err['error']}", file=sys.stderr)
    print(f"wrote metrics for {len(log.seeds())} seed(s) to {cfg.outdir}")
    return EXIT_RUNTIME if not log.rows else EXIT_OK


def _cmd_eval(args) -> int:
    cfg, bundle = load_checkpoint(args.checkpoint)
    env = make_env(cfg.env, cfg.env_overrides, seed=args.seed)
    res = evaluate(bundle, env, args.episodes, args.seed)
    print(f"mean task return: {res.mean_task}")
    print(f"mean stability return: {res.mean_stability}")
    return EXIT_OK


def _cmd_sweep_beta(args) -> int:
    cfg = _load_config(args.config, args.seed)
    betas = [float(b) for b in args.betas.split(",") if b != ""]
    if not betas or any(not 0.0 <= b <= 1.0 for b in betas):
        raise ConfigError(f"betas must be in [0, 1], got {args.betas!r}")
    results = sweep_beta(cfg, betas)
    for row in results:
        if row["error"]:
            print(f"beta={row['beta']:g}: {row['error']}", file=sys.stderr)
        else:
            print(f"beta={row['beta']:g} task={row['task_reward']:.3f} "
                  f"stability={row['stability_reward']:.3f}")
    return EXIT_RUNTIME if all(r["error"] for r in results) else EXIT_OK


def _cmd_plot(args) -> int:
    from .harness import _plot_curves

    log = MetricsLog.from_csv(args.metrics)
    paths = _plot_curves(log, args.outdir)
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sili",
                                     description="Latent-stability multi-agent lab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run a training experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, action="append",
                   help="override config seeds (repeatable)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep-beta", help="sweep the stability weight")
    p.add_argument("--config", required=True)
    p.add_argument("--betas", required=True, help="comma-separated, e.g. 0,0.5,1")
    p.add_argument("--seed", type=int, action="append")
    p.set_defaults(func=_cmd_sweep_beta)

    p = sub.add_parser("plot", help="re-plot reward curves from a metrics CSV")
    p.add_argument("--metrics", required=True)
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
