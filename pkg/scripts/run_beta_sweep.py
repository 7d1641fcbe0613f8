#!/usr/bin/env python3
"""Sweep the stability weight on the circle environment.

Runs the same agent at each beta and tabulates final-window task reward,
stability reward, and the opponent strategy change fraction. The interesting
shape: intermediate beta beats both extremes on task reward, and any
sufficiently large beta pins the opponent.
"""

import argparse
import json
import os

from sili.harness import ExperimentConfig, sweep_beta

HERE = os.path.dirname(os.path.abspath(__file__))
DEFAULT_CONFIG = os.path.join(HERE, "configs", "sweep_circle3.json")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=DEFAULT_CONFIG)
    parser.add_argument("--betas", default="0,0.4,0.5,0.6,0.8,1.0",
                        help="comma-separated stability weights in [0, 1]")
    args = parser.parse_args()

    with open(args.config) as fh:
        cfg = ExperimentConfig.from_dict(json.load(fh))
    betas = [float(b) for b in args.betas.split(",") if b != ""]

    results = sweep_beta(cfg, betas)
    print(f"{'beta':>6} {'task':>9} {'stability':>10} {'changed':>8}")
    for row in results:
        if row["error"]:
            print(f"{row['beta']:>6g}  aborted: {row['error']}")
        else:
            print(f"{row['beta']:>6g} {row['task_reward']:>9.1f} "
                  f"{row['stability_reward']:>10.2f} "
                  f"{row['changed_fraction']:>8.2f}")
    print(f"wrote {os.path.join(cfg.outdir, 'beta_sweep.csv')}")


if __name__ == "__main__":
    main()
