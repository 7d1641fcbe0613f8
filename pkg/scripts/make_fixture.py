#!/usr/bin/env python3
"""Regenerate the representation-learning fixture dataset on disk.

Writes the 200-interaction scripted corpus in the trajectory log format plus
a CSV of ground-truth strategy labels. The test suite builds the same data in
memory; this script exists so the corpus can be inspected or reused.
"""

import argparse
import csv
import os

from sili.core import write_trajectory_log
from sili.fixture import FIXTURE_INTERACTIONS, FIXTURE_SEED, build_fixture


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="runs/fixture")
    parser.add_argument("--interactions", type=int, default=FIXTURE_INTERACTIONS)
    parser.add_argument("--seed", type=int, default=FIXTURE_SEED)
    args = parser.parse_args()

    buffer, strategy_ids = build_fixture(args.interactions, args.seed)
    os.makedirs(args.outdir, exist_ok=True)
    log_path = os.path.join(args.outdir, "fixture.jsonl")
    write_trajectory_log(log_path, (buffer.get(j) for j in buffer.stored_indices()))
    labels_path = os.path.join(args.outdir, "labels.csv")
    with open(labels_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["interaction", "strategy"])
        for j, sid in enumerate(strategy_ids, start=1):
            writer.writerow([j, sid])
    print(f"wrote {log_path} and {labels_path} ({args.interactions} interactions)")


if __name__ == "__main__":
    main()
