#!/usr/bin/env python3
"""Balance-coefficient sweep on the contrastive arm: constant values plus the
linearly ramped schedule, each over the canonical seed set.

Usage:
    python scripts/lambda_sweep.py --out results/ [--epochs 60]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from cedr.config import ExperimentConfig
from cedr.data import PerturbationConfig, build_dataset, default_shape_specs
from cedr.train import run_lambda_grid


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results", type=Path)
    ap.add_argument("--epochs", type=int, default=60)
    ap.add_argument("--seeds", default="0 1 2 3 4")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    perturb = PerturbationConfig(translate_frac=0.3, clutter_fraction=0.05,
                                 occlusion_radius_frac=0.1)
    dataset = build_dataset(default_shape_specs(), 80, 16, seed=0,
                            perturb=perturb, n_points=128)
    base = ExperimentConfig(arm="full", epochs=args.epochs, batch_size=32,
                            hidden_dims=[32, 64], n_points=128,
                            temperature=0.5)
    seeds = tuple(int(x) for x in args.seeds.replace(",", " ").split())
    result = run_lambda_grid(
        base, dataset, seeds=seeds,
        progress=lambda row: print(f"{row['variant']} seed {row['seed']}: "
                                   f"overall_acc={row['overall_acc']:.4f}",
                                   flush=True))
    result.write_csv(args.out / "lambda_grid.csv")
    print(f"\nwrote {args.out / 'lambda_grid.csv'}")


if __name__ == "__main__":
    main()
