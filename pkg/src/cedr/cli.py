"""Command-line surface: gen-data, train, ablate, eval, analyze.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint
from .config import ConfigError, ExperimentConfig, apply_overrides, load_config
from .data import (
    PerturbationConfig,
    build_dataset,
    default_shape_specs,
    read_dataset,
    stack_points,
    write_dataset,
)
from .encoder import EncoderConfig, PointEncoder
from .metrics import (
    center_distance_report,
    evaluate,
    export_embeddings,
    write_center_distance_csv,
    write_confusion_csv,
    write_entropy_csv,
    write_summary_json,
)
from .train import NumericFailure, run_ablation, run_lambda_grid, train

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _parse_seeds(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.replace(",", " ").split()]


def _load_experiment(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    overrides = dict(kv.split("=", 1) for kv in (args.set or []))
    if getattr(args, "arm", None):
        overrides["arm"] = args.arm
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = str(args.seed)
    apply_overrides(config, overrides)
    return config.validate()


def model_from_checkpoint(path) -> PointEncoder:
    tensors = load_checkpoint(path)
    hidden = []
    i = 0
    while f"point{i}.w" in tensors:
        hidden.append(tensors[f"point{i}.w"].shape[1])
        i += 1
    if not hidden or "cls.w" not in tensors:
        raise ConfigError(f"checkpoint {path} does not describe an encoder")
    model = PointEncoder(EncoderConfig(num_classes=tensors["cls.w"].shape[1],
                                       hidden_dims=hidden))
    model.load_state(tensors)
    return model


def cmd_gen_data(args) -> int:
    specs = default_shape_specs()[: args.classes]
    if len(specs) < args.classes:
        raise ConfigError(f"at most {len(default_shape_specs())} classes available")
    perturb = PerturbationConfig.none() if args.no_perturb else PerturbationConfig()
    split = build_dataset(specs, args.train, args.test, args.seed,
                          perturb, n_points=args.points)
    train_path, test_path = write_dataset(split, args.out)
    print(f"wrote {len(split.train)} train samples to {train_path}")
    print(f"wrote {len(split.test)} test samples to {test_path}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _load_experiment(args)
    dataset = read_dataset(config.data)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tag = f"{config.arm}_seed{config.seed}"
    record, _ = train(config, dataset,
                      checkpoint_path=out_dir / f"{tag}.ckpt")
    record.save(out_dir / f"{tag}.json")
    print(f"{tag}: overall_acc={record.final['overall_acc']:.4f} "
          f"avg_class_acc={record.final['avg_class_acc']:.4f}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    config = _load_experiment(args)
    dataset = read_dataset(config.data)
    seeds = _parse_seeds(args.seeds)
    progress = (lambda row: print(
        f"{row['variant']} seed {row['seed']}: "
        f"overall_acc={row['overall_acc']:.4f}")) if not args.quiet else None
    if args.lambda_grid:
        result = run_lambda_grid(config, dataset, seeds, progress=progress)
    else:
        result = run_ablation(config, dataset, seeds, progress=progress)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    result.write_csv(out)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model = model_from_checkpoint(args.checkpoint)
    dataset = read_dataset(args.data)
    pts, labels = stack_points(dataset.test)
    report = evaluate(model.encode(pts).probs.values, labels)
    for key, value in report.summary().items():
        print(f"{key} = {value:.6f}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    model = model_from_checkpoint(args.checkpoint)
    dataset = read_dataset(args.data)
    pts, labels = stack_points(dataset.test)
    out = model.encode(pts)
    probs, emb = out.probs.values, out.embeddings.values
    report = evaluate(probs, labels)
    dist, _ = center_distance_report(emb, labels, len(dataset.class_names))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_confusion_csv(out_dir / "confusion.csv", report.confusion,
                        dataset.class_names)
    write_center_distance_csv(out_dir / "center_distance.csv", dist,
                              dataset.class_names)
    write_entropy_csv(out_dir / "entropy.csv", probs, labels)
    export_embeddings(out_dir / "embeddings.csv", emb, probs, labels)
    write_summary_json(out_dir / "summary.json", report)
    print(f"wrote analysis artifacts to {out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cedr",
        description="Contrastive embedding refinement experiments on "
                    "synthetic point clouds")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("--classes", type=int, default=8)
    p.add_argument("--train", type=int, default=50, help="samples per class")
    p.add_argument("--test", type=int, default=20, help="samples per class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=256)
    p.add_argument("--no-perturb", action="store_true")
    p.add_argument("--out", required=True, help="base path for the file pair")
    p.set_defaults(func=cmd_gen_data)

    for name, fn in (("train", cmd_train), ("ablate", cmd_ablate)):
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override any config key")
        p.add_argument("--arm")
        p.add_argument("--seed", type=int)
        if name == "ablate":
            p.add_argument("--seeds", default="0..4")
            p.add_argument("--lambda-grid", action="store_true",
                           help="sweep the balance coefficient instead of arms")
            p.add_argument("--out", default="ablation.csv")
            p.add_argument("--quiet", action="store_true")
        p.set_defaults(func=fn)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("analyze", help="emit CSV analysis artifacts")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericFailure, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        if getattr(exc, "weight_dump", None):
            np.set_printoptions(precision=6, linewidth=120)
            print("pair weight dump:", file=sys.stderr)
            print(np.array(exc.weight_dump["w_pos"]), file=sys.stderr)
            print(np.array(exc.weight_dump["w_neg"]), file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
