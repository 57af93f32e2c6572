"""Training loop, per-arm weight assembly, and the ablation runner."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import cpcm, eaa
from .autodiff import backward, constant
from .checkpoint import save_checkpoint
from .config import ARMS, ExperimentConfig
from .data import DatasetSplit, stack_points
from .encoder import EncoderConfig, PointEncoder
from .losses import (
    ContrastiveBatch,
    PairWeightMatrix,
    cross_entropy,
    joint_loss,
    supervised_infonce,
)
from .metrics import EvalReport, evaluate
from .optim import SGDMomentum


class NumericFailure(RuntimeError):
    def __init__(self, message, batch_index=None, weight_dump=None):
        super().__init__(message)
        self.batch_index = batch_index
        self.weight_dump = weight_dump


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    lam: float
    ce: float
    nce: float
    total: float
    skipped_anchors: int
    overall_acc: float
    avg_class_acc: float
    macro_f1: float


@dataclass
class RunRecord:
    config: dict
    epochs: list[EpochRecord] = field(default_factory=list)
    final: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def canonical_json(self) -> str:
        """Deterministic serialization; wall time varies between otherwise
        identical runs and is deliberately excluded."""
        payload = {
            "config": self.config,
            "epochs": [asdict(e) for e in self.epochs],
            "final": self.final,
        }
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def save(self, path):
        payload = json.loads(self.canonical_json())
        payload["wall_time"] = self.wall_time
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")


def batch_weights(config: ExperimentConfig, probs: np.ndarray,
                  embeddings: np.ndarray, labels: np.ndarray,
                  centers_tracker=None) -> PairWeightMatrix | None:
    """Assemble the pair weights for the configured arm. All inputs are
    plain arrays from the current forward pass; nothing here is on the tape."""
    if config.arm in ("ce_only", "scc") or config.debug_unit_weights:
        return None

    cpcm_w = None
    if config.arm in ("scc_cpcm", "full"):
        if centers_tracker is not None:
            centers = centers_tracker.update(embeddings, labels)
        else:
            centers = cpcm.compute_centers(embeddings, labels, config.num_classes)
        pair_w = cpcm.class_pair_weights(centers)
        cpcm_w = cpcm.cpcm_negative_weights(labels, pair_w, config.cpcm_method)
        if config.arm == "scc_cpcm":
            return cpcm_w

    scale = eaa.entropy_scale(config.num_classes)
    profile = eaa.classify_samples(probs, labels)
    sw = eaa.sample_weight(profile, config.eaa_mode, scale=scale)
    eaa_w = eaa.eaa_pair_weights(sw, labels)
    if config.arm == "scc_eaa":
        return eaa_w
    return eaa.fuse_weights(cpcm_w, eaa_w, renormalize=config.fuse_renormalize)


def evaluate_model(model: PointEncoder, samples) -> EvalReport:
    pts, labels = stack_points(samples)
    out = model.encode(pts)
    return evaluate(out.probs.values, labels)


def train(config: ExperimentConfig, dataset: DatasetSplit,
          checkpoint_path=None) -> tuple[RunRecord, PointEncoder]:
    config.validate()
    t0 = time.perf_counter()
    enc_config = EncoderConfig(num_classes=config.num_classes,
                               hidden_dims=list(config.hidden_dims))
    model = PointEncoder(enc_config, seed=config.seed)
    opt = SGDMomentum(model.params, total_epochs=config.epochs,
                      lr_max=config.lr_max, lr_min=config.lr_min,
                      momentum=config.momentum, weight_decay=config.weight_decay)
    tracker = None
    if config.center_scope == "running":
        tracker = cpcm.RunningCenters(config.num_classes, enc_config.global_dim)

    train_pts, train_labels = stack_points(dataset.train)
    record = RunRecord(config=json.loads(json.dumps(asdict(config))))

    report = evaluate_model(model, dataset.test)
    record.epochs.append(EpochRecord(
        epoch=-1, lr=opt.lr, lam=config.lam_at(0), ce=float("nan"),
        nce=float("nan"), total=float("nan"), skipped_anchors=0,
        overall_acc=report.overall_acc, avg_class_acc=report.avg_class_acc,
        macro_f1=report.macro_f1))

    n = len(train_labels)
    for epoch in range(config.epochs):
        opt.epoch = epoch
        lam = config.lam_at(epoch)
        order = np.random.default_rng(
            np.random.SeedSequence((config.seed, epoch))).permutation(n)
        sums = {"ce": 0.0, "nce": 0.0, "total": 0.0}
        skipped = 0
        n_batches = 0
        for bi, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            if len(idx) < 2:
                continue
            labels = train_labels[idx]
            out = model.encode(train_pts[idx])
            ce = cross_entropy(out.probs, labels)
            weights = None
            if config.arm != "ce_only":
                weights = batch_weights(config, out.probs.values,
                                        out.embeddings.values, labels, tracker)
                nce = supervised_infonce(
                    ContrastiveBatch(out.embeddings, labels, config.temperature),
                    weights,
                    prob_scale=(out.probs.values[np.arange(len(idx)), labels]
                                if config.nce_prob_scaling else None))
                lb = joint_loss(ce, nce, lam)
            else:
                lb = joint_loss(ce, supervised_infonce_zero(len(idx)), 0.0)
            total = lb.total
            if not np.isfinite(total.values):
                dump = None
                if weights is not None:
                    dump = {"w_pos": weights.w_pos.tolist(),
                            "w_neg": weights.w_neg.tolist()}
                raise NumericFailure(
                    f"non-finite loss at epoch {epoch}, batch {bi}",
                    batch_index=bi, weight_dump=dump)
            opt.zero_grad()
            backward(total)
            opt.step()
            sums["ce"] += float(lb.ce.values)
            sums["nce"] += float(lb.nce.values)
            sums["total"] += float(total.values)
            skipped += lb.skipped_anchors
            n_batches += 1

        report = evaluate_model(model, dataset.test)
        record.epochs.append(EpochRecord(
            epoch=epoch, lr=opt.lr, lam=lam,
            ce=sums["ce"] / max(n_batches, 1),
            nce=sums["nce"] / max(n_batches, 1),
            total=sums["total"] / max(n_batches, 1),
            skipped_anchors=skipped,
            overall_acc=report.overall_acc,
            avg_class_acc=report.avg_class_acc,
            macro_f1=report.macro_f1))

    record.final = report.summary()
    record.wall_time = time.perf_counter() - t0
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, model.params)
    return record, model


def supervised_infonce_zero(batch_size: int):
    """Placeholder contrastive result for the cross-entropy-only arm."""
    from .losses import InfoNCEResult

    return InfoNCEResult(mean=constant(0.0), per_anchor=np.zeros(batch_size),
                         skipped_anchors=0)


@dataclass
class AblationResult:
    rows: list[dict]

    def write_csv(self, path):
        seeds = sorted({r["seed"] for r in self.rows})
        variants = []
        for r in self.rows:
            if r["variant"] not in variants:
                variants.append(r["variant"])
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            header = ["variant"]
            for s in seeds:
                header += [f"overall_acc_seed{s}", f"avg_class_acc_seed{s}"]
            header += ["overall_acc_mean", "overall_acc_std",
                       "avg_class_acc_mean", "avg_class_acc_std"]
            w.writerow(header)
            for v in variants:
                sub = {r["seed"]: r for r in self.rows if r["variant"] == v}
                oa = np.array([sub[s]["overall_acc"] for s in seeds])
                aca = np.array([sub[s]["avg_class_acc"] for s in seeds])
                row = [v]
                for s in seeds:
                    row += [f"{sub[s]['overall_acc']:.6f}",
                            f"{sub[s]['avg_class_acc']:.6f}"]
                row += [f"{oa.mean():.6f}", f"{oa.std():.6f}",
                        f"{aca.mean():.6f}", f"{aca.std():.6f}"]
                w.writerow(row)

    def mean_overall(self, variant: str) -> float:
        vals = [r["overall_acc"] for r in self.rows if r["variant"] == variant]
        return float(np.mean(vals))


def run_ablation(base: ExperimentConfig, dataset: DatasetSplit,
                 seeds=(0, 1, 2, 3, 4), arms=ARMS,
                 progress=None) -> AblationResult:
    """Train every arm on every seed with otherwise shared config."""
    rows = []
    for arm in arms:
        for seed in seeds:
            config = ExperimentConfig(**{**asdict(base), "arm": arm, "seed": seed})
            record, model = train(config, dataset)
            rows.append({
                "variant": arm, "seed": seed,
                "overall_acc": record.final["overall_acc"],
                "avg_class_acc": record.final["avg_class_acc"],
                "record": record, "model": model,
            })
            if progress:
                progress(rows[-1])
    return AblationResult(rows)


LAMBDA_GRID = (0.05, 0.1, 0.2, 0.3, "linear:0.1:0.2")


def run_lambda_grid(base: ExperimentConfig, dataset: DatasetSplit,
                    seeds=(0, 1, 2, 3, 4), grid=LAMBDA_GRID,
                    progress=None) -> AblationResult:
    """Balance-coefficient study over the contrastive arm."""
    rows = []
    for setting in grid:
        for seed in seeds:
            config = ExperimentConfig(**{**asdict(base), "seed": seed})
            if isinstance(setting, str):
                _, start, end = setting.split(":")
                config.lambda_schedule = "linear"
                config.lam = float(start)
                config.lambda_end = float(end)
                label = f"linear_{start}_{end}"
            else:
                config.lambda_schedule = "constant"
                config.lam = float(setting)
                label = f"constant_{setting}"
            record, model = train(config, dataset)
            rows.append({
                "variant": label, "seed": seed,
                "overall_acc": record.final["overall_acc"],
                "avg_class_acc": record.final["avg_class_acc"],
                "record": record, "model": model,
            })
            if progress:
                progress(rows[-1])
    return AblationResult(rows)
