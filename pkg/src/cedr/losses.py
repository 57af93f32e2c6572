"""Cross-entropy, weighted supervised InfoNCE, and the joint objective.

The contrastive loss treats every same-class sample in the batch as a
positive for its anchor and every other-class sample as a negative. Pair
weights (from class-confusion mining, entropy attention, or their fusion)
enter as constants: gradients never flow through batch statistics.

For anchor i with positives P_i and negatives N_i, each positive j
contributes

    -log[ wp_ij e^{s_ij} / ( wp_ij e^{s_ij} + |N_i| * S_i ) ]

where s_ij = z_i . z_j / tau and S_i is the weight-normalized sum
sum_k wn_ik e^{s_ik} / sum_k wn_ik over negatives. Positive weights are
normalized by their per-anchor mean, so scaling every weight by the same
constant leaves the loss unchanged and unit weights reproduce the
unweighted loss exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, constant

CE_EPS = 1e-12


class DegenerateBatchError(ValueError):
    pass


@dataclass
class PairWeightMatrix:
    """Per-pair multipliers fed to the weighted InfoNCE. Entries are only
    meaningful on their pair set (w_pos on positive pairs, w_neg on negative
    pairs); everything else is ignored by the loss."""

    w_pos: np.ndarray   # batch x batch
    w_neg: np.ndarray   # batch x batch
    source: str = "unit"

    @classmethod
    def unit(cls, batch_size: int) -> "PairWeightMatrix":
        return cls(np.ones((batch_size, batch_size)),
                   np.ones((batch_size, batch_size)), source="unit")


@dataclass
class ContrastiveBatch:
    embeddings: Tensor          # batch x D, unit rows
    labels: np.ndarray          # batch int class ids
    temperature: float = 1.0

    def __post_init__(self):
        if not isinstance(self.embeddings, Tensor):
            self.embeddings = constant(np.asarray(self.embeddings, dtype=np.float64))
        self.labels = np.asarray(self.labels)
        if len(self.labels) != self.embeddings.shape[0]:
            raise ValueError("labels and embeddings disagree on batch size")
        if len(self.labels) < 2:
            raise ValueError("contrastive batch needs at least 2 samples")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")


@dataclass
class InfoNCEResult:
    mean: Tensor                # scalar
    per_anchor: np.ndarray      # batch; 0.0 at skipped anchors
    skipped_anchors: int


@dataclass
class LossBreakdown:
    ce: Tensor
    nce: Tensor
    lam: float
    total: Tensor
    per_anchor: np.ndarray
    skipped_anchors: int

    def as_floats(self) -> dict[str, float]:
        return {
            "ce": float(self.ce.values),
            "nce": float(self.nce.values),
            "lambda": self.lam,
            "total": float(self.total.values),
        }


def cross_entropy(probs: Tensor, labels) -> Tensor:
    """Mean -log p(true class), probability floored at 1e-12."""
    if not isinstance(probs, Tensor):
        probs = constant(probs)
    labels = np.asarray(labels)
    n, n_classes = probs.shape
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError(
            f"label out of range [0, {n_classes}): {labels.min()}..{labels.max()}"
        )
    picked = probs.pick(np.arange(n), labels)
    return -(picked.clamp_min(CE_EPS).log().mean())


def pair_masks(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(positive, negative) 0/1 masks over ordered pairs, diagonal excluded."""
    labels = np.asarray(labels)
    same = labels[:, None] == labels[None, :]
    eye = np.eye(len(labels), dtype=bool)
    return (same & ~eye).astype(np.float64), (~same).astype(np.float64)


def supervised_infonce(batch: ContrastiveBatch, weights=None,
                       prob_scale: np.ndarray | None = None) -> InfoNCEResult:
    """Weighted supervised InfoNCE over a batch.

    weights: optional PairWeightMatrix (see .eaa); absent entries default to 1.
    prob_scale: optional per-anchor constants multiplying each anchor's loss
    (the probability-scaled variant; off by default in training configs).
    """
    z = batch.embeddings
    labels = batch.labels
    b = len(labels)
    pos_mask, neg_mask = pair_masks(labels)
    n_pos = pos_mask.sum(axis=1)
    n_neg = neg_mask.sum(axis=1)
    valid = n_pos > 0
    if not valid.any():
        raise DegenerateBatchError("degenerate batch: no anchor has a positive")

    w_pos = np.ones((b, b)) if weights is None else np.asarray(weights.w_pos, float)
    w_neg = np.ones((b, b)) if weights is None else np.asarray(weights.w_neg, float)
    if w_pos.shape != (b, b) or w_neg.shape != (b, b):
        raise ValueError("pair weight matrices must be batch x batch")
    if (w_pos[pos_mask > 0] <= 0).any() or (w_neg[neg_mask > 0] <= 0).any():
        raise ValueError("pair weights must be positive")

    # normalize positive weights by their per-anchor mean; masked-out entries
    # are set to 1 so the log below stays finite everywhere
    pos_mean = np.where(valid, (w_pos * pos_mask).sum(axis=1) / np.maximum(n_pos, 1), 1.0)
    wp = np.where(pos_mask > 0, w_pos / pos_mean[:, None], 1.0)

    neg_w = w_neg * neg_mask
    neg_w_sum = neg_w.sum(axis=1)
    # |N_i| / sum of negative weights; zero when the anchor has no negatives
    neg_scale = np.where(neg_w_sum > 0, n_neg / np.maximum(neg_w_sum, 1e-300), 0.0)

    sims = z.matmul(z.T) * (1.0 / batch.temperature)
    e = sims.exp()
    pos_term = e * constant(wp)                                   # b x b
    neg_block = (e * constant(neg_w)).sum(axis=1) * constant(neg_scale)  # b
    denom = pos_term + neg_block.reshape(b, 1)
    pair_loss = -((pos_term / denom).log()) * constant(pos_mask)

    anchor_scale = np.where(valid, 1.0 / np.maximum(n_pos, 1), 0.0)
    per_anchor = pair_loss.sum(axis=1) * constant(anchor_scale)
    if prob_scale is not None:
        per_anchor = per_anchor * constant(np.asarray(prob_scale, float))
    mean = per_anchor.sum() * (1.0 / valid.sum())
    return InfoNCEResult(
        mean=mean,
        per_anchor=per_anchor.values.copy(),
        skipped_anchors=int(b - valid.sum()),
    )


def joint_loss(ce: Tensor, nce: InfoNCEResult, lam: float) -> LossBreakdown:
    """total = ce + lambda * nce."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    total = ce + nce.mean * lam
    return LossBreakdown(
        ce=ce,
        nce=nce.mean,
        lam=lam,
        total=total,
        per_anchor=nce.per_anchor,
        skipped_anchors=nce.skipped_anchors,
    )
