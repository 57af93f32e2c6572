"""Confusion-prone class mining: class centers, center distances, and the
negative-pair weights that push near-center class pairs apart harder.

The per-pair weight is W(i, j) = 1 + exp(-2 d(i, j)) with d the Euclidean
distance between the class centers, so coincident centers get weight 2 and
well-separated classes fall back towards 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .losses import PairWeightMatrix

NEAREST_MARGIN = 0.8  # required gap between nearest and second-nearest class


@dataclass
class ClassCenters:
    centers: np.ndarray   # n_classes x D; rows undefined where mask is False
    mask: np.ndarray      # n_classes bools: class has samples in scope
    scope: str = "batch"


@dataclass
class ClassPairWeights:
    w_minus: np.ndarray   # n_classes x n_classes, symmetric, in (1, 2]
    dist: np.ndarray      # n_classes x n_classes Euclidean center distances
    mask: np.ndarray


def compute_centers(embeddings: np.ndarray, labels: np.ndarray,
                    num_classes: int) -> ClassCenters:
    """Per-class mean embedding over one batch."""
    embeddings = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ValueError("cannot compute centers of an empty batch")
    centers = np.zeros((num_classes, embeddings.shape[1]))
    mask = np.zeros(num_classes, dtype=bool)
    for c in range(num_classes):
        rows = labels == c
        if rows.any():
            centers[c] = embeddings[rows].mean(axis=0)
            mask[c] = True
    return ClassCenters(centers, mask)


@dataclass
class RunningCenters:
    """Exponential moving average of batch centers across a run."""

    num_classes: int
    dim: int
    decay: float = 0.9
    centers: np.ndarray = field(init=False)
    mask: np.ndarray = field(init=False)

    def __post_init__(self):
        self.centers = np.zeros((self.num_classes, self.dim))
        self.mask = np.zeros(self.num_classes, dtype=bool)

    def update(self, embeddings: np.ndarray, labels: np.ndarray) -> ClassCenters:
        batch = compute_centers(embeddings, labels, self.num_classes)
        for c in range(self.num_classes):
            if not batch.mask[c]:
                continue
            if self.mask[c]:
                self.centers[c] = self.decay * self.centers[c] + (1 - self.decay) * batch.centers[c]
            else:
                self.centers[c] = batch.centers[c]
                self.mask[c] = True
        return ClassCenters(self.centers.copy(), self.mask.copy(), scope="running-epoch")


def cpcm_weight(dist: float) -> float:
    """1 + exp(-2 dist); 2 at zero distance, ->1 as classes separate."""
    if dist < 0:
        raise ValueError(f"distance must be nonnegative, got {dist}")
    return 1.0 + np.exp(-2.0 * dist)


def class_pair_weights(centers: ClassCenters) -> ClassPairWeights:
    diff = centers.centers[:, None, :] - centers.centers[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    w = 1.0 + np.exp(-2.0 * dist)
    return ClassPairWeights(w, dist, centers.mask.copy())


def cpcm_negative_weights(labels: np.ndarray, pair_weights: ClassPairWeights,
                          method: str = "all_pairs") -> PairWeightMatrix:
    """Expand class-pair weights to sample-pair weights over negatives.

    all_pairs: every cross-class pair gets its class weight. nearest_only:
    only each class's nearest class pair is weighted, and only when the
    nearest distance beats the second nearest by more than the 0.8 margin;
    everything else stays at 1.
    """
    labels = np.asarray(labels)
    present = np.unique(labels)
    missing = [int(c) for c in present if not pair_weights.mask[c]]
    if missing:
        raise ValueError(f"no center defined for class(es) {missing}")

    n_classes = pair_weights.w_minus.shape[0]
    if method == "all_pairs":
        class_w = pair_weights.w_minus
    elif method == "nearest_only":
        class_w = np.ones((n_classes, n_classes))
        defined = np.flatnonzero(pair_weights.mask)
        for c in defined:
            others = defined[defined != c]
            if len(others) < 2:
                continue
            d = pair_weights.dist[c, others]
            order = np.argsort(d, kind="stable")
            nearest, second = others[order[0]], others[order[1]]
            if d[order[0]] + NEAREST_MARGIN < d[order[1]]:
                class_w[c, nearest] = pair_weights.w_minus[c, nearest]
                class_w[nearest, c] = pair_weights.w_minus[nearest, c]
    else:
        raise ValueError(f"unknown mining method '{method}'")

    w_neg = class_w[labels[:, None], labels[None, :]]
    # same-class entries sit outside the negative pair set; neutralize them
    same = labels[:, None] == labels[None, :]
    w_neg = np.where(same, 1.0, w_neg)
    b = len(labels)
    return PairWeightMatrix(np.ones((b, b)), w_neg, source="cpcm")
