"""Entropy-aware attention: prediction-entropy taxonomy and pair weights.

Misclassified samples with confidently peaked predictions (low entropy) are
outliers and get down-weighted; correctly classified samples with diffuse
predictions (high entropy) sit near the decision boundary and get
up-weighted. The reference thresholds (1.0 / 2.5 bits) and the 1.2 offset
assume a 15-class output; for other class counts everything is rescaled by
log2(C) / log2(15) so the same fractions of the entropy range apply.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import PairWeightMatrix

REFERENCE_CLASSES = 15
LOW_THRESHOLD = 1.0     # bits, at 15 classes
HIGH_THRESHOLD = 2.5    # bits, at 15 classes
UNSTABLE_OFFSET = 1.2   # subtracted from entropy for unstable samples
FIXED_OUTLIER_WEIGHT = 0.8
FIXED_UNSTABLE_WEIGHT = 1.2


@dataclass
class EntropyProfile:
    entropy: np.ndarray    # bits
    predicted: np.ndarray  # argmax class ids
    correct: np.ndarray    # bools
    tag: np.ndarray        # 'outlier' | 'unstable' | 'normal'


@dataclass
class SampleWeights:
    a: np.ndarray
    mode: str  # 'varying' | 'fixed'


def entropy_scale(num_classes: int) -> float:
    """Threshold/offset rescale factor for a non-reference class count."""
    return np.log2(num_classes) / np.log2(REFERENCE_CLASSES)


def default_thresholds(num_classes: int) -> tuple[float, float]:
    s = entropy_scale(num_classes)
    return LOW_THRESHOLD * s, HIGH_THRESHOLD * s


def shannon_entropy(probs: np.ndarray) -> np.ndarray:
    """Row-wise base-2 entropy; rows are renormalized, 0 log 0 := 0."""
    probs = np.asarray(probs, dtype=np.float64)
    if (probs < 0).any():
        raise ValueError("probabilities must be nonnegative")
    totals = probs.sum(axis=1)
    bad = np.flatnonzero(totals <= 0)
    if bad.size:
        raise ValueError(f"all-zero probability row {bad[0]}")
    p = probs / totals[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(p), 0.0)
    return -terms.sum(axis=1)


def classify_samples(probs: np.ndarray, labels: np.ndarray,
                     thresholds: tuple[float, float] | None = None) -> EntropyProfile:
    """Tag each sample outlier / unstable / normal from its entropy."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.shape[1] < 2:
        raise ValueError("need at least 2 classes")
    low, high = thresholds if thresholds is not None else default_thresholds(probs.shape[1])
    ent = shannon_entropy(probs)
    predicted = probs.argmax(axis=1)
    correct = predicted == labels
    tag = np.full(len(labels), "normal", dtype=object)
    tag[(ent < low) & ~correct] = "outlier"
    tag[(ent > high) & correct] = "unstable"
    return EntropyProfile(ent, predicted, correct, tag)


def sample_weight(profile: EntropyProfile, mode: str = "varying",
                  scale: float = 1.0) -> SampleWeights:
    """Per-sample attention weights.

    varying: outlier -> E, unstable -> E - 1.2, normal -> 1, with E measured
    on the reference 15-class scale (entropy / scale). fixed: 0.8 / 1.2 / 1.
    """
    if mode == "varying":
        e = profile.entropy / scale
        a = np.ones(len(e))
        a[profile.tag == "outlier"] = e[profile.tag == "outlier"]
        a[profile.tag == "unstable"] = e[profile.tag == "unstable"] - UNSTABLE_OFFSET
    elif mode == "fixed":
        a = np.ones(len(profile.entropy))
        a[profile.tag == "outlier"] = FIXED_OUTLIER_WEIGHT
        a[profile.tag == "unstable"] = FIXED_UNSTABLE_WEIGHT
    else:
        raise ValueError(f"unknown weight mode '{mode}'")
    return SampleWeights(a, mode)


def pair_select(a_i: float, a_j: float) -> float:
    """max when neither sample is down-weighted, min otherwise."""
    if a_i <= 0 or a_j <= 0:
        raise ValueError("sample weights must be positive")
    if a_i >= 1 and a_j >= 1:
        return max(a_i, a_j)
    return min(a_i, a_j)


def eaa_pair_weights(weights: SampleWeights, labels: np.ndarray) -> PairWeightMatrix:
    """Apply the pair selection rule to every ordered pair, both pair sets."""
    a = np.asarray(weights.a, dtype=np.float64)
    if (a <= 0).any():
        raise ValueError("sample weights must be positive")
    ai = a[:, None]
    aj = a[None, :]
    w = np.where((ai >= 1) & (aj >= 1), np.maximum(ai, aj), np.minimum(ai, aj))
    return PairWeightMatrix(w.copy(), w.copy(), source="eaa")


def fuse_weights(cpcm: PairWeightMatrix, eaa: PairWeightMatrix,
                 renormalize: bool = False) -> PairWeightMatrix:
    """Combine the two weight fields on negatives by the root-sum-square;
    positives carry the attention weights alone (mining defines none).

    renormalize divides by sqrt(2) so two neutral (=1) inputs map back to 1.
    """
    if cpcm.w_neg.shape != eaa.w_neg.shape:
        raise ValueError(
            f"pair sets differ: {cpcm.w_neg.shape} vs {eaa.w_neg.shape}"
        )
    w_neg = np.sqrt(cpcm.w_neg**2 + eaa.w_neg**2)
    if renormalize:
        w_neg = w_neg / np.sqrt(2.0)
    return PairWeightMatrix(eaa.w_pos.copy(), w_neg, source="fused")
