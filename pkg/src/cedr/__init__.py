"""Contrastive embedding refinement for point cloud classification.

Joint cross-entropy + supervised InfoNCE training with two pair-reweighting
mechanisms: class-confusion mining over embedding-center distances and
entropy-aware attention over per-sample prediction uncertainty.
"""

from .config import ExperimentConfig
from .data import build_dataset, default_shape_specs, read_dataset, write_dataset
from .encoder import EncoderConfig, PointEncoder
from .train import run_ablation, run_lambda_grid, train

__all__ = [
    "ExperimentConfig",
    "EncoderConfig",
    "PointEncoder",
    "build_dataset",
    "default_shape_specs",
    "read_dataset",
    "write_dataset",
    "train",
    "run_ablation",
    "run_lambda_grid",
]
