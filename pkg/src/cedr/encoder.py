"""PointNet-lite encoder: shared per-point MLP, max pool, two heads.

The classification head maps the pooled global feature to class
probabilities; the projection head maps it to a unit-norm embedding used by
the contrastive losses. Max pooling makes the whole thing exactly invariant
to point order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import (
    Parameter,
    Tensor,
    constant,
    dense_forward,
    l2_normalize_rows,
    max_pool_points,
    softmax_rows,
)


@dataclass
class EncoderConfig:
    num_classes: int
    point_dim: int = 3
    hidden_dims: list[int] = field(default_factory=lambda: [64, 128])

    @property
    def global_dim(self) -> int:
        return self.hidden_dims[-1]

    # projection space has the same width as the global feature
    @property
    def projection_dim(self) -> int:
        return self.global_dim


@dataclass
class ForwardOutputs:
    global_features: Tensor  # batch x D
    logits: Tensor           # batch x |C|
    probs: Tensor            # batch x |C|, rows sum to 1
    embeddings: Tensor       # batch x D, unit rows


class PointEncoder:
    def __init__(self, config: EncoderConfig, seed: int = 0):
        self.config = config
        rng = np.random.default_rng(seed)
        self.params: list[Parameter] = []
        dims = [config.point_dim] + list(config.hidden_dims)
        self.point_layers = [
            self._dense_pair(rng, dims[i], dims[i + 1], f"point{i}")
            for i in range(len(dims) - 1)
        ]
        d = config.global_dim
        self.cls_head = self._dense_pair(rng, d, config.num_classes, "cls")
        self.prj_head = self._dense_pair(rng, d, config.projection_dim, "prj")

    def _dense_pair(self, rng, d_in, d_out, name):
        # He init; biases at zero
        w = Parameter(rng.standard_normal((d_in, d_out)) * np.sqrt(2.0 / d_in),
                      f"{name}.w")
        b = Parameter(np.zeros(d_out), f"{name}.b")
        self.params.extend([w, b])
        return (w, b)

    def load_state(self, tensors: dict[str, np.ndarray]):
        for p in self.params:
            if p.name not in tensors:
                raise KeyError(f"checkpoint is missing parameter '{p.name}'")
            p.values[...] = tensors[p.name]

    def encode(self, points) -> ForwardOutputs:
        """points: (batch, n_points, point_dim) array or Tensor leaf."""
        x = points if isinstance(points, Tensor) else constant(points)
        batch, n_points, pdim = x.shape
        if n_points < 1:
            raise ValueError("empty point cloud")
        if not np.all(np.isfinite(x.values)):
            raise ValueError("non-finite point coordinates")
        h = x.reshape(batch * n_points, pdim)
        for w, b in self.point_layers:
            h = dense_forward(h, w, b).relu()
        per_point = h.reshape(batch, n_points, self.config.global_dim)
        global_features = max_pool_points(per_point)
        logits = dense_forward(global_features, *self.cls_head)
        probs = softmax_rows(logits)
        embeddings = l2_normalize_rows(dense_forward(global_features, *self.prj_head))
        return ForwardOutputs(global_features, logits, probs, embeddings)
