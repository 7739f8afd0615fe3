"""
ST-PCN Model

Spatio-temporal parallel convolutional network. Two branches with the same
layout convolve F (temporal: node embeddings in first-seen order) and A
(spatial: window adjacency) independently:

    conv(1->8, 3x3, pad 1) -> relu -> maxpool 2x2
    -> conv(8->16, 3x3, pad 1) -> relu -> global average pool -> dense(16->32)

The two 32-d outputs are concatenated into the 64-d behavior embedding. The
angular-margin head holds one unit-norm row per training class.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import ConfigError
from src.models import Example, TrainConfig
from src.nn import (
    Tensor,
    concat,
    conv2d,
    dense,
    global_avg_pool,
    max_pool2d,
    no_grad,
    parameter,
    relu,
)

BRANCH_OUT_DIM = 32
EMBED_DIM = 2 * BRANCH_OUT_DIM

# name suffix, shape, fan-in
_BRANCH_LAYOUT: Tuple[Tuple[str, Tuple[int, ...], int], ...] = (
    ("conv1.weight", (8, 1, 3, 3), 1 * 3 * 3),
    ("conv1.bias", (8,), 1 * 3 * 3),
    ("conv2.weight", (16, 8, 3, 3), 8 * 3 * 3),
    ("conv2.bias", (16,), 8 * 3 * 3),
    ("dense.weight", (BRANCH_OUT_DIM, 16), 16),
    ("dense.bias", (BRANCH_OUT_DIM,), 16),
)
BRANCHES = ("temporal", "spatial")


@dataclass
class StpcnModel:
    """All learnable parameters plus the configuration they were trained with."""

    gamma: int
    epsilon: int
    classes: List[str]
    scale_s: float
    margin_m: float
    params: Dict[str, Tensor] = field(default_factory=dict)
    holdout_class: Optional[str] = None
    config_hash: str = ""

    @classmethod
    def initialize(
        cls,
        gamma: int,
        epsilon: int,
        classes: Sequence[str],
        cfg: TrainConfig,
        holdout_class: Optional[str] = None,
    ) -> "StpcnModel":
        """
        Seeded uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) initialization.

        Head rows are drawn the same way (fan-in 64) and then normalized.
        """
        rng = np.random.default_rng(cfg.seed)
        params: Dict[str, Tensor] = {}
        for branch in BRANCHES:
            for suffix, shape, fan_in in _BRANCH_LAYOUT:
                bound = math.sqrt(1.0 / fan_in)
                params[f"{branch}.{suffix}"] = parameter(rng.uniform(-bound, bound, size=shape))
        bound = math.sqrt(1.0 / EMBED_DIM)
        params["head.weight"] = parameter(rng.uniform(-bound, bound, size=(len(classes), EMBED_DIM)))
        model = cls(
            gamma=gamma,
            epsilon=epsilon,
            classes=list(classes),
            scale_s=cfg.scale_s,
            margin_m=cfg.margin_m,
            params=params,
            holdout_class=holdout_class,
        )
        model.normalize_head()
        return model

    # -------------------------------------------------------------------------
    # Parameters
    # -------------------------------------------------------------------------

    @property
    def head(self) -> Tensor:
        return self.params["head.weight"]

    def parameters(self) -> List[Tensor]:
        """Parameters in a fixed order (branches, then head)."""
        return list(self.params.values())

    def normalize_head(self) -> None:
        """Rescale head rows to unit L2 norm."""
        weights = self.head.data
        norms = np.linalg.norm(weights, axis=1, keepdims=True)
        weights /= np.where(norms > 0, norms, 1.0)

    # -------------------------------------------------------------------------
    # Forward
    # -------------------------------------------------------------------------

    def _branch(self, name: str, x: Tensor) -> Tensor:
        p = self.params
        h = relu(conv2d(x, p[f"{name}.conv1.weight"], p[f"{name}.conv1.bias"], padding=1))
        h = max_pool2d(h, 2)
        h = relu(conv2d(h, p[f"{name}.conv2.weight"], p[f"{name}.conv2.bias"], padding=1))
        return dense(global_avg_pool(h), p[f"{name}.dense.weight"], p[f"{name}.dense.bias"])

    def forward(self, F_batch: np.ndarray, A_batch: np.ndarray) -> Tensor:
        """
        Embed a batch.

        Args:
            F_batch: [N, gamma, epsilon]
            A_batch: [N, gamma, gamma], 0/1 values

        Returns:
            [N, 64] embeddings (temporal half first)
        """
        n = F_batch.shape[0]
        if F_batch.shape[1:] != (self.gamma, self.epsilon) or A_batch.shape != (
            n,
            self.gamma,
            self.gamma,
        ):
            raise ConfigError(
                f"Batch shapes F{F_batch.shape} A{A_batch.shape} do not match model "
                f"gamma={self.gamma}, epsilon={self.epsilon}",
                gamma=self.gamma,
                epsilon=self.epsilon,
            )
        temporal = self._branch("temporal", Tensor(F_batch[:, np.newaxis, :, :]))
        spatial = self._branch("spatial", Tensor(A_batch[:, np.newaxis, :, :].astype(np.float64)))
        return concat([temporal, spatial], axis=1)


def stack_examples(examples: Sequence[Example]) -> Tuple[np.ndarray, np.ndarray]:
    """Batch arrays ([N, gamma, epsilon], [N, gamma, gamma]) from examples."""
    F_batch = np.stack([example.F for example in examples]).astype(np.float64)
    A_batch = np.stack([example.A for example in examples]).astype(np.float64)
    return F_batch, A_batch


def embed(model: StpcnModel, example: Example) -> np.ndarray:
    """64-d embedding of one example."""
    return embed_batch(model, [example])[0]


def embed_batch(
    model: StpcnModel, examples: Sequence[Example], batch_size: int = 256
) -> np.ndarray:
    """Embeddings of many examples, [N, 64], in input order."""
    if not examples:
        return np.zeros((0, EMBED_DIM))
    chunks = []
    with no_grad():
        for start in range(0, len(examples), batch_size):
            F_batch, A_batch = stack_examples(examples[start:start + batch_size])
            chunks.append(model.forward(F_batch, A_batch).data)
    return np.vstack(chunks)
