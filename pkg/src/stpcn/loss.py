"""
Additive Angular Margin Loss

Per sample, with unit-normalized embedding e and head rows W_j:

    logit_j = s * cos(theta_j)            for j != y
    logit_y = s * cos(theta_y + m)

and the loss is the mean softmax cross-entropy. With m = 0 and s = 1 this is
plain softmax cross-entropy over cosine similarities.
"""

import numpy as np

from src.errors import PreconditionError
from src.nn import (
    Tensor,
    additive_angular_margin,
    cross_entropy,
    l2_normalize_rows,
    reshape,
    transpose,
)


def cosine_logits(embeddings: Tensor, head: Tensor) -> Tensor:
    """Cosine similarity of every embedding with every head row, [B, K]."""
    return l2_normalize_rows(embeddings) @ transpose(l2_normalize_rows(head))


def arcface_loss(
    embeddings: Tensor, labels: np.ndarray, head: Tensor, s: float, m: float
) -> Tensor:
    """
    Scalar additive angular margin loss of a batch.

    Args:
        embeddings: [B, D]
        labels: [B] integer class indices into head rows
        head: [K, D] class weights
        s: logit scale
        m: angular margin in radians

    Raises:
        PreconditionError: empty batch or label out of range
    """
    labels = np.asarray(labels, dtype=np.int64)
    if embeddings.ndim == 1:
        embeddings = reshape(embeddings, (1, embeddings.shape[0]))
    if embeddings.shape[0] == 0 or labels.size == 0:
        raise PreconditionError("arcface_loss on an empty batch")
    if labels.min() < 0 or labels.max() >= head.shape[0]:
        raise PreconditionError(
            f"Label index out of range for {head.shape[0]} classes",
            min_label=int(labels.min()),
            max_label=int(labels.max()),
        )
    cosine = cosine_logits(embeddings, head)
    if m != 0.0:
        cosine = additive_angular_margin(cosine, labels, m)
    return cross_entropy(cosine * s, labels)
