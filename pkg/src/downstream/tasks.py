"""
Zero-Day Detection and Attack Attribution

Both tasks read the KNN membership probabilities of embeddings whose class
was never seen in training:

- ZDT probability is 1 - max class probability; high values flag novel
  behavior.
- CATA tallies which known class wins for each holdout example and reports
  the two most frequent winners with their mean winning probability.
"""

from typing import Dict, List, Sequence

import numpy as np

from src.errors import PreconditionError
from src.models import CataEntry, CataResult, ZdtResult

from .knn import KnnModel, knn_predict_proba_batch

TOP_N = 2


def zdt_scores(
    model: KnnModel,
    queries: np.ndarray,
    truth: Sequence[bool],
    threshold: float = 0.5,
) -> ZdtResult:
    """
    Zero-day-threat probability per query.

    Args:
        model: KNN fit without any holdout-class data
        queries: [n, d] embeddings
        truth: whether each query belongs to the holdout class
        threshold: predictions are zdt_probability >= threshold
    """
    probs = knn_predict_proba_batch(model, queries)
    if len(truth) != probs.shape[0]:
        raise PreconditionError(f"{len(truth)} truth flags for {probs.shape[0]} queries")
    zdt = 1.0 - probs.max(axis=1)
    return ZdtResult(
        zdt_probability=[float(z) for z in zdt],
        is_holdout=[bool(t) for t in truth],
        predictions=[bool(z >= threshold) for z in zdt],
        threshold=threshold,
    )


def cata(model: KnnModel, holdout_embeddings: np.ndarray, holdout_label: str) -> CataResult:
    """
    Closest attack type attribution for one holdout class.

    Ranking is by win count, then higher mean winning probability, then label.

    Raises:
        PreconditionError: no holdout embeddings
    """
    holdout_embeddings = np.asarray(holdout_embeddings, dtype=np.float64)
    if holdout_embeddings.size == 0:
        raise PreconditionError(
            f"No holdout examples to attribute for '{holdout_label}'", holdout_class=holdout_label
        )
    probs = knn_predict_proba_batch(model, holdout_embeddings)
    winners = probs.argmax(axis=1)
    n = probs.shape[0]

    won: Dict[int, List[float]] = {}
    for row, winner in enumerate(winners):
        won.setdefault(int(winner), []).append(float(probs[row, winner]))

    ranked = sorted(
        won.items(),
        key=lambda item: (-len(item[1]), -float(np.mean(item[1])), model.classes[item[0]]),
    )
    entries = [
        CataEntry(
            rank=rank,
            attributed_class=model.classes[class_id],
            frequency=len(wins) / n,
            count=len(wins),
            avg_probability=float(np.mean(wins)),
        )
        for rank, (class_id, wins) in enumerate(ranked[:TOP_N], start=1)
    ]
    return CataResult(holdout_class=holdout_label, n_examples=n, entries=entries)
