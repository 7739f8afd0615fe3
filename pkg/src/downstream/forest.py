"""
Random Forest Head

Bagged Gini trees over frozen embeddings, grown to purity with sqrt(d)
features per split by default.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from sklearn.ensemble import RandomForestClassifier

from src.errors import PreconditionError, ShapeError
from src.models import ForestConfig
from src.utils import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class RandomForestModel:
    forest: RandomForestClassifier
    classes: List[str]


def rf_fit(
    embeddings: np.ndarray, labels: Sequence[str], cfg: ForestConfig = ForestConfig()
) -> RandomForestModel:
    """
    Fit a forest on training embeddings.

    Raises:
        PreconditionError: fewer than 2 classes or label/row count mismatch
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or len(labels) != embeddings.shape[0]:
        raise PreconditionError(
            f"rf_fit needs one label per row: {len(labels)} labels, shape {embeddings.shape}"
        )
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise PreconditionError(
            f"Random forest needs at least 2 classes, found {len(classes)}", classes=classes
        )
    forest = RandomForestClassifier(
        n_estimators=cfg.n_trees,
        criterion="gini",
        max_depth=None,
        max_features=cfg.max_features,
        min_samples_leaf=1,
        min_samples_split=2,
        bootstrap=cfg.bootstrap,
        random_state=cfg.seed,
        n_jobs=1,
    )
    forest.fit(embeddings, list(labels))
    logger.info(
        "forest_fit",
        n_trees=cfg.n_trees,
        n_train=embeddings.shape[0],
        classes=len(classes),
        max_depth=max(tree.get_depth() for tree in forest.estimators_),
    )
    return RandomForestModel(forest=forest, classes=[str(c) for c in forest.classes_])


def rf_predict_proba(model: RandomForestModel, queries: np.ndarray) -> np.ndarray:
    """Vote fractions, [n_queries, n_classes] in `model.classes` order."""
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim == 1:
        queries = queries[np.newaxis, :]
    if queries.shape[1] != model.forest.n_features_in_:
        raise ShapeError(
            f"Query dimension {queries.shape[1]} does not match forest input "
            f"{model.forest.n_features_in_}"
        )
    return model.forest.predict_proba(queries)


def rf_predict(model: RandomForestModel, query: np.ndarray) -> Tuple[str, float]:
    """Winning class and its vote fraction for one query."""
    probs = rf_predict_proba(model, query)[0]
    best = int(np.argmax(probs))
    return model.classes[best], float(probs[best])
