"""
PCA Projection

Three-dimensional view of an embedding set for plotting.
"""

import numpy as np
from sklearn.decomposition import PCA

from src.errors import PreconditionError

N_COMPONENTS = 3
# relative to the largest singular value
RANK_TOLERANCE = 1e-10


def pca3_projection(embeddings: np.ndarray) -> np.ndarray:
    """
    Project centered embeddings onto their top 3 principal directions.

    Each column's sign is chosen so its largest-magnitude coordinate is
    positive. Directions beyond the data's rank come back as zero columns.

    Returns:
        [n, 3] coordinates

    Raises:
        PreconditionError: fewer than 3 points
    """
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim != 2 or embeddings.shape[0] < N_COMPONENTS:
        raise PreconditionError(
            f"pca3_projection needs at least {N_COMPONENTS} points, got shape {embeddings.shape}"
        )
    n, d = embeddings.shape
    n_components = min(N_COMPONENTS, n, d)
    pca = PCA(n_components=n_components, svd_solver="full")
    projected = pca.fit_transform(embeddings)

    singular = pca.singular_values_
    top = singular[0] if singular.size else 0.0
    coords = np.zeros((n, N_COMPONENTS))
    for j in range(n_components):
        if top == 0.0 or singular[j] <= RANK_TOLERANCE * top:
            continue
        column = projected[:, j]
        pivot = int(np.argmax(np.abs(column)))
        coords[:, j] = column if column[pivot] >= 0 else -column
    return coords
