"""
Example Model

One spatio-temporal training instance: the feature matrix F (gamma x epsilon)
of node embeddings in first-seen order and the binary adjacency matrix A
(gamma x gamma) of the same window.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Example:
    """A single window of flows turned into (F, A, label)."""

    F: np.ndarray
    A: np.ndarray
    label: str
    window_start: int
    unknown_ips: int = 0

    @property
    def gamma(self) -> int:
        return int(self.A.shape[0])

    @property
    def epsilon(self) -> int:
        return int(self.F.shape[1])

    def same_content(self, other: "Example") -> bool:
        """Bit-exact comparison of matrices, label and window start."""
        return (
            self.label == other.label
            and self.window_start == other.window_start
            and self.F.shape == other.F.shape
            and self.A.shape == other.A.shape
            and bool(np.array_equal(self.F, other.F))
            and bool(np.array_equal(self.A, other.A))
        )
