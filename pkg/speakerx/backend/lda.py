from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from ..errors import DimensionError

RIDGE = 1e-6  # times trace(S_w) / d


@dataclass
class Lda:
    projection: np.ndarray  # d_in x d_out
    eigenvalues: np.ndarray

    @property
    def out_dim(self) -> int:
        return self.projection.shape[1]

    def apply(self, x) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) @ self.projection


def scatter_matrices(x, labels: Sequence):
    """Between-class and within-class scatter, both normalized by the sample count."""
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    mean = x.mean(axis=0)
    dim = x.shape[1]
    between = np.zeros((dim, dim))
    within = np.zeros((dim, dim))
    for label in np.unique(labels):
        members = x[labels == label]
        centre = members.mean(axis=0)
        diff = centre - mean
        between += members.shape[0] * np.outer(diff, diff)
        dev = members - centre
        within += dev.T @ dev
    return between / x.shape[0], within / x.shape[0]


def train_lda(x, labels: Sequence, out_dim: int) -> Lda:
    """Top ``out_dim`` generalized eigenvectors of (S_b, S_w)."""
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] != labels.shape[0]:
        raise DimensionError(f"{x.shape} data do not match {labels.shape[0]} labels")
    n_classes = np.unique(labels).size
    if n_classes < 2:
        raise DimensionError(f"LDA needs at least 2 classes, got {n_classes}")
    limit = min(x.shape[1], n_classes - 1)
    if not 1 <= out_dim <= limit:
        raise DimensionError(f"LDA output dimension {out_dim} must be in [1, {limit}] "
                             f"for {x.shape[1]}-d data with {n_classes} classes")

    between, within = scatter_matrices(x, labels)
    dim = x.shape[1]
    within = within + RIDGE * np.trace(within) / dim * np.eye(dim)
    values, vectors = linalg.eigh(between, within)
    order = np.argsort(values)[::-1][:out_dim]
    projection = vectors[:, order]
    # fix each column's sign by its largest-magnitude entry
    pivots = projection[np.argmax(np.abs(projection), axis=0), np.arange(out_dim)]
    projection = projection * np.where(pivots < 0, -1.0, 1.0)
    return Lda(projection, values[order])
