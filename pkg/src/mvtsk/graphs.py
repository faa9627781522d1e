"""Neighborhood graphs over latent representations and derived operators.

Two quadratic penalties are built from a p-nearest-neighbor Gaussian graph:
the Laplacian smoothness operator L (pairwise first-order similarity) and
the local-reconstruction operator (I - G)^T (I - G) (second-order: each
instance vs. the weighted combination of its neighbors).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from mvtsk.dataset import DegeneracyWarning


@dataclass
class SimilarityGraph:
    """Asymmetric p-NN Gaussian affinity matrix (row i -> its p neighbors)."""

    weights: np.ndarray
    p: int
    bandwidth: float


@dataclass
class GraphOperators:
    """Derived quadratic-form operators for one graph.

    laplacian       L = D - sym(G), built on the symmetrized graph.
    coefficients    row-normalized G (rows summing to 1 where possible).
    reconstruction  (I - coefficients)^T (I - coefficients).
    raw_weights     the affinities both operators were derived from.
    """

    laplacian: np.ndarray
    reconstruction: np.ndarray
    coefficients: np.ndarray
    raw_weights: np.ndarray


def knn_graph(points: np.ndarray, p: int, bandwidth="median") -> SimilarityGraph:
    """Gaussian affinities to the p nearest Euclidean neighbors of each row.

    G[i, j] = exp(-||x_i - x_j||^2 / (2 sigma^2)) for j among the p nearest
    neighbors of i, 0 elsewhere.  ``bandwidth`` is either a positive float
    or "median": sigma = median of the neighbor distances actually used,
    falling back to 1.0 (with a warning) when all used distances are zero.

    A single point yields the empty graph.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[0]
    if n == 1:
        return SimilarityGraph(np.zeros((1, 1)), 0, 1.0)
    p = int(min(max(p, 1), n - 1))

    dist = cdist(points, points)
    # stable argsort keeps neighbor choice deterministic under ties
    order = np.argsort(dist, axis=1, kind="stable")
    neighbor_idx = np.empty((n, p), dtype=int)
    for i in range(n):
        row = order[i]
        neighbor_idx[i] = row[row != i][:p]

    used = dist[np.repeat(np.arange(n), p), neighbor_idx.ravel()]
    if bandwidth == "median":
        sigma = float(np.median(used))
        if sigma <= 0.0:
            warnings.warn(
                "all neighbor distances are zero; falling back to bandwidth 1.0",
                DegeneracyWarning,
            )
            sigma = 1.0
    else:
        sigma = float(bandwidth)
        if sigma <= 0.0:
            raise ValueError(f"bandwidth must be positive, got {sigma}")

    weights = np.zeros((n, n))
    rows = np.repeat(np.arange(n), p)
    weights[rows, neighbor_idx.ravel()] = np.exp(-(used**2) / (2.0 * sigma**2))
    return SimilarityGraph(weights, p, sigma)


def laplacian(graph: SimilarityGraph) -> np.ndarray:
    """L = D - sym(G) on the symmetrized affinities; symmetric PSD, L @ 1 = 0."""
    g = 0.5 * (graph.weights + graph.weights.T)
    return np.diag(g.sum(axis=1)) - g


def row_normalize(weights: np.ndarray) -> np.ndarray:
    """Rows rescaled to sum to 1; all-zero rows are left untouched."""
    sums = weights.sum(axis=1, keepdims=True)
    safe = np.where(sums > 0, sums, 1.0)
    return weights / safe


def reconstruction_operator(graph: SimilarityGraph) -> np.ndarray:
    """(I - G)^T (I - G) with G row-normalized; symmetric PSD.

    The zero graph yields the identity.
    """
    coeff = row_normalize(graph.weights)
    lam = np.eye(coeff.shape[0]) - coeff
    return lam.T @ lam


def build_operators(points: np.ndarray, p: int, bandwidth="median") -> GraphOperators:
    """Convenience: graph from points, then both operators."""
    graph = knn_graph(points, p, bandwidth)
    return GraphOperators(
        laplacian=laplacian(graph),
        reconstruction=reconstruction_operator(graph),
        coefficients=row_normalize(graph.weights),
        raw_weights=graph.weights,
    )
