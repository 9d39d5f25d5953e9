"""Least-squares stress, its majorizer and the V / B(X) matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.spatial.distance import cdist

from .laplace import graph_laplacian


@dataclass(frozen=True, eq=False)
class StressProblem:
    """Dissimilarities ``d_ij``, weights ``w_ij`` and the embedding dimension.

    A zero weight marks a missing dissimilarity. The weight graph must be
    connected, otherwise ``V`` has a larger null space and the SMACOF update is
    not well defined.
    """

    dissimilarities: np.ndarray
    weights: np.ndarray
    dim: int = 3

    def __post_init__(self):
        d = np.array(self.dissimilarities, dtype=float)
        w = np.array(self.weights, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or w.shape != d.shape:
            raise ValueError("dissimilarity and weight tables must be square and of equal shape")
        if not np.allclose(d, d.T, rtol=0, atol=1e-12 * max(np.abs(d).max(initial=0.0), 1.0)):
            raise ValueError("dissimilarity table is not symmetric")
        if not np.allclose(w, w.T, rtol=0, atol=1e-12 * max(np.abs(w).max(initial=0.0), 1.0)):
            raise ValueError("weight table is not symmetric")
        if np.any(d < 0) or np.any(w < 0):
            raise ValueError("dissimilarities and weights must be nonnegative")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(w))):
            raise ValueError("dissimilarities and weights must be finite")
        d = 0.5 * (d + d.T)
        w = 0.5 * (w + w.T)
        np.fill_diagonal(d, 0.0)
        np.fill_diagonal(w, 0.0)
        if len(d) > 1:
            n_comp, _ = csgraph.connected_components(sp.csr_matrix(w > 0), directed=False)
            if n_comp > 1:
                raise ValueError(f"weight graph has {n_comp} connected components; it must be connected")
        for a in (d, w):
            a.setflags(write=False)
        object.__setattr__(self, "dissimilarities", d)
        object.__setattr__(self, "weights", w)

    @property
    def n_points(self) -> int:
        return len(self.dissimilarities)

    @property
    def unit_weights(self) -> bool:
        off = ~np.eye(self.n_points, dtype=bool)
        return bool(np.all(self.weights[off] == 1.0))

    @property
    def constant_term(self) -> float:
        """``sum_{i<j} w_ij d_ij^2``."""
        return 0.5 * float(np.sum(self.weights * self.dissimilarities ** 2))

    def laplacian(self) -> np.ndarray:
        return graph_laplacian(self.weights)

    def subproblem(self, indices) -> "StressProblem":
        idx = np.asarray(indices)
        return StressProblem(self.dissimilarities[np.ix_(idx, idx)], self.weights[np.ix_(idx, idx)], self.dim)


def unit_weights(n: int) -> np.ndarray:
    w = np.ones((n, n))
    np.fill_diagonal(w, 0.0)
    return w


def relative_weights(dissimilarities) -> np.ndarray:
    """Relative-stress weights ``w_ij = d_ij^-2`` with a zero diagonal."""
    d = np.asarray(dissimilarities, dtype=float)
    off = ~np.eye(len(d), dtype=bool)
    if np.any(d[off] <= 0):
        raise ValueError("relative weights need strictly positive off-diagonal dissimilarities")
    w = np.zeros_like(d)
    w[off] = 1.0 / d[off] ** 2
    return w


def _check(X, prob):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != prob.n_points:
        raise ValueError(f"embedding of shape {X.shape} does not match a {prob.n_points}-point problem")
    return X


def stress_value(X, prob: StressProblem) -> float:
    """Kruskal stress ``sum_{i<j} w_ij (||x_i - x_j|| - d_ij)^2``."""
    X = _check(X, prob)
    r = cdist(X, X) - prob.dissimilarities
    return 0.5 * float(np.sum(prob.weights * r * r))


def b_matrix(Z, prob: StressProblem) -> np.ndarray:
    """``B(Z)``: ``-w_ij d_ij / ||z_i - z_j||`` off the diagonal, zero for coincident points.

    The diagonal makes every row sum to zero.
    """
    Z = _check(Z, prob)
    dist = cdist(Z, Z)
    with np.errstate(divide="ignore", invalid="ignore"):
        B = np.where(dist > 0, -prob.weights * prob.dissimilarities / dist, 0.0)
    np.fill_diagonal(B, 0.0)
    np.fill_diagonal(B, -B.sum(axis=1))
    return B


def majorizer_value(X, Z, prob: StressProblem, V=None) -> float:
    """``h(X, Z) = tr(X'VX) - 2 tr(Z'B(Z)X) + sum_{i<j} w_ij d_ij^2``."""
    X = _check(X, prob)
    Z = _check(Z, prob)
    if X.shape != Z.shape:
        raise ValueError("X and Z must have the same shape")
    if V is None:
        V = prob.laplacian()
    B = b_matrix(Z, prob)
    return float(np.sum(X * (V @ X)) - 2.0 * np.sum((B @ Z) * X) + prob.constant_term)


def center(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X - X.mean(axis=0)
