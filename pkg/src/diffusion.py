from __future__ import annotations
import logging
import numpy as np
import scipy.sparse as sp
from dataclasses import dataclass
from enum import Enum
from scipy.sparse.csgraph import connected_components
from typing import List, Tuple
from errors import ConvergenceError, DegenerateLabelError, DisconnectedGraphError, ValidationError
from graph import Graph
from utils.config import load_config

log = logging.getLogger(__name__)


class Orientation(Enum):
    NODE_MAJOR = "node-major"  # |V| x l
    FEATURE_MAJOR = "feature-major"  # l x |V|


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """
    Dense real matrix of node features together with its orientation. WL propagation works on
    node-major matrices (one row per node), RW propagation on feature-major ones (one column
    per node).
    """

    values: np.ndarray
    orientation: Orientation = Orientation.NODE_MAJOR

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValidationError(f"feature matrix must be 2d, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @property
    def node_count(self) -> int:
        return self.shape[0] if self.orientation == Orientation.NODE_MAJOR else self.shape[1]

    def transpose(self) -> FeatureMatrix:
        flipped = (
            Orientation.FEATURE_MAJOR if self.orientation == Orientation.NODE_MAJOR else Orientation.NODE_MAJOR
        )
        return FeatureMatrix(self.values.T, flipped)

    def node_rows(self) -> np.ndarray:
        """Per-node feature vectors, one row per node, whatever the orientation."""
        return self.values if self.orientation == Orientation.NODE_MAJOR else self.values.T


@dataclass(frozen=True)
class SpectralSummary:
    stationary: np.ndarray
    mu2: float


class TransitionMatrix:
    """
    The lazy weighted random walk M = (D+I)^-1 (A+I) of a graph, kept in sparse form. Every row
    sums to one and every diagonal entry is positive; an isolated node gets an identity row.

    Matrix powers are never formed: propagation applies M once per iteration, so k iterations
    cost k sparse products.

    Args:
        - matrix (sp.csr_matrix): the row-stochastic matrix
        - weighted_degrees (np.ndarray): d_v = sum of incident weights, self-loop excluded
    """

    config = load_config()
    MAX_ITER = config["power-iteration"]["max-iter"]
    TOL = config["power-iteration"]["tol"]
    SEED = config["power-iteration"]["seed"]
    BLOCK = config["power-iteration"]["block"]

    def __init__(self, matrix: sp.csr_matrix, weighted_degrees: np.ndarray):
        self.matrix = matrix.tocsr()
        self.matrix_t = self.matrix.T.tocsr()
        self.weighted_degrees = np.asarray(weighted_degrees, dtype=float)

    @classmethod
    def from_graph(cls, g: Graph) -> TransitionMatrix:
        if g.edge_count and np.any(g.weights <= 0):
            raise ValidationError("transition matrix needs strictly positive weights; run preprocess_md first")

        lazy = g.adjacency() + sp.identity(g.node_count, format="csr")
        deg = g.weighted_degrees()
        matrix = sp.diags(1.0 / (deg + 1.0)) @ lazy
        return cls(sp.csr_matrix(matrix), deg)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def components(self) -> Tuple[int, np.ndarray]:
        n, labels = connected_components(self.matrix, directed=False)
        return int(n), labels

    def wl_propagate(self, x: FeatureMatrix, k1: int) -> FeatureMatrix:
        """
        Normalized WL: M^k1 X by k1 successive sparse products. k1 = 0 returns X unchanged.
        """
        if x.orientation != Orientation.NODE_MAJOR:
            raise ValidationError("WL propagation needs a node-major feature matrix")
        if x.shape[0] != self.dim:
            raise ValidationError(f"feature rows ({x.shape[0]}) do not match matrix dimension ({self.dim})")
        if k1 < 0:
            raise ValidationError(f"k1 must be nonnegative, got {k1}")

        values = x.values
        for _ in range(k1):
            values = self.matrix @ values
        return FeatureMatrix(values, Orientation.NODE_MAJOR)

    def rw_propagate(self, y: FeatureMatrix, k2: int) -> FeatureMatrix:
        """
        Random walk update: Y M^k2 for a feature-major Y. k2 = 0 returns Y unchanged.
        """
        self._check_feature_major(y)
        if k2 < 0:
            raise ValidationError(f"k2 must be nonnegative, got {k2}")

        # (Y M)^T = M^T Y^T keeps the sparse operand on the left
        values_t = y.values.T
        for _ in range(k2):
            values_t = self.matrix_t @ values_t
        return FeatureMatrix(values_t.T, Orientation.FEATURE_MAJOR)

    def rw_limit(self, y: FeatureMatrix) -> FeatureMatrix:
        """
        The k2 -> infinity limit of Y M^k2. Within every connected component C, the column of node w
        is the component's total feature mass times the stationary weight of w on C.
        """
        self._check_feature_major(y)
        _, labels = self.components()
        lazy_deg = self.weighted_degrees + 1.0
        comp_deg = np.bincount(labels, weights=lazy_deg)
        pi_local = lazy_deg / comp_deg[labels]

        # mass[:, c] = sum of Y over the nodes of component c
        indicator = sp.csr_matrix((np.ones(self.dim), (np.arange(self.dim), labels)))
        mass = (indicator.T @ y.values.T).T
        return FeatureMatrix(mass[:, labels] * pi_local, Orientation.FEATURE_MAJOR)

    def stationary_distribution(self) -> np.ndarray:
        """
        The stationary distribution of the lazy walk, proportional to d_v + 1. The +1 accounts for the
        unit self-loop of (A+I).
        """
        n_comp, _ = self.components()
        if n_comp > 1:
            raise DisconnectedGraphError(
                f"graph has {n_comp} connected components; compute the stationary distribution per component"
            )

        pi = (self.weighted_degrees + 1.0) / np.sum(self.weighted_degrees + 1.0)
        residual = np.abs(self.matrix_t @ pi - pi).sum()
        if residual >= 1e-10:
            raise ConvergenceError(f"stationary residual {residual:.3e} above 1e-10", residual)
        return pi

    def second_eigenvalue(
        self, max_iter: int = MAX_ITER, tol: float = TOL, seed: int = SEED, block: int = BLOCK
    ) -> float:
        """
        Second largest eigenvalue modulus of M by block power iteration after deflating the Perron pair.

        M is similar to the symmetric S = D'^1/2 M D'^-1/2 with D' = diag(d_v + 1), whose Perron vector is
        u = sqrt(pi). A block of random vectors orthogonal to u is multiplied by S and re-orthonormalized
        each iteration; the Ritz value of largest modulus on the block is the estimate. Its Ritz vector z
        gives the residual ||S z - theta z||, and the loop stops once that residual is below tol. Nearly
        equal second and third eigenvalues converge at the rate of the first eigenvalue outside the block.

        Args:
            - max_iter (int): iteration cap
            - tol (float): residual at which the Ritz pair is accepted
            - seed (int): seed of the random start block
            - block (int): block width, capped at |V| - 1
        """
        pi = self.stationary_distribution()
        if self.dim == 1:
            return 0.0

        root = np.sqrt(self.weighted_degrees + 1.0)
        sym = sp.diags(root) @ self.matrix @ sp.diags(1.0 / root)
        u = np.sqrt(pi)

        def deflated(q: np.ndarray) -> np.ndarray:
            y = sym @ q
            return y - np.outer(u, u @ y)

        width = min(block, self.dim - 1)
        q = np.random.default_rng(seed).standard_normal((self.dim, width))
        q, _ = np.linalg.qr(q - np.outer(u, u @ q))

        residual = np.inf
        for it in range(max_iter):
            sq = deflated(q)
            theta, vecs = np.linalg.eigh(q.T @ sq)
            top = int(np.argmax(np.abs(theta)))
            z = q @ vecs[:, top]
            residual = float(np.linalg.norm(sq @ vecs[:, top] - theta[top] * z))
            if residual < tol:
                log.debug("second eigenvalue %.12f after %d iterations", abs(theta[top]), it + 1)
                return float(abs(theta[top]))
            q, _ = np.linalg.qr(sq - np.outer(u, u @ sq))
        raise ConvergenceError(
            f"block power iteration did not converge in {max_iter} iterations (residual {residual:.3e})", residual
        )

    def spectral_summary(self) -> SpectralSummary:
        return SpectralSummary(self.stationary_distribution(), self.second_eigenvalue())

    def ergodicity_profile(self, y: FeatureMatrix, k_max: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Distances of Y M^k to its limit for k = 0..k_max.

        Returns:
            (l1, weighted): the largest per-node l1 distance, and the Frobenius norm of the error scaled by
            D'^-1/2, in which norm every step contracts by at least mu2
        """
        self._check_feature_major(y)
        limit = self.rw_limit(y).values
        scale = 1.0 / np.sqrt(self.weighted_degrees + 1.0)

        l1: List[float] = []
        weighted: List[float] = []
        current = y
        for k in range(k_max + 1):
            err = current.values - limit
            l1.append(float(np.abs(err).sum(axis=0).max()) if self.dim else 0.0)
            weighted.append(float(np.linalg.norm(err * scale)))
            if k < k_max:
                current = self.rw_propagate(current, 1)
        return np.array(l1), np.array(weighted)

    def _check_feature_major(self, y: FeatureMatrix) -> None:
        if y.orientation != Orientation.FEATURE_MAJOR:
            raise ValidationError("RW propagation needs a feature-major matrix; transpose the WL output first")
        if y.shape[1] != self.dim:
            raise ValidationError(f"feature columns ({y.shape[1]}) do not match matrix dimension ({self.dim})")


def normalized_wl_step(g: Graph, labels: np.ndarray) -> np.ndarray:
    """
    One explicit normalized WL update, node by node: every node's label becomes the weighted sum of
    the labels in its closed neighbourhood divided by the weighted sum of their l1 norms, with
    weight 1 on the node itself.

    Args:
        - g (Graph): graph with strictly positive weights
        - labels (np.ndarray): (n, l) nonnegative labels, or (n,) for scalar labels
    """
    labels = np.asarray(labels, dtype=float)
    vector = labels.ndim == 1
    labels = labels.reshape(g.node_count, -1)
    if np.any(labels < 0):
        raise ValidationError("normalized WL needs nonnegative labels")

    neighbours: List[List[Tuple[int, float]]] = [[(v, 1.0)] for v in range(g.node_count)]
    for (u, v), w in zip(g.edges.tolist(), g.weights.tolist()):
        neighbours[u].append((v, w))
        neighbours[v].append((u, w))

    norms = np.abs(labels).sum(axis=1)
    out = np.empty_like(labels)
    for v, closed in enumerate(neighbours):
        num = sum(w * labels[x] for x, w in closed)
        den = sum(w * norms[x] for x, w in closed)
        if den == 0:
            raise DegenerateLabelError(f"node {v}: every label in its neighbourhood has zero l1 norm")
        out[v] = num / den
    return out.reshape(-1) if vector else out
