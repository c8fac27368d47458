from __future__ import annotations
import numpy as np
import scipy.sparse as sp
from dataclasses import dataclass, replace
from scipy.sparse.csgraph import connected_components
from typing import Iterable, List, Optional, Sequence, Tuple
from errors import ValidationError


@dataclass(eq=False)
class Graph:
    """
    A finite undirected graph without self-loops, carrying optional node data.

    Edges are stored once each, canonically as (u, v) with u < v, and the edge list is kept in
    lexicographic order. That order is the "canonical edge index" used to break ties wherever
    edges are sorted.

    Args:
        - node_count (int): number of nodes, indexed 0..node_count-1
        - edges (np.ndarray): (m, 2) integer array of canonical edges
        - weights (np.ndarray): (m,) nonnegative edge weights. Raw molecular-distance graphs
            may carry zero weights until `preprocess_md` drops them
        - node_labels (np.ndarray): optional (n,) integer discrete labels
        - node_attrs (np.ndarray): optional (n, width) continuous attributes
        - label (int): graph class
        - edge_attrs (np.ndarray): optional (m, width) raw edge attributes
    """

    node_count: int
    edges: np.ndarray
    weights: np.ndarray
    node_labels: Optional[np.ndarray] = None
    node_attrs: Optional[np.ndarray] = None
    label: int = 0
    edge_attrs: Optional[np.ndarray] = None

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        m = len(self.edges)

        if self.node_count < 1:
            raise ValidationError(f"a graph needs at least one node, got {self.node_count}")
        if len(self.weights) != m:
            raise ValidationError(f"{len(self.weights)} weights given for {m} edges")
        if m:
            u, v = self.edges[:, 0], self.edges[:, 1]
            if np.any(u == v):
                raise ValidationError("self-loops are not allowed")
            if np.any(u > v):
                raise ValidationError("edges must be stored canonically with u < v")
            if u.min() < 0 or v.max() >= self.node_count:
                raise ValidationError(f"edge endpoint out of range for {self.node_count} nodes")
            keys = u * self.node_count + v
            if np.any(np.diff(keys) <= 0):
                raise ValidationError("edges must be unique and in lexicographic order")
            if not np.all(np.isfinite(self.weights)) or np.any(self.weights < 0):
                raise ValidationError("edge weights must be finite and nonnegative")

        if self.node_labels is not None:
            self.node_labels = np.asarray(self.node_labels, dtype=np.int64).reshape(-1)
            if len(self.node_labels) != self.node_count:
                raise ValidationError(f"{len(self.node_labels)} node labels for {self.node_count} nodes")
        if self.node_attrs is not None:
            self.node_attrs = np.asarray(self.node_attrs, dtype=float)
            if self.node_attrs.ndim != 2 or len(self.node_attrs) != self.node_count:
                raise ValidationError(
                    f"node attributes must be a ({self.node_count}, width) array, got {self.node_attrs.shape}"
                )
        if self.edge_attrs is not None:
            self.edge_attrs = np.asarray(self.edge_attrs, dtype=float).reshape(m, -1)

    @classmethod
    def from_edges(
        cls,
        node_count: int,
        edges: Iterable[Sequence[float]],
        weights: Optional[Sequence[float]] = None,
        **kwargs,
    ) -> Graph:
        """
        Builds a graph from an arbitrary list of undirected edges, putting every edge in
        canonical (u < v) form and sorting the edge list.

        Args:
            - node_count (int): number of nodes
            - edges (Iterable): pairs (u, v) or triples (u, v, weight)
            - weights (Sequence[float]): weights, used when edges are plain pairs. Defaults to 1.0
            - kwargs: forwarded to the constructor (node_labels, node_attrs, label, edge_attrs)
        """
        rows = [tuple(e) for e in edges]
        pairs = np.array([r[:2] for r in rows], dtype=np.int64).reshape(-1, 2)
        if weights is None:
            weights = [r[2] if len(r) > 2 else 1.0 for r in rows]
        w = np.asarray(weights, dtype=float).reshape(-1)

        if len(pairs) and np.any(pairs[:, 0] == pairs[:, 1]):
            raise ValidationError("self-loops are not allowed")

        canon = np.sort(pairs, axis=1)
        order = np.lexsort((canon[:, 1], canon[:, 0]))
        edge_attrs = kwargs.pop("edge_attrs", None)
        if edge_attrs is not None:
            edge_attrs = np.asarray(edge_attrs, dtype=float).reshape(len(pairs), -1)[order]
        return cls(node_count, canon[order], w[order], edge_attrs=edge_attrs, **kwargs)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        """Unweighted degrees: number of incident edges, the implicit self-loop excluded."""
        return np.bincount(self.edges.ravel(), minlength=self.node_count)

    def weighted_degrees(self) -> np.ndarray:
        return np.bincount(
            self.edges.ravel(), weights=np.repeat(self.weights, 2), minlength=self.node_count
        ).astype(float)

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric weighted adjacency matrix A."""
        u, v = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        data = np.concatenate([self.weights, self.weights])
        return sp.csr_matrix((data, (rows, cols)), shape=(self.node_count, self.node_count))

    def degree_tuples(self) -> List[Tuple[int, int]]:
        """Per edge, the sorted pair (min, max) of the endpoints' unweighted degrees."""
        deg = self.degrees()
        pairs = np.sort(deg[self.edges], axis=1) if self.edge_count else np.empty((0, 2), dtype=np.int64)
        return [(int(a), int(b)) for a, b in pairs]

    def component_count(self) -> int:
        n, _ = connected_components(self.adjacency(), directed=False)
        return int(n)

    def is_connected(self) -> bool:
        return self.component_count() == 1

    def merge_count(self) -> int:
        """Number of H0-merge events any filtration of this graph produces: |V| - β₀(G)."""
        return self.node_count - self.component_count()

    def cycle_count(self) -> int:
        """Number of H1-cycle events: |E| - |V| + β₀(G)."""
        return self.edge_count - self.merge_count()

    def with_weights(self, weights: Sequence[float]) -> Graph:
        return replace(self, weights=np.asarray(weights, dtype=float).copy())

    def permute(self, perm: Sequence[int]) -> Graph:
        """
        Relabels node i as perm[i]; node data moves with the nodes.

        Args:
            - perm (Sequence[int]): a permutation of 0..node_count-1
        """
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.node_count)):
            raise ValidationError("perm must be a permutation of the node indices")

        inverse = np.argsort(perm)
        labels = self.node_labels[inverse] if self.node_labels is not None else None
        attrs = self.node_attrs[inverse] if self.node_attrs is not None else None
        return Graph.from_edges(
            self.node_count,
            perm[self.edges],
            self.weights,
            node_labels=labels,
            node_attrs=attrs,
            label=self.label,
            edge_attrs=self.edge_attrs,
        )

    def preprocess_md(self) -> Graph:
        """
        Prepares a molecular-distance graph: edges whose weight is exactly 0 stand for atoms that are
        not bonded and are dropped, the remaining weights are distances and get replaced by their
        reciprocals. Node data is left untouched. An empty resulting edge set is legal.
        """
        keep = self.weights != 0
        edge_attrs = self.edge_attrs[keep] if self.edge_attrs is not None else None
        return replace(
            self,
            edges=self.edges[keep].copy(),
            weights=1.0 / self.weights[keep],
            edge_attrs=edge_attrs,
        )
