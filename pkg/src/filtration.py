from __future__ import annotations
import numpy as np
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple
from diffusion import FeatureMatrix
from errors import ValidationError, VocabularyError
from graph import Graph
from utils.union_find import UnionFind

DegreeTuple = Tuple[int, int]


class EventKind(Enum):
    MERGE = "H0"
    CYCLE = "H1"


@dataclass(frozen=True)
class PersistenceEvent:
    edge: int
    height: float
    kind: EventKind
    degree_tuple: DegreeTuple


@dataclass(frozen=True)
class PersistenceSummary:
    """
    Result of one filtration run: one event per edge, in the order the edges entered the
    filtration (nondecreasing height, ties in canonical edge order).
    """

    events: Tuple[PersistenceEvent, ...]
    node_count: int
    beta0_final: int
    beta1_final: int

    @property
    def merges(self) -> List[PersistenceEvent]:
        return [e for e in self.events if e.kind == EventKind.MERGE]

    @property
    def cycles(self) -> List[PersistenceEvent]:
        return [e for e in self.events if e.kind == EventKind.CYCLE]

    def betti_table(self) -> List[Tuple[float, int, int]]:
        """
        (height, β₀, β₁) of every nested subgraph G^[0] ⊂ G^[1] ⊂ ... ⊂ G, where G^[i] holds the
        first i edges. G^[0] has all nodes, no edges, and height 0.
        """
        beta0, beta1 = self.node_count, 0
        rows = [(0.0, beta0, beta1)]
        for e in self.events:
            if e.kind == EventKind.MERGE:
                beta0 -= 1
            else:
                beta1 += 1
            rows.append((e.height, beta0, beta1))
        return rows


def edge_heights(g: Graph, feats: FeatureMatrix, p: float = 1) -> np.ndarray:
    """
    h_E(u, v) = ||X(u) - X(v)||_p for every edge, in canonical edge order. Nodes sit at height 0.

    Args:
        - g (Graph): the graph
        - feats (FeatureMatrix): one feature vector per node, in either orientation
        - p (float): norm order, at least 1 (np.inf allowed)
    """
    if p < 1:
        raise ValidationError(f"norm order p must be >= 1, got {p}")
    rows = feats.node_rows()
    if len(rows) != g.node_count:
        raise ValidationError(f"{len(rows)} feature vectors for {g.node_count} nodes")
    if not g.edge_count:
        return np.zeros(0)

    diff = rows[g.edges[:, 0]] - rows[g.edges[:, 1]]
    if diff.shape[1] == 0:
        return np.zeros(g.edge_count)
    return np.linalg.norm(diff, ord=p, axis=1)


def persistence_run(g: Graph, heights: Sequence[float]) -> PersistenceSummary:
    """
    Inserts the edges by increasing height into the edgeless graph on all nodes. An edge joining
    two components is an H0-merge event, an edge closing a loop is an H1-cycle event.
    """
    heights = np.asarray(heights, dtype=float)
    if len(heights) != g.edge_count:
        raise ValidationError(f"{len(heights)} heights for {g.edge_count} edges")

    order = np.argsort(heights, kind="stable")
    tuples = g.degree_tuples()
    uf = UnionFind(g.node_count)

    events = []
    for e in order.tolist():
        u, v = g.edges[e]
        kind = EventKind.MERGE if uf.union(int(u), int(v)) else EventKind.CYCLE
        events.append(PersistenceEvent(e, float(heights[e]), kind, tuples[e]))

    beta1 = sum(1 for ev in events if ev.kind == EventKind.CYCLE)
    return PersistenceSummary(tuple(events), g.node_count, uf.components, beta1)


def phi_sorted(summary: PersistenceSummary, tau: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Sorted shifted heights (h + tau) of the merge events and of the cycle events."""
    phi_h0 = np.sort([e.height + tau for e in summary.merges])
    phi_h1 = np.sort([e.height + tau for e in summary.cycles])
    return phi_h0.astype(float), phi_h1.astype(float)


def phi_reduced(
    summary: PersistenceSummary, tau: float, vocab: Sequence[DegreeTuple]
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per degree tuple of the vocabulary, the sum of (h + tau) over merge events and over cycle
    events whose edge carries that tuple. Tuples the graph lacks stay 0.
    """
    index = {tuple(t): i for i, t in enumerate(vocab)}
    opt = {EventKind.MERGE: np.zeros(len(index)), EventKind.CYCLE: np.zeros(len(index))}
    for e in summary.events:
        if e.degree_tuple not in index:
            raise VocabularyError(f"degree tuple {e.degree_tuple} of edge {e.edge} is not in the vocabulary")
        opt[e.kind][index[e.degree_tuple]] += e.height + tau
    return opt[EventKind.MERGE], opt[EventKind.CYCLE]
