from __future__ import annotations
import os
import logging
import numpy as np
from dataclasses import dataclass, field
from enum import Enum
from warnings import warn
from typing import Dict, List, Optional, Sequence, Tuple
from errors import ParseError, ValidationError
from graph import Graph
from diffusion import FeatureMatrix

log = logging.getLogger(__name__)


class FeatureMode(Enum):
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"
    BOTH = "both"


def _read_rows(path: str, cast: type) -> List[Tuple[int, List]]:
    """
    Reads a comma separated TU file into (line number, values) rows. Blank lines are skipped,
    whitespace around commas is tolerated.
    """
    rows = []
    with open(path, "r") as f:
        for lineno, line in enumerate(f, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                rows.append((lineno, [cast(tok.strip()) for tok in text.split(",")]))
            except ValueError:
                raise ParseError(path, lineno, f"non-numeric field in {text!r}") from None
    return rows


def _read_column(path: str, cast: type) -> List[Tuple[int, object]]:
    rows = _read_rows(path, cast)
    for lineno, vals in rows:
        if len(vals) != 1:
            raise ParseError(path, lineno, f"expected a single value, got {len(vals)}")
    return [(lineno, vals[0]) for lineno, vals in rows]


def _read_matrix(path: str) -> np.ndarray:
    rows = _read_rows(path, float)
    widths = {len(vals) for _, vals in rows}
    if len(widths) > 1:
        raise ValidationError(f"{path}: inconsistent attribute width, found widths {sorted(widths)}")
    return np.array([vals for _, vals in rows], dtype=float)


@dataclass(eq=False)
class GraphDataset:
    """
    A named collection of graphs sharing one label vocabulary and one attribute width. Once
    built it is never mutated; every transformation returns a new dataset.

    Args:
        - graphs (List[Graph]): graphs in file order
        - name (str): dataset name, e.g. "MUTAG"
    """

    graphs: List[Graph]
    name: str = ""
    label_vocabulary: Tuple[int, ...] = field(init=False)
    attr_width: int = field(init=False)
    class_labels: Tuple[int, ...] = field(init=False)

    def __post_init__(self):
        labels = set()
        widths = set()
        for g in self.graphs:
            if g.node_labels is not None:
                labels.update(g.node_labels.tolist())
            if g.node_attrs is not None:
                widths.add(g.node_attrs.shape[1])
        if len(widths) > 1:
            raise ValidationError(f"inconsistent attribute width across graphs: {sorted(widths)}")

        self.label_vocabulary = tuple(sorted(labels))
        self.attr_width = widths.pop() if widths else 0
        self.class_labels = tuple(sorted({g.label for g in self.graphs}))

    def __len__(self) -> int:
        return len(self.graphs)

    def __getitem__(self, i: int) -> Graph:
        return self.graphs[i]

    @property
    def targets(self) -> np.ndarray:
        return np.array([g.label for g in self.graphs], dtype=np.int64)

    @classmethod
    def from_tu(cls, root: str, name: str) -> GraphDataset:
        """
        Parses a dataset stored in the TU Dortmund text format. Global 1-indexed node ids are
        remapped to per-graph 0-indexed nodes, the two directed rows of an undirected edge are
        collapsed into one edge, and a single-column edge attribute becomes the edge weight.

        Args:
            - root (str): directory holding the `{name}_*.txt` files
            - name (str): dataset name, the common prefix of the files
        """

        def path(suffix: str) -> str:
            return os.path.join(root, f"{name}_{suffix}.txt")

        for mandatory in ("A", "graph_indicator"):
            if not os.path.isfile(path(mandatory)):
                raise FileNotFoundError(f"missing mandatory file {path(mandatory)}")

        indicator = np.array([gid for _, gid in _read_column(path("graph_indicator"), int)], dtype=np.int64)
        total_nodes = len(indicator)
        graph_ids = np.unique(indicator)

        # per-graph local index of every global node, in order of appearance
        local = np.zeros(total_nodes, dtype=np.int64)
        sizes: Dict[int, int] = {}
        for node, gid in enumerate(indicator.tolist()):
            local[node] = sizes.get(gid, 0)
            sizes[gid] = local[node] + 1

        edge_rows = _read_rows(path("A"), int)
        edge_attrs = _read_matrix(path("edge_attributes")) if os.path.isfile(path("edge_attributes")) else None
        if edge_attrs is not None and len(edge_attrs) != len(edge_rows):
            raise ValidationError(
                f"{path('edge_attributes')}: {len(edge_attrs)} rows for {len(edge_rows)} edges in {path('A')}"
            )
        if edge_attrs is not None and edge_attrs.shape[1] > 1:
            warn(f"{name}: edge attributes have width {edge_attrs.shape[1]}; stored but not used as weights")

        edges: Dict[int, Dict[Tuple[int, int], int]] = {int(gid): {} for gid in graph_ids}
        asymmetric = 0
        for row_index, (lineno, vals) in enumerate(edge_rows):
            if len(vals) != 2:
                raise ParseError(path("A"), lineno, f"expected 'i, j', got {len(vals)} fields")
            i, j = vals
            if not (1 <= i <= total_nodes and 1 <= j <= total_nodes):
                raise ParseError(path("A"), lineno, f"node id out of range 1..{total_nodes}")
            if i == j:
                raise ParseError(path("A"), lineno, f"self-loop on node {i}")
            gid = int(indicator[i - 1])
            if gid != indicator[j - 1]:
                raise ParseError(path("A"), lineno, f"edge ({i}, {j}) joins two different graphs")

            a, b = sorted((int(local[i - 1]), int(local[j - 1])))
            seen = edges[gid].get((a, b))
            if seen is None:
                edges[gid][(a, b)] = row_index
            elif edge_attrs is not None and not np.array_equal(edge_attrs[seen], edge_attrs[row_index]):
                asymmetric += 1
        if asymmetric:
            warn(f"{name}: {asymmetric} duplicate edge rows disagree on attributes; kept the first occurrence")

        graph_labels = None
        if os.path.isfile(path("graph_labels")):
            graph_labels = [lab for _, lab in _read_column(path("graph_labels"), int)]
            if len(graph_labels) != len(graph_ids):
                raise ValidationError(f"{len(graph_labels)} graph labels for {len(graph_ids)} graphs")

        node_labels = None
        if os.path.isfile(path("node_labels")):
            node_labels = np.array([lab for _, lab in _read_column(path("node_labels"), int)], dtype=np.int64)
            if len(node_labels) != total_nodes:
                raise ValidationError(f"{len(node_labels)} node labels for {total_nodes} nodes")

        node_attrs = None
        if os.path.isfile(path("node_attributes")):
            node_attrs = _read_matrix(path("node_attributes"))
            if len(node_attrs) != total_nodes:
                raise ValidationError(f"{len(node_attrs)} node attribute rows for {total_nodes} nodes")

        graphs = []
        for k, gid in enumerate(graph_ids.tolist()):
            members = np.flatnonzero(indicator == gid)
            keys = sorted(edges[gid])
            rows = [edges[gid][key] for key in keys]
            attrs = edge_attrs[rows] if edge_attrs is not None else None
            if attrs is not None and attrs.shape[1] == 1:
                weights = attrs[:, 0]
            else:
                weights = np.ones(len(keys))
            graphs.append(
                Graph(
                    node_count=len(members),
                    edges=np.array(keys, dtype=np.int64).reshape(-1, 2),
                    weights=weights,
                    node_labels=node_labels[members] if node_labels is not None else None,
                    node_attrs=node_attrs[members] if node_attrs is not None else None,
                    label=graph_labels[k] if graph_labels is not None else 0,
                    edge_attrs=attrs,
                )
            )

        ds = cls(graphs, name)
        log.info("parsed %s: %d graphs, %d node labels, attr width %d", name, len(ds), len(ds.label_vocabulary),
                 ds.attr_width)
        return ds

    def to_tu(self, root: str, name: Optional[str] = None) -> None:
        """
        Writes the dataset in the TU Dortmund text format, both directions of every edge
        included, so that `from_tu` reads back an identical dataset. Edge attributes of width one are
        written as the current weights, so a preprocessed dataset reads back with its reciprocal weights;
        wider attributes are written raw.
        """
        name = name or self.name
        os.makedirs(root, exist_ok=True)

        def path(suffix: str) -> str:
            return os.path.join(root, f"{name}_{suffix}.txt")

        def fmt(vals: Sequence[float]) -> str:
            return ", ".join(f"{x:.17g}" for x in vals)

        offset = 0
        a_lines, edge_lines, indicator_lines = [], [], []
        for gid, g in enumerate(self.graphs, start=1):
            indicator_lines += [str(gid)] * g.node_count
            for e, (u, v) in enumerate(g.edges.tolist()):
                # a single attribute column is the weight, so write the current weight
                if g.edge_attrs is not None and g.edge_attrs.shape[1] > 1:
                    attr = g.edge_attrs[e]
                else:
                    attr = [g.weights[e]]
                for i, j in ((u, v), (v, u)):
                    a_lines.append(f"{i + offset + 1}, {j + offset + 1}")
                    edge_lines.append(fmt(attr))
            offset += g.node_count

        def dump(suffix: str, lines: List[str]) -> None:
            with open(path(suffix), "w") as f:
                f.write("\n".join(lines) + ("\n" if lines else ""))

        dump("A", a_lines)
        dump("graph_indicator", indicator_lines)
        dump("graph_labels", [str(g.label) for g in self.graphs])

        # unit weights with no raw attributes need no edge file
        if any(g.edge_attrs is not None or np.any(g.weights != 1.0) for g in self.graphs):
            dump("edge_attributes", edge_lines)
        if all(g.node_labels is not None for g in self.graphs):
            dump("node_labels", [str(lab) for g in self.graphs for lab in g.node_labels.tolist()])
        if self.attr_width:
            dump("node_attributes", [fmt(row) for g in self.graphs for row in g.node_attrs])

    def preprocess_md(self) -> GraphDataset:
        return GraphDataset([g.preprocess_md() for g in self.graphs], self.name)

    def encode_graph(self, g: Graph, mode: FeatureMode) -> FeatureMatrix:
        """
        Node-major feature matrix of one graph against this dataset's vocabulary: one-hot
        discrete labels, raw continuous attributes, or both concatenated column-wise.
        """
        return encode_graph(g, mode, self.label_vocabulary)

    def encode_features(self, mode: FeatureMode) -> List[FeatureMatrix]:
        if mode in (FeatureMode.DISCRETE, FeatureMode.BOTH) and not self.label_vocabulary:
            raise ValidationError(f"{self.name}: mode {mode.value} needs discrete node labels")
        if mode in (FeatureMode.CONTINUOUS, FeatureMode.BOTH) and not self.attr_width:
            raise ValidationError(f"{self.name}: mode {mode.value} needs continuous node attributes")
        return [self.encode_graph(g, mode) for g in self.graphs]

    def statistics(self) -> Dict[str, float]:
        return {
            "graphs": len(self.graphs),
            "avg_nodes": float(np.mean([g.node_count for g in self.graphs])) if self.graphs else 0.0,
            "avg_edges": float(np.mean([g.edge_count for g in self.graphs])) if self.graphs else 0.0,
            "discrete_labels": len(self.label_vocabulary),
            "attr_width": self.attr_width,
            "classes": len(self.class_labels),
        }


def encode_graph(g: Graph, mode: FeatureMode, vocabulary: Optional[Sequence[int]] = None) -> FeatureMatrix:
    """
    Args:
        - g (Graph): graph to encode
        - mode (FeatureMode): which node data to use
        - vocabulary (Sequence[int]): ordered label ids giving the one-hot columns. Defaults to the
            graph's own sorted labels
    """
    blocks = []
    if mode in (FeatureMode.DISCRETE, FeatureMode.BOTH):
        if g.node_labels is None:
            raise ValidationError(f"mode {mode.value} needs discrete node labels")
        vocab = list(vocabulary) if vocabulary is not None else sorted(set(g.node_labels.tolist()))
        index = {lab: i for i, lab in enumerate(vocab)}
        missing = set(g.node_labels.tolist()) - index.keys()
        if missing:
            raise ValidationError(f"node labels {sorted(missing)} are not in the vocabulary")
        blocks.append(np.eye(len(vocab))[[index[lab] for lab in g.node_labels.tolist()]])
    if mode in (FeatureMode.CONTINUOUS, FeatureMode.BOTH):
        if g.node_attrs is None:
            raise ValidationError(f"mode {mode.value} needs continuous node attributes")
        blocks.append(g.node_attrs)
    return FeatureMatrix(np.hstack(blocks).reshape(g.node_count, -1))
