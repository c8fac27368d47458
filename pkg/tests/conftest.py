import os
import numpy as np
import pytest
from dataset import GraphDataset
from diffusion import FeatureMatrix
from graph import Graph
from utils.config import ASSETS_DIR

FIXTURE_ROOT = os.path.join(ASSETS_DIR, "fixtures", "WORKED_EXAMPLE")


@pytest.fixture
def worked_graph() -> Graph:
    # four nodes labelled A, B, C, C; weights 1, 2, 3, 1 on e12, e13, e14, e34
    return Graph.from_edges(4, [(0, 1, 1.0), (0, 2, 2.0), (0, 3, 3.0), (2, 3, 1.0)], node_labels=[0, 1, 2, 2], label=1)


@pytest.fixture
def worked_features() -> FeatureMatrix:
    return FeatureMatrix(np.eye(3)[[0, 1, 2, 2]])


@pytest.fixture
def worked_dataset() -> GraphDataset:
    return GraphDataset.from_tu(FIXTURE_ROOT, "WORKED_EXAMPLE")


def random_graph(rng: np.random.Generator, n: int, extra: int, connected: bool = True, ties: bool = False) -> Graph:
    """
    A random weighted graph on n nodes: a random spanning tree (when connected) plus up to `extra`
    further edges. With ties, weights come from {1, 2} so many edges share a value.
    """
    edges = set()
    if connected:
        order = rng.permutation(n)
        for i in range(1, n):
            u, v = int(order[i]), int(order[rng.integers(0, i)])
            edges.add((min(u, v), max(u, v)))
    for _ in range(extra):
        u, v = rng.choice(n, size=2, replace=False) if n > 1 else (0, 0)
        if u != v:
            edges.add((int(min(u, v)), int(max(u, v))))

    edges = sorted(edges)
    weights = rng.integers(1, 3, len(edges)).astype(float) if ties else rng.uniform(0.1, 5.0, len(edges))
    labels = rng.integers(0, 3, n)
    return Graph.from_edges(n, edges, weights, node_labels=labels, label=int(rng.integers(0, 2)))


def unit_l1_labels(rng: np.random.Generator, n: int, width: int = 3) -> np.ndarray:
    raw = rng.uniform(0.0, 1.0, (n, width)) + 1e-3
    return raw / raw.sum(axis=1, keepdims=True)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def tu_dataset(name: str) -> GraphDataset:
    """A downloaded TU dataset under PWLR_DATA_DIR; skips the test when it is absent."""
    data_dir = os.environ.get("PWLR_DATA_DIR")
    if not data_dir:
        pytest.skip("PWLR_DATA_DIR not set")
    for root in (os.path.join(data_dir, name), data_dir):
        if os.path.isfile(os.path.join(root, f"{name}_A.txt")):
            return GraphDataset.from_tu(root, name)
    pytest.skip(f"{name} not found under {data_dir}")


def ring(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)], node_labels=[i % 2 for i in range(n)], label=1)


def path(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)], node_labels=[i % 2 for i in range(n)], label=0)
