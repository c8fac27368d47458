from __future__ import annotations
import math
import time
import logging
import itertools
from dataclasses import dataclass, fields
from typing import List, Sequence
from dataset import GraphDataset
from diffusion import TransitionMatrix
from filtration import edge_heights, persistence_run, phi_sorted
from pipeline import PwlrConfig, propagate

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchRow:
    k1: int
    k2: int
    graphs: int
    edges: int
    width: int
    propagation_units: int  # (k1 + k2) * m * l
    sort_units: float  # m log m, summed over graphs
    propagate_s: float
    persistence_s: float
    total_s: float

    @classmethod
    def header(cls) -> List[str]:
        return [f.name for f in fields(cls)]


def benchmark(
    ds: GraphDataset, base: PwlrConfig, k1_values: Sequence[int], k2_values: Sequence[int], repeats: int = 3
) -> List[BenchRow]:
    """
    Wall time of embedding the whole dataset for every (k1, k2), split into the propagation part
    and the sort plus persistence part. Each timing is the best of `repeats` runs.
    """
    if not ds.graphs:
        return []
    if base.md_preprocess:
        ds = ds.preprocess_md()

    feats = ds.encode_features(base.feature_mode)
    matrices = [TransitionMatrix.from_graph(g) for g in ds.graphs]
    edges = sum(g.edge_count for g in ds.graphs)
    width = feats[0].shape[1]
    sort_units = sum(g.edge_count * math.log(g.edge_count) for g in ds.graphs if g.edge_count > 1)

    rows = []
    for k1, k2 in itertools.product(k1_values, k2_values):
        best_prop, best_pers = math.inf, math.inf
        for _ in range(repeats):
            start = time.perf_counter()
            propagated = [propagate(m, x, k1, k2) for m, x in zip(matrices, feats)]
            mid = time.perf_counter()
            for g, y in zip(ds.graphs, propagated):
                phi_sorted(persistence_run(g, edge_heights(g, y, base.p)), base.tau)
            end = time.perf_counter()
            best_prop = min(best_prop, mid - start)
            best_pers = min(best_pers, end - mid)

        row = BenchRow(k1, k2, len(ds), edges, width, (k1 + k2) * edges * width, sort_units,
                       best_prop, best_pers, best_prop + best_pers)
        log.info("bench k1=%d k2=%d: %.4fs", k1, k2, row.total_s)
        rows.append(row)
    return rows
