from __future__ import annotations
import math
import asyncio
import logging
import numpy as np
import scipy.sparse.linalg as spla
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union
from dataset import FeatureMode, GraphDataset, encode_graph
from diffusion import FeatureMatrix, TransitionMatrix
from errors import ValidationError
from filtration import DegreeTuple, PersistenceSummary, edge_heights, persistence_run, phi_reduced, phi_sorted
from graph import Graph
from utils.config import load_config

log = logging.getLogger(__name__)

_config = load_config()
_defaults = _config["embedding"]


class Mode(Enum):
    H0 = "h0"
    H1 = "h1"
    H0H1 = "h0h1"
    OPT_H0 = "opt-h0"
    OPT_H1 = "opt-h1"
    OPT_H0H1 = "opt-h0h1"

    @property
    def reduced(self) -> bool:
        return self.value.startswith("opt")

    @property
    def uses_h0(self) -> bool:
        return self.value.endswith("h0") or self.value.endswith("h0h1")

    @property
    def uses_h1(self) -> bool:
        return self.value.endswith("h1")


@dataclass(frozen=True)
class PwlrConfig:
    """
    Parameters of one embedding. k2 may be math.inf, which replaces the random walk by its
    stationary limit.

    Args:
        - k1 (int): WL iterations, 0..max-iterations
        - k2 (int | float): RW iterations, 0..max-iterations or inf
        - p (float): norm order of the height function
        - tau (float): bias added to every recorded height
        - mode (Mode): which representation to emit
        - feature_mode (FeatureMode): which node data to start from
        - md_preprocess (bool): drop zero-weight edges and invert distances first
    """

    MAX_ITERATIONS = _defaults["max-iterations"]

    k1: int = _defaults["k1"]
    k2: Union[int, float] = _defaults["k2"]
    p: float = _defaults["p"]
    tau: float = _defaults["tau"]
    mode: Mode = Mode(_defaults["mode"])
    feature_mode: FeatureMode = FeatureMode(_defaults["feature-mode"])
    md_preprocess: bool = False

    def __post_init__(self):
        if not (isinstance(self.k1, (int, np.integer)) and 0 <= self.k1 <= self.MAX_ITERATIONS):
            raise ValidationError(f"k1 must be an integer in 0..{self.MAX_ITERATIONS}, got {self.k1}")
        if self.k2 != math.inf and not (
            isinstance(self.k2, (int, np.integer)) and 0 <= self.k2 <= self.MAX_ITERATIONS
        ):
            raise ValidationError(f"k2 must be an integer in 0..{self.MAX_ITERATIONS} or inf, got {self.k2}")
        if self.p < 1:
            raise ValidationError(f"p must be >= 1, got {self.p}")

    def to_dict(self) -> Dict[str, object]:
        d = asdict(self)
        d["k2"] = "inf" if self.k2 == math.inf else self.k2
        d["mode"] = self.mode.value
        d["feature_mode"] = self.feature_mode.value
        return d


@dataclass(eq=False)
class GraphEmbedding:
    """Everything computed for one graph: propagated features, heights, persistence and the four vectors."""

    features: FeatureMatrix
    heights: np.ndarray
    summary: PersistenceSummary
    phi_h0: np.ndarray
    phi_h1: np.ndarray
    opt_h0: np.ndarray
    opt_h1: np.ndarray


@dataclass(eq=False)
class DatasetEmbedding:
    """
    One fixed-length vector per graph, all sharing the same coordinate meaning.

    Args:
        - vectors (np.ndarray): (graphs, dim) matrix, rows in dataset order
        - labels (np.ndarray): graph classes, aligned with vectors
        - vocab (List[DegreeTuple]): degree-tuple vocabulary (reduced modes)
        - pad_len_h0, pad_len_h1 (int): dataset-wide lengths of the sorted blocks
        - config (PwlrConfig): the configuration that produced the vectors
    """

    vectors: np.ndarray
    labels: np.ndarray
    vocab: List[DegreeTuple]
    pad_len_h0: int
    pad_len_h1: int
    config: PwlrConfig
    ids: List[int] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def columns(self) -> List[str]:
        mode = self.config.mode
        cols: List[str] = []
        if mode.reduced:
            if mode.uses_h0:
                cols += [f"h0({a},{b})" for a, b in self.vocab]
            if mode.uses_h1:
                cols += [f"h1({a},{b})" for a, b in self.vocab]
        else:
            if mode.uses_h0:
                cols += [f"h0[{i}]" for i in range(self.pad_len_h0)]
            if mode.uses_h1:
                cols += [f"h1[{i}]" for i in range(self.pad_len_h1)]
        return cols


def propagate(m: TransitionMatrix, x: FeatureMatrix, k1: int, k2: Union[int, float]) -> FeatureMatrix:
    """(M^k1 X)^T M^k2, feature-major. k2 = inf takes the stationary limit."""
    y = m.wl_propagate(x, k1).transpose()
    return m.rw_limit(y) if k2 == math.inf else m.rw_propagate(y, int(k2))


def embed_graph(
    g: Graph, x: FeatureMatrix, cfg: PwlrConfig, vocab: Optional[Sequence[DegreeTuple]] = None
) -> GraphEmbedding:
    """
    Runs the whole scheme on one graph. Deterministic.

    Args:
        - g (Graph): the graph
        - x (FeatureMatrix): node-major initial features of g
        - cfg (PwlrConfig): iterations, norm, bias
        - vocab (Sequence[DegreeTuple]): coordinates of the reduced vectors. Defaults to the graph's own
            sorted degree tuples
    """
    if x.node_count != g.node_count:
        raise ValidationError(f"feature matrix has {x.node_count} nodes, graph has {g.node_count}")
    if vocab is None:
        vocab = sorted(set(g.degree_tuples()))

    m = TransitionMatrix.from_graph(g)
    feats = propagate(m, x, cfg.k1, cfg.k2)
    heights = edge_heights(g, feats, cfg.p)
    summary = persistence_run(g, heights)
    phi_h0, phi_h1 = phi_sorted(summary, cfg.tau)
    opt_h0, opt_h1 = phi_reduced(summary, cfg.tau, vocab)
    return GraphEmbedding(feats, heights, summary, phi_h0, phi_h1, opt_h0, opt_h1)


def build_degree_vocab(ds: GraphDataset) -> List[DegreeTuple]:
    """Sorted union of the degree tuples of every edge in the dataset."""
    tuples = set()
    for g in ds.graphs:
        tuples.update(g.degree_tuples())
    return sorted(tuples)


def padding_lengths(ds: GraphDataset) -> Tuple[int, int]:
    """Largest merge and cycle event counts in the dataset; they depend on structure only."""
    if not ds.graphs:
        return 0, 0
    return max(g.merge_count() for g in ds.graphs), max(g.cycle_count() for g in ds.graphs)


def _pad(vec: np.ndarray, length: int) -> np.ndarray:
    out = np.zeros(length)
    out[: len(vec)] = vec
    return out


def _assemble(
    embeddings: List[GraphEmbedding],
    ds: GraphDataset,
    cfg: PwlrConfig,
    vocab: List[DegreeTuple],
    pads: Tuple[int, int],
) -> DatasetEmbedding:
    pad_h0, pad_h1 = pads
    mode = cfg.mode
    rows = []
    for emb in embeddings:
        blocks = []
        if mode.reduced:
            if mode.uses_h0:
                blocks.append(emb.opt_h0)
            if mode.uses_h1:
                blocks.append(emb.opt_h1)
        else:
            if mode.uses_h0:
                blocks.append(_pad(emb.phi_h0, pad_h0))
            if mode.uses_h1:
                blocks.append(_pad(emb.phi_h1, pad_h1))
        rows.append(np.concatenate(blocks) if blocks else np.zeros(0))

    dim = (len(vocab) if mode.reduced else pad_h0) * mode.uses_h0 + (
        len(vocab) if mode.reduced else pad_h1
    ) * mode.uses_h1
    vectors = np.vstack(rows) if rows else np.zeros((0, dim))
    return DatasetEmbedding(vectors, ds.targets, vocab, pad_h0, pad_h1, cfg, list(range(len(ds))))


async def _embed_all(
    graphs: List[Graph], feats: List[FeatureMatrix], cfg: PwlrConfig, vocab: List[DegreeTuple], threads: int
) -> List[GraphEmbedding]:
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        tasks = [loop.run_in_executor(pool, embed_graph, g, x, cfg, vocab) for g, x in zip(graphs, feats)]
        # gather keeps input order whatever the scheduling
        return list(await asyncio.gather(*tasks))


def embed_graphs(ds: GraphDataset, cfg: PwlrConfig, vocab: List[DegreeTuple], threads: int = 1) -> List[GraphEmbedding]:
    feats = ds.encode_features(cfg.feature_mode)
    if threads <= 1:
        return [embed_graph(g, x, cfg, vocab) for g, x in zip(ds.graphs, feats)]
    return asyncio.run(_embed_all(ds.graphs, feats, cfg, vocab, threads))


def embed_dataset_modes(
    ds: GraphDataset, cfg: PwlrConfig, modes: Sequence[Mode], threads: int = 1
) -> Dict[Mode, DatasetEmbedding]:
    """
    Embeds every graph once and assembles the requested modes from the shared per-graph results.
    The vocabulary and padding lengths are fixed by the dataset's structure, so they are the same
    for every (k1, k2).
    """
    if cfg.md_preprocess:
        ds = ds.preprocess_md()
    vocab = build_degree_vocab(ds)
    pads = padding_lengths(ds)

    embeddings = embed_graphs(ds, cfg, vocab, threads)
    log.debug("embedded %d graphs of %s with k1=%s k2=%s", len(ds), ds.name, cfg.k1, cfg.k2)
    return {mode: _assemble(embeddings, ds, _with_mode(cfg, mode), vocab, pads) for mode in modes}


def embed_dataset(ds: GraphDataset, cfg: PwlrConfig, threads: int = 1) -> DatasetEmbedding:
    return embed_dataset_modes(ds, cfg, [cfg.mode], threads)[cfg.mode]


def _with_mode(cfg: PwlrConfig, mode: Mode) -> PwlrConfig:
    d = asdict(cfg)
    d["mode"] = mode
    return PwlrConfig(**d)


@dataclass
class StabilityReport:
    """
    Per trial: l1 distance between the H0 vectors of G and of the perturbed G', the induced 1-norm of
    M_G - M_G', and their ratio. `decay` lists mu2^k for k = 0..k2.
    """

    epsilon: float
    distances: np.ndarray
    matrix_distances: np.ndarray
    ratios: np.ndarray
    mu2: float
    decay: np.ndarray

    @property
    def median_distance(self) -> float:
        return float(np.median(self.distances)) if len(self.distances) else 0.0


def stability_probe(
    g: Graph,
    cfg: PwlrConfig,
    epsilon_scale: float,
    trials: int,
    seed: int,
    x: Optional[FeatureMatrix] = None,
) -> StabilityReport:
    """
    Perturbs the edge weights of g multiplicatively by factors drawn from [1 - eps, 1 + eps] and
    measures how far the H0 representation moves.

    Args:
        - g (Graph): a connected graph with positive weights
        - cfg (PwlrConfig): embedding parameters; the H0 vector is compared whatever the mode
        - epsilon_scale (float): eps
        - trials (int): number of perturbed copies
        - seed (int): seed of the perturbation draws
        - x (FeatureMatrix): initial features. Defaults to the graph's own encoding under cfg.feature_mode
    """
    if not g.is_connected():
        raise ValidationError("stability probe needs a connected graph")
    if epsilon_scale < 0:
        raise ValidationError(f"epsilon must be nonnegative, got {epsilon_scale}")
    if x is None:
        x = encode_graph(g, cfg.feature_mode)

    vocab = sorted(set(g.degree_tuples()))
    base = embed_graph(g, x, cfg, vocab)
    m = TransitionMatrix.from_graph(g)
    mu2 = m.second_eigenvalue()
    k_max = int(cfg.k2) if cfg.k2 != math.inf else PwlrConfig.MAX_ITERATIONS
    decay = mu2 ** np.arange(k_max + 1)

    rng = np.random.default_rng(seed)
    distances, matrix_distances = [], []
    for _ in range(trials):
        factors = rng.uniform(1.0 - epsilon_scale, 1.0 + epsilon_scale, g.edge_count)
        bad = factors <= 0
        while np.any(bad):
            # redraw only the factors that would make a weight nonpositive
            factors[bad] = rng.uniform(1.0 - epsilon_scale, 1.0 + epsilon_scale, int(bad.sum()))
            bad = factors <= 0
        perturbed = g.with_weights(g.weights * factors)

        other = embed_graph(perturbed, x, cfg, vocab)
        distances.append(float(np.abs(base.phi_h0 - other.phi_h0).sum()))
        diff = m.matrix - TransitionMatrix.from_graph(perturbed).matrix
        matrix_distances.append(float(spla.norm(diff, 1)))

    distances = np.array(distances)
    matrix_distances = np.array(matrix_distances)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(matrix_distances > 0, distances / matrix_distances, 0.0)
    log.debug("stability probe eps=%g: median distance %.3e", epsilon_scale, np.median(distances) if trials else 0)
    return StabilityReport(epsilon_scale, distances, matrix_distances, ratios, mu2, decay)


@dataclass
class StabilitySweep:
    """
    Median H0 distance per walk length under one fixed set of perturbations, alongside the decay term
    mu2^k2 + ||M_G - M_G'||_1 that bounds it up to a constant.
    """

    epsilon: float
    k2: np.ndarray
    distances: np.ndarray
    matrix_distance: float
    mu2: float

    @property
    def decay_terms(self) -> np.ndarray:
        return self.mu2 ** self.k2 + self.matrix_distance

    def fit_constant(self, k2: Sequence[int]) -> float:
        """Smallest C with distance <= C (mu2^k + ||M_G - M_G'||_1) over the given walk lengths."""
        mask = np.isin(self.k2, k2)
        if not np.any(mask):
            raise ValidationError(f"no sweep point among walk lengths {list(k2)}")
        return float(np.max(self.distances[mask] / self.decay_terms[mask]))


def stability_sweep(
    g: Graph,
    cfg: PwlrConfig,
    epsilon_scale: float,
    k2_values: Sequence[int],
    trials: int,
    seed: int,
    x: Optional[FeatureMatrix] = None,
) -> StabilitySweep:
    """
    Runs `stability_probe` once per walk length with the same seed, so every k2 sees the same perturbed
    copies of g and the matrix distance does not change along the sweep.
    """
    distances, matrix_distance, mu2 = [], 0.0, 0.0
    for k2 in k2_values:
        report = stability_probe(g, replace(cfg, k2=int(k2)), epsilon_scale, trials, seed, x)
        distances.append(report.median_distance)
        matrix_distance = float(np.median(report.matrix_distances)) if trials else 0.0
        mu2 = report.mu2
    return StabilitySweep(epsilon_scale, np.asarray(k2_values, dtype=int), np.array(distances), matrix_distance, mu2)
