from __future__ import annotations
import time
import logging
import asyncio
import itertools
import numpy as np
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterator, List, Sequence, Tuple, Union
from sklearn.ensemble import RandomForestClassifier
from sklearn.metrics import accuracy_score
from sklearn.model_selection import StratifiedKFold
from dataset import GraphDataset
from errors import StratificationError, ValidationError
from pipeline import DatasetEmbedding, Mode, PwlrConfig, embed_dataset_modes
from utils.config import load_config

log = logging.getLogger(__name__)

_config = load_config()


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic child seed for (seed, repeat, fold, ...), independent of execution order."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


@dataclass(frozen=True)
class ForestConfig:
    """
    Args:
        - trees (int): number of trees T
        - max_features (str | int): features tried per split; "sqrt" is floor(sqrt(dim)), at least 1
        - min_leaf (int): minimum samples per leaf
        - bootstrap (bool): grow each tree on a bootstrap sample
        - seed (int): random state of the forest
        - threads (int): worker count for tree growth; does not change the result
    """

    trees: int = 100
    max_features: Union[str, int] = _config["forest"]["max-features"]
    min_leaf: int = _config["forest"]["min-leaf"]
    bootstrap: bool = _config["forest"]["bootstrap"]
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.trees < 1:
            raise ValidationError(f"a forest needs at least one tree, got {self.trees}")


def train_forest(features: np.ndarray, labels: np.ndarray, cfg: ForestConfig) -> RandomForestClassifier:
    """Bagged Gini trees over random feature subsets. Deterministic given cfg.seed."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    if len(np.unique(labels)) < 2:
        raise ValidationError("training labels hold a single class")
    if not np.all(np.isfinite(features)):
        raise ValidationError("training features contain missing or infinite values")

    model = RandomForestClassifier(
        n_estimators=cfg.trees,
        criterion="gini",
        max_features=cfg.max_features,
        min_samples_leaf=cfg.min_leaf,
        bootstrap=cfg.bootstrap,
        random_state=cfg.seed,
        n_jobs=cfg.threads,
    )
    return model.fit(features, labels)


@dataclass(frozen=True)
class Grid:
    k1: Tuple[int, ...]
    k2: Tuple[int, ...]
    trees: Tuple[int, ...]

    @classmethod
    def from_config(cls) -> Grid:
        first, last = _config["cross-validation"]["grid-k"]
        ks = tuple(range(first, last + 1))
        return cls(ks, ks, tuple(_config["forest"]["trees"]))

    def points(self) -> Iterator[Tuple[int, int, int]]:
        """All (k1, k2, T) in lexicographic order."""
        return itertools.product(sorted(self.k1), sorted(self.k2), sorted(self.trees))


@dataclass(frozen=True)
class FoldChoice:
    mode: str
    k1: int
    k2: int
    trees: int
    inner_accuracy: float


@dataclass
class CvReport:
    """
    Outcome of repeated stratified cross-validation. mean and std are computed from the stored
    accuracies over all repeats x folds; test_folds holds the held-out graph indices of every fold.
    """

    fold_accuracies: List[List[float]]
    chosen: List[List[FoldChoice]]
    modes: List[str]
    grid: Grid
    seed: int
    runtime: float = 0.0
    importances: List[Tuple[str, float]] = field(default_factory=list)
    test_folds: List[List[List[int]]] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_accuracies))

    def to_dict(self) -> Dict[str, object]:
        return {
            "modes": self.modes,
            "mean": self.mean,
            "std": self.std,
            "fold_accuracies": self.fold_accuracies,
            "chosen_hyperparams": [[asdict(c) for c in rep] for rep in self.chosen],
            "grid": {"k1": list(self.grid.k1), "k2": list(self.grid.k2), "trees": list(self.grid.trees)},
            "seed": self.seed,
            "runtime": self.runtime,
            "importances": [[name, value] for name, value in self.importances],
        }


class EmbeddingCache:
    """
    Every (mode, k1, k2) embedding of a dataset, computed once up front. The vectors do not depend
    on the split, so folds only index into them.
    """

    def __init__(self, ds: GraphDataset, modes: Sequence[Mode], grid: Grid, base: PwlrConfig, threads: int = 1):
        self.vectors: Dict[Tuple[Mode, int, int], np.ndarray] = {}
        for k1, k2 in itertools.product(sorted(grid.k1), sorted(grid.k2)):
            cfg = PwlrConfig(k1=k1, k2=k2, p=base.p, tau=base.tau, mode=base.mode,
                             feature_mode=base.feature_mode, md_preprocess=base.md_preprocess)
            for mode, emb in embed_dataset_modes(ds, cfg, modes, threads).items():
                self.vectors[(mode, k1, k2)] = emb.vectors
        log.info("cached %d embeddings of %s", len(self.vectors), ds.name)

    def __getitem__(self, key: Tuple[Mode, int, int]) -> np.ndarray:
        return self.vectors[key]


def _check_strata(labels: np.ndarray, folds: int, where: str) -> None:
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2:
        raise StratificationError(f"{where}: a single class present, cannot stratify")
    if counts.min() < folds:
        small = classes[np.argmin(counts)]
        raise StratificationError(
            f"{where}: class {small} has {counts.min()} samples, fewer than the {folds} folds; "
            "some fold would miss that class"
        )


def staged_accuracies(
    model: RandomForestClassifier, x: np.ndarray, y: np.ndarray, trees: Sequence[int]
) -> List[float]:
    """
    Accuracy of the forest made of the first T trees of `model`, for every T in `trees`. Trees are
    seeded in order from the forest's random state, so the first T trees of a larger forest are the
    forest that `train_forest` grows with T trees and the same seed.
    """
    if max(trees) > len(model.estimators_):
        raise ValidationError(f"model has {len(model.estimators_)} trees, fewer than {max(trees)}")
    votes = np.cumsum([tree.predict_proba(x) for tree in model.estimators_], axis=0)
    return [float(accuracy_score(y, model.classes_[np.argmax(votes[t - 1], axis=1)])) for t in trees]


def _select(
    cache: EmbeddingCache,
    labels: np.ndarray,
    train: np.ndarray,
    modes: Sequence[Mode],
    grid: Grid,
    inner_folds: int,
    seed: int,
) -> FoldChoice:
    """
    Grid point with the best inner-CV mean accuracy on the training fold; ties keep the earliest point.
    One forest of max(T) trees per (mode, k1, k2, inner fold) scores every T at once.
    """
    y = labels[train]
    _check_strata(y, inner_folds, "inner cross-validation")
    splits = list(StratifiedKFold(inner_folds, shuffle=True, random_state=seed).split(np.zeros(len(y)), y))
    trees = sorted(grid.trees)

    best = None
    for mode in modes:
        for k1, k2 in itertools.product(sorted(grid.k1), sorted(grid.k2)):
            x = cache[(mode, k1, k2)][train]
            accs = np.zeros(len(trees))
            for i, (fit, held) in enumerate(splits):
                model = train_forest(x[fit], y[fit], ForestConfig(trees=trees[-1], seed=derive_seed(seed, i)))
                accs += staged_accuracies(model, x[held], y[held], trees)
            for t, score in zip(trees, (accs / len(splits)).tolist()):
                if best is None or score > best.inner_accuracy:
                    best = FoldChoice(mode.value, k1, k2, t, score)
    return best


def _outer_fold(
    cache: EmbeddingCache,
    labels: np.ndarray,
    train: np.ndarray,
    test: np.ndarray,
    modes: Sequence[Mode],
    grid: Grid,
    inner_folds: int,
    fold_seed: int,
) -> Tuple[FoldChoice, float]:
    choice = _select(cache, labels, train, modes, grid, inner_folds, fold_seed)
    x = cache[(Mode(choice.mode), choice.k1, choice.k2)]
    model = train_forest(x[train], labels[train], ForestConfig(trees=choice.trees, seed=fold_seed))
    return choice, float(accuracy_score(labels[test], model.predict(x[test])))


async def _run_folds(jobs: List[Tuple], threads: int) -> List[Tuple[FoldChoice, float]]:
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        tasks = [loop.run_in_executor(pool, _outer_fold, *job) for job in jobs]
        return list(await asyncio.gather(*tasks))


def cross_validate(
    ds: GraphDataset,
    modes: Sequence[Mode],
    grid: Grid,
    repeats: int,
    folds: int,
    inner_folds: int,
    seed: int,
    base: PwlrConfig = PwlrConfig(),
    threads: int = 1,
) -> CvReport:
    """
    Repeated stratified k-fold evaluation with an inner grid search over (mode, k1, k2, T) on each
    training fold. The winner is refit on the whole training fold and scored on the held-out fold.

    Args:
        - ds (GraphDataset): dataset to classify
        - modes (Sequence[Mode]): representations searched, in tie-breaking order
        - grid (Grid): k1, k2 and tree-count values
        - repeats (int): number of independently shuffled outer splits
        - folds (int): outer folds, at least 2
        - inner_folds (int): folds of the inner grid search, at least 2
        - seed (int): root of every derived seed
        - base (PwlrConfig): p, tau, feature mode and preprocessing shared by all grid points
        - threads (int): worker count for embedding and for the outer folds, which run concurrently
    """
    if folds < 2 or inner_folds < 2:
        raise ValidationError(f"folds and inner folds must be >= 2, got {folds} and {inner_folds}")
    if repeats < 1:
        raise ValidationError(f"repeats must be >= 1, got {repeats}")

    start = time.perf_counter()
    labels = ds.targets
    _check_strata(labels, folds, "outer cross-validation")
    cache = EmbeddingCache(ds, modes, grid, base, threads)

    jobs, test_folds = [], []
    for r in range(repeats):
        outer = StratifiedKFold(folds, shuffle=True, random_state=derive_seed(seed, r))
        splits = list(outer.split(np.zeros(len(labels)), labels))
        test_folds.append([test.tolist() for _, test in splits])
        for f, (train, test) in enumerate(splits):
            jobs.append((cache, labels, train, test, modes, grid, inner_folds, derive_seed(seed, r, f)))

    # every fold carries its own seed, so the pool's scheduling cannot change the outcome
    if threads <= 1:
        results = [_outer_fold(*job) for job in jobs]
    else:
        results = asyncio.run(_run_folds(jobs, threads))

    accuracies: List[List[float]] = []
    chosen: List[List[FoldChoice]] = []
    for r in range(repeats):
        rep = results[r * folds:(r + 1) * folds]
        for f, (choice, acc) in enumerate(rep):
            log.debug("repeat %d fold %d: %s -> %.4f", r, f, choice, acc)
        accuracies.append([acc for _, acc in rep])
        chosen.append([choice for choice, _ in rep])
        log.info("repeat %d/%d: mean accuracy %.4f", r + 1, repeats, np.mean(accuracies[-1]))

    return CvReport(
        accuracies,
        chosen,
        [m.value for m in modes],
        grid,
        seed,
        runtime=time.perf_counter() - start,
        test_folds=test_folds,
    )


def component_importance(emb: DatasetEmbedding, cfg: ForestConfig) -> List[Tuple[str, float]]:
    """
    Impurity importance of every coordinate of an embedding, from a forest fit on the whole dataset,
    sorted by decreasing importance.
    """
    model = train_forest(emb.vectors, emb.labels, cfg)
    pairs = zip(emb.columns(), model.feature_importances_.tolist())
    return sorted(pairs, key=lambda kv: (-kv[1], kv[0]))
