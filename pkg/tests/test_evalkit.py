import os
import numpy as np
import pytest
from conftest import path, ring, tu_dataset
from dataset import GraphDataset
from errors import StratificationError, ValidationError
from evalkit import (
    CvReport,
    ForestConfig,
    Grid,
    component_importance,
    cross_validate,
    derive_seed,
    staged_accuracies,
    train_forest,
)
from pipeline import Mode, PwlrConfig, embed_dataset


@pytest.fixture
def rings_and_paths() -> GraphDataset:
    sizes = [3 + i % 6 for i in range(30)]
    return GraphDataset([ring(n) for n in sizes] + [path(n) for n in sizes], "RINGS")


def test_derive_seed_is_deterministic():
    assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2)
    assert derive_seed(7, 1, 2) != derive_seed(7, 2, 1)
    assert derive_seed(7, 1) != derive_seed(8, 1)


def test_forest_config_validation():
    with pytest.raises(ValidationError):
        ForestConfig(trees=0)


def test_train_forest_is_deterministic():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(40, 3))
    y = (x[:, 0] > 0).astype(int)
    a = train_forest(x, y, ForestConfig(trees=10, seed=4))
    b = train_forest(x, y, ForestConfig(trees=10, seed=4, threads=2))
    queries = rng.normal(size=(20, 3))
    np.testing.assert_array_equal(a.predict_proba(queries), b.predict_proba(queries))


def test_train_forest_rejects_bad_input():
    x = np.ones((4, 2))
    with pytest.raises(ValidationError, match="single class"):
        train_forest(x, np.zeros(4), ForestConfig(trees=3))
    x[0, 0] = np.nan
    with pytest.raises(ValidationError, match="missing"):
        train_forest(x, np.array([0, 1, 0, 1]), ForestConfig(trees=3))


def test_grid_points_are_lexicographic():
    grid = Grid((1, 0), (2,), (50, 10))
    assert list(grid.points()) == [(0, 2, 10), (0, 2, 50), (1, 2, 10), (1, 2, 50)]


def test_grid_from_config():
    grid = Grid.from_config()
    assert grid.k1 == tuple(range(30))
    assert grid.trees == (10, 25, 50, 100, 150, 200)


def test_report_statistics():
    report = CvReport([[1.0, 0.5]], [[]], ["h1"], Grid((0,), (0,), (10,)), seed=0)
    assert report.mean == pytest.approx(0.75)
    assert report.std == pytest.approx(0.25)
    assert report.to_dict()["grid"] == {"k1": [0], "k2": [0], "trees": [10]}


def test_cross_validate_separable(rings_and_paths):
    grid = Grid((0,), (0, 1), (10, 25))
    report = cross_validate(rings_and_paths, [Mode.H1, Mode.OPT_H1], grid, repeats=2, folds=3, inner_folds=2, seed=7)

    assert np.array(report.fold_accuracies).shape == (2, 3)
    assert report.mean == 1.0
    # every grid point scores 1.0, so the earliest one wins
    for rep in report.chosen:
        for choice in rep:
            assert (choice.mode, choice.k1, choice.k2, choice.trees) == ("h1", 0, 0, 10)
            assert choice.inner_accuracy == 1.0


def test_cross_validate_is_reproducible(rings_and_paths):
    grid = Grid((0, 1), (0,), (10,))
    a = cross_validate(rings_and_paths, [Mode.H0H1], grid, repeats=1, folds=3, inner_folds=2, seed=11)
    b = cross_validate(rings_and_paths, [Mode.H0H1], grid, repeats=1, folds=3, inner_folds=2, seed=11)
    assert a.fold_accuracies == b.fold_accuracies
    assert a.chosen == b.chosen


def test_cross_validate_fold_checks(rings_and_paths):
    grid = Grid((0,), (0,), (10,))
    with pytest.raises(ValidationError):
        cross_validate(rings_and_paths, [Mode.H1], grid, repeats=1, folds=1, inner_folds=2, seed=0)

    lopsided = GraphDataset([ring(4), ring(5)] + [path(n) for n in range(3, 13)], "LOPSIDED")
    with pytest.raises(StratificationError):
        cross_validate(lopsided, [Mode.H1], grid, repeats=1, folds=3, inner_folds=2, seed=0)


def test_component_importance(rings_and_paths):
    emb = embed_dataset(rings_and_paths, PwlrConfig(k1=0, k2=1, mode=Mode.H0H1))
    pairs = component_importance(emb, ForestConfig(trees=25, seed=1))
    names = [name for name, _ in pairs]
    values = [value for _, value in pairs]

    assert sorted(names) == sorted(emb.columns())
    assert values == sorted(values, reverse=True)
    assert sum(values) == pytest.approx(1.0)


@pytest.mark.slow
def test_mutag_reduced_grid_accuracy():
    ds = tu_dataset("MUTAG")
    grid = Grid(tuple(range(6)), tuple(range(6)), (10, 25, 50, 100, 150, 200))
    report = cross_validate(ds, [Mode.H1], grid, repeats=10, folds=10, inner_folds=5, seed=7,
                            threads=os.cpu_count() or 1)
    assert report.mean >= 0.83
    assert report.runtime < 900


def test_separable_clouds_are_learned():
    rng = np.random.default_rng(2)
    x = np.vstack([rng.normal(-5, 1, (20, 2)), rng.normal(5, 1, (20, 2))])
    y = np.repeat([0, 1], 20)
    model = train_forest(x, y, ForestConfig(trees=10, seed=0))
    assert (model.predict(x) == y).mean() == 1.0


def test_shuffled_labels_stay_near_chance():
    rng = np.random.default_rng(3)
    accuracies = []
    for seed in range(10):
        x = rng.normal(size=(80, 4))
        y = rng.permutation(np.repeat([0, 1], 40))
        model = train_forest(x[:60], y[:60], ForestConfig(trees=25, seed=seed))
        accuracies.append((model.predict(x[60:]) == y[60:]).mean())
    assert abs(np.mean(accuracies) - 0.5) <= 0.15


def test_duplicated_fixture_smoke():
    pair = [ring(3), path(3)]
    ds = GraphDataset(pair * 20, "DUP")
    grid = Grid((0, 1), (0, 1), (10,))
    a = cross_validate(ds, [Mode.OPT_H0H1], grid, repeats=1, folds=2, inner_folds=2, seed=5)
    b = cross_validate(ds, [Mode.OPT_H0H1], grid, repeats=1, folds=2, inner_folds=2, seed=5)
    assert a.fold_accuracies == b.fold_accuracies
    assert len(a.fold_accuracies[0]) == 2


def test_staged_accuracies_match_smaller_forests():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(60, 3))
    y = (x[:, 0] + 0.5 * rng.normal(size=60) > 0).astype(int)
    big = train_forest(x[:40], y[:40], ForestConfig(trees=30, seed=9))
    staged = staged_accuracies(big, x[40:], y[40:], [1, 5, 12, 30])
    for t, acc in zip([1, 5, 12, 30], staged):
        small = train_forest(x[:40], y[:40], ForestConfig(trees=t, seed=9))
        assert acc == (small.predict(x[40:]) == y[40:]).mean()
    with pytest.raises(ValidationError):
        staged_accuracies(big, x[40:], y[40:], [31])


def test_cross_validate_does_not_depend_on_threads(rings_and_paths):
    grid = Grid((0, 1), (0, 2), (10, 25))
    serial = cross_validate(rings_and_paths, [Mode.H0, Mode.H1], grid, repeats=2, folds=3, inner_folds=2, seed=4)
    pooled = cross_validate(rings_and_paths, [Mode.H0, Mode.H1], grid, repeats=2, folds=3, inner_folds=2, seed=4,
                            threads=3)
    assert serial.fold_accuracies == pooled.fold_accuracies
    assert serial.chosen == pooled.chosen
    assert serial.test_folds == pooled.test_folds


def test_outer_folds_keep_class_proportions():
    graphs = [ring(3 + i % 5) for i in range(23)] + [path(3 + i % 5) for i in range(14)]
    ds = GraphDataset(graphs, "UNEVEN")
    report = cross_validate(ds, [Mode.H1], Grid((0,), (0,), (10,)), repeats=3, folds=5, inner_folds=2, seed=8)
    labels = ds.targets
    classes, totals = np.unique(labels, return_counts=True)

    assert len(report.test_folds) == 3
    for folds in report.test_folds:
        assert sorted(i for fold in folds for i in fold) == list(range(len(ds)))
        for fold in folds:
            counts = np.array([np.sum(labels[fold] == c) for c in classes])
            assert np.all(np.abs(counts - totals / 5) <= 1)
