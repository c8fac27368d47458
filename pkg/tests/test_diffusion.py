import math
import numpy as np
import pytest
from conftest import random_graph, unit_l1_labels
from diffusion import FeatureMatrix, Orientation, TransitionMatrix, normalized_wl_step
from errors import ConvergenceError, DegenerateLabelError, DisconnectedGraphError, ValidationError
from graph import Graph


def dense_mu2(m: TransitionMatrix) -> float:
    moduli = np.sort(np.abs(np.linalg.eigvals(m.dense())))[::-1]
    return float(moduli[1]) if len(moduli) > 1 else 0.0


def test_transition_matrix_worked_example(worked_graph):
    m = TransitionMatrix.from_graph(worked_graph)
    expected = [
        [1 / 7, 1 / 7, 2 / 7, 3 / 7],
        [1 / 2, 1 / 2, 0, 0],
        [1 / 2, 0, 1 / 4, 1 / 4],
        [3 / 5, 0, 1 / 5, 1 / 5],
    ]
    np.testing.assert_allclose(m.dense(), expected, atol=1e-15)


def test_transition_matrix_is_row_stochastic(rng):
    for _ in range(20):
        g = random_graph(rng, int(rng.integers(1, 10)), 5, connected=False)
        dense = TransitionMatrix.from_graph(g).dense()
        np.testing.assert_allclose(dense.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(np.diag(dense) > 0)


def test_isolated_node_has_identity_row():
    g = Graph.from_edges(3, [(0, 1)])
    np.testing.assert_array_equal(TransitionMatrix.from_graph(g).dense()[2], [0, 0, 1])


def test_zero_weight_needs_preprocessing():
    g = Graph.from_edges(2, [(0, 1, 0.0)])
    with pytest.raises(ValidationError, match="preprocess"):
        TransitionMatrix.from_graph(g)


def test_wl_one_step(worked_graph, worked_features):
    out = TransitionMatrix.from_graph(worked_graph).wl_propagate(worked_features, 1)
    expected = [[1 / 7, 1 / 7, 5 / 7], [1 / 2, 1 / 2, 0], [1 / 2, 0, 1 / 2], [3 / 5, 0, 2 / 5]]
    np.testing.assert_allclose(out.values, expected, atol=1e-15)


def test_wl_zero_steps_is_identity(worked_graph, worked_features):
    out = TransitionMatrix.from_graph(worked_graph).wl_propagate(worked_features, 0)
    np.testing.assert_array_equal(out.values, worked_features.values)


def test_rw_one_step(worked_graph, worked_features):
    y = worked_features.transpose()
    out = TransitionMatrix.from_graph(worked_graph).rw_propagate(y, 1)
    expected = [[1 / 7, 1 / 7, 2 / 7, 3 / 7], [1 / 2, 1 / 2, 0, 0], [11 / 10, 0, 9 / 20, 9 / 20]]
    assert out.orientation == Orientation.FEATURE_MAJOR
    np.testing.assert_allclose(out.values, expected, atol=1e-15)


def test_orientation_is_checked(worked_graph, worked_features):
    m = TransitionMatrix.from_graph(worked_graph)
    with pytest.raises(ValidationError):
        m.rw_propagate(worked_features, 1)
    with pytest.raises(ValidationError):
        m.wl_propagate(worked_features.transpose(), 1)
    with pytest.raises(ValidationError):
        m.wl_propagate(worked_features, -1)


def test_rw_propagation_approaches_limit(worked_graph, worked_features):
    m = TransitionMatrix.from_graph(worked_graph)
    y = worked_features.transpose()
    limit = m.rw_limit(y).values
    np.testing.assert_allclose(m.rw_propagate(y, 200).values, limit, atol=1e-8)
    # each row converges to its mass times pi
    pi = np.array([7, 2, 4, 5]) / 18
    np.testing.assert_allclose(limit, np.outer([1, 1, 2], pi), atol=1e-15)


def test_rw_limit_is_per_component(rng):
    g = Graph.from_edges(5, [(0, 1, 2.0), (2, 3, 1.0), (3, 4, 1.0)])
    y = FeatureMatrix(rng.uniform(size=(2, 5)), Orientation.FEATURE_MAJOR)
    limit = TransitionMatrix.from_graph(g).rw_limit(y).values

    np.testing.assert_allclose(limit[:, :2].sum(axis=1), y.values[:, :2].sum(axis=1))
    np.testing.assert_allclose(limit[:, 2:].sum(axis=1), y.values[:, 2:].sum(axis=1))
    np.testing.assert_allclose(limit[:, 0] / limit[:, 1], 1.0)
    np.testing.assert_allclose(limit[:, 3] / limit[:, 2], 1.5)


def test_stationary_distribution(worked_graph):
    pi = TransitionMatrix.from_graph(worked_graph).stationary_distribution()
    np.testing.assert_allclose(pi, np.array([7, 2, 4, 5]) / 18, atol=1e-15)


def test_stationary_distribution_needs_connected_graph():
    g = Graph.from_edges(3, [(0, 1)])
    with pytest.raises(DisconnectedGraphError):
        TransitionMatrix.from_graph(g).stationary_distribution()


def test_second_eigenvalue_worked_example(worked_graph):
    m = TransitionMatrix.from_graph(worked_graph)
    assert m.second_eigenvalue() == pytest.approx(dense_mu2(m), abs=1e-8)
    summary = m.spectral_summary()
    assert summary.mu2 == pytest.approx(dense_mu2(m), abs=1e-8)
    assert summary.stationary.sum() == pytest.approx(1.0)


def test_second_eigenvalue_matches_dense_oracle(rng):
    for _ in range(200):
        g = random_graph(rng, int(rng.integers(2, 13)), 6)
        m = TransitionMatrix.from_graph(g)
        assert m.second_eigenvalue() == pytest.approx(dense_mu2(m), abs=1e-8)


def test_second_eigenvalue_two_nodes():
    m = TransitionMatrix.from_graph(Graph.from_edges(2, [(0, 1)]))
    assert m.second_eigenvalue() == pytest.approx(0.0, abs=1e-12)


def test_second_eigenvalue_path():
    # eigenvalues 1, 1/2, -1/6
    m = TransitionMatrix.from_graph(Graph.from_edges(3, [(0, 1), (1, 2)]))
    assert m.second_eigenvalue() == pytest.approx(0.5, abs=1e-8)


def test_second_eigenvalue_with_close_third():
    # moduli 1, 0.688158, 0.688078
    g = Graph.from_edges(6, [(0, 1), (0, 4), (1, 4), (2, 3), (2, 4), (3, 5), (4, 5)])
    m = TransitionMatrix.from_graph(g)
    assert m.second_eigenvalue() == pytest.approx(dense_mu2(m), abs=1e-8)


def test_second_eigenvalue_on_larger_graphs(rng):
    for _ in range(10):
        m = TransitionMatrix.from_graph(random_graph(rng, int(rng.integers(20, 31)), 12))
        assert m.second_eigenvalue() == pytest.approx(dense_mu2(m), abs=1e-8)


def test_second_eigenvalue_reports_residual_at_cap(worked_graph):
    with pytest.raises(ConvergenceError) as err:
        TransitionMatrix.from_graph(worked_graph).second_eigenvalue(max_iter=1, tol=0.0)
    assert err.value.residual >= 0.0


def test_second_eigenvalue_single_node():
    assert TransitionMatrix.from_graph(Graph(1, np.zeros((0, 2)), np.zeros(0))).second_eigenvalue() == 0.0


def test_wl_propagation_equals_iterated_normalized_step(rng):
    for _ in range(200):
        g = random_graph(rng, int(rng.integers(1, 11)), 4)
        x = unit_l1_labels(rng, g.node_count)
        k1 = int(rng.integers(0, 4))
        fast = TransitionMatrix.from_graph(g).wl_propagate(FeatureMatrix(x), k1).values
        slow = x
        for _ in range(k1):
            slow = normalized_wl_step(g, slow)
        np.testing.assert_allclose(fast, slow, atol=1e-10)


def test_normalized_step_on_scalar_labels(worked_graph):
    out = normalized_wl_step(worked_graph, np.array([1.0, 1.0, 1.0, 1.0]))
    np.testing.assert_allclose(out, 1.0)


def test_normalized_step_errors(worked_graph):
    with pytest.raises(DegenerateLabelError):
        normalized_wl_step(worked_graph, np.zeros((4, 2)))
    with pytest.raises(ValidationError):
        normalized_wl_step(worked_graph, -np.ones((4, 2)))


def test_ergodicity_decay(rng):
    for _ in range(50):
        g = random_graph(rng, int(rng.integers(2, 11)), 4)
        m = TransitionMatrix.from_graph(g)
        mu2 = dense_mu2(m)
        y = FeatureMatrix(unit_l1_labels(rng, g.node_count).T, Orientation.FEATURE_MAJOR)
        l1, weighted = m.ergodicity_profile(y, 20)

        # every step contracts by mu2 in the stationary-weighted norm
        assert np.all(weighted[1:] <= (mu2 + 1e-9) * weighted[:-1] + 1e-12)

        # which bounds the l1 distance geometrically
        lazy = g.weighted_degrees() + 1.0
        constant = math.sqrt(y.shape[0]) * math.sqrt(lazy.max()) * weighted[0]
        ks = np.arange(len(l1))
        assert np.all(l1 <= constant * mu2 ** ks + 1e-9)


def test_wl_keeps_unit_l1_rows(rng):
    g = random_graph(rng, 9, 6)
    x = FeatureMatrix(unit_l1_labels(rng, 9))
    out = TransitionMatrix.from_graph(g).wl_propagate(x, 7)
    np.testing.assert_allclose(out.values.sum(axis=1), 1.0, atol=1e-12)


def test_rw_conserves_feature_mass(rng):
    g = random_graph(rng, 9, 6, connected=False)
    y = FeatureMatrix(rng.uniform(size=(3, 9)), Orientation.FEATURE_MAJOR)
    m = TransitionMatrix.from_graph(g)
    for k in (1, 5, 12):
        np.testing.assert_allclose(m.rw_propagate(y, k).values.sum(axis=1), y.values.sum(axis=1), atol=1e-12)


def test_stationary_distribution_is_fixed(rng):
    for _ in range(20):
        m = TransitionMatrix.from_graph(random_graph(rng, int(rng.integers(1, 12)), 5))
        pi = m.stationary_distribution()
        assert np.abs(m.matrix_t @ pi - pi).sum() < 1e-10
