import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chowliu.dist import empirical_distribution
from chowliu.errors import EmptySampleError, OutOfRangeSymbolError
from chowliu.learning import learn, log_likelihood, pairwise_types, structure_from_mi, true_mi_table
from chowliu.simulate import SimConfig, estimate_error_probability, example2_random_tree, star4, table1_distribution
from chowliu.trees import enumerate_spanning_trees, to_dense


def _loglik_oracle(structure, samples):
    """Log-likelihood of the tree with empirical parameters, by explicit counting."""
    total = 0.0
    for row in samples:
        lp = 0.0
        for i in range(samples.shape[1]):
            lp += math.log(np.mean(samples[:, i] == row[i]))
        for a, b in structure.edges:
            pab = np.mean((samples[:, a] == row[a]) & (samples[:, b] == row[b]))
            pa = np.mean(samples[:, a] == row[a])
            pb = np.mean(samples[:, b] == row[b])
            lp += math.log(pab / (pa * pb))
        total += lp
    return total


def test_two_node_dataset():
    x = np.array([[0, 0], [0, 0], [1, 1], [0, 1]])
    res = learn(x)
    assert res.structure.sorted() == [(0, 1)]
    assert np.allclose(res.model.edge_marginals[(0, 1)], [[0.5, 0.25], [0.0, 0.25]])


def test_parameters_are_empirical_pair_tables():
    x = np.random.default_rng(0).integers(0, 3, size=(40, 4))
    res = learn(x, 3)
    _, pairs, _ = pairwise_types(x, 3)
    for e in res.structure:
        assert np.array_equal(res.model.edge_marginals[e], pairs[e])


@pytest.mark.parametrize("d", [3, 4])
@pytest.mark.parametrize("n", [2, 4, 6])
def test_ml_optimality_brute_force(d, n):
    rng = np.random.default_rng(100 * d + n)
    for _ in range(5):
        x = rng.integers(0, 2, size=(n, d))
        res = learn(x, 2)
        best = log_likelihood(res.model, x)
        assert best == pytest.approx(_loglik_oracle(res.structure, x), abs=1e-10)
        for t in enumerate_spanning_trees(d):
            assert best >= _loglik_oracle(t, x) - 1e-10


def test_true_mi_recovers_structure_for_every_d4_tree():
    for i, t in enumerate(enumerate_spanning_trees(4)):
        model = example2_random_tree(t, 1000 + i)
        structure, _ = structure_from_mi(4, true_mi_table(to_dense(model)))
        assert structure == t


def test_table1_structure_step_reports_tie():
    structure, ties = structure_from_mi(3, true_mi_table(table1_distribution(0.1, 0.01)))
    assert (0, 1) in structure
    assert ((0, 2), (1, 2)) in ties


def test_relearning_from_atoms_is_idempotent():
    x = np.random.default_rng(3).integers(0, 2, size=(12, 4))
    first = learn(x, 2)
    # rebuild the sample set from the empirical distribution's atoms
    counts = empirical_distribution(x, 2).counts
    atoms = [np.array(idx) for idx in itertools.product(range(2), repeat=4) for _ in range(counts[idx])]
    second = learn(np.array(atoms), 2)
    assert second.structure == first.structure
    for e in first.structure:
        assert np.array_equal(second.model.edge_marginals[e], first.model.edge_marginals[e])


def test_learn_errors():
    with pytest.raises(OutOfRangeSymbolError):
        learn(np.array([[0, 3]]), 2)
    with pytest.raises(OutOfRangeSymbolError):
        learn(np.array([[0.5, 1.0]]))
    with pytest.raises(EmptySampleError):
        learn(np.zeros((0, 3), dtype=int))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 8))
def test_learn_is_deterministic(seed, n):
    x = np.random.default_rng(seed).integers(0, 2, size=(n, 4))
    a, b = learn(x, 2), learn(x.copy(), 2)
    assert a.structure == b.structure and a.ties == b.ties


def test_consistency_at_large_n():
    res = estimate_error_probability(star4(0.2), SimConfig(10_000, 1_000, seed=4))
    assert res.errors / res.runs <= 0.001


def test_learned_model_handles_product_edges():
    # constant columns give product pair tables; the learned model still forms
    x = np.zeros((5, 3), dtype=int)
    res = learn(x, 2)
    assert res.structure.is_spanning_tree()
    assert log_likelihood(res.model, x) == pytest.approx(0.0)
