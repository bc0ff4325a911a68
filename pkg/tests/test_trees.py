import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chowliu.dist import DenseJoint
from chowliu.errors import (
    CyclicInputError,
    DisconnectedInputError,
    OutOfRangeSymbolError,
    TooLargeError,
    ValidationError,
)
from chowliu.learning import true_mi_table
from chowliu.simulate import example2_random_tree, star4, table1_distribution
from chowliu.trees import (
    EdgeSet,
    TreeModel,
    all_pairs,
    diameter,
    enumerate_spanning_trees,
    evaluate,
    is_proper_forest,
    mix_seed,
    mwst,
    path_between,
    sample,
    to_dense,
)


def _brute_trees(d):
    """Spanning trees as (d-1)-subsets of pairs that connect every node."""
    out = []
    for subset in itertools.combinations(all_pairs(d), d - 1):
        parent = list(range(d))

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x

        ok = True
        for a, b in subset:
            ra, rb = find(a), find(b)
            if ra == rb:
                ok = False
                break
            parent[ra] = rb
        if ok:
            out.append(frozenset(subset))
    return out


def _hops(tree):
    d = tree.d
    dist = np.full((d, d), np.inf)
    np.fill_diagonal(dist, 0)
    for a, b in tree.edges:
        dist[a, b] = dist[b, a] = 1
    for k in range(d):
        dist = np.minimum(dist, dist[:, [k]] + dist[[k], :])
    return dist


def chain(d):
    return EdgeSet.of(d, [(i, i + 1) for i in range(d - 1)])


def star(d):
    return EdgeSet.of(d, [(0, i) for i in range(1, d)])


BINARY7 = EdgeSet.of(7, [(0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6)])


# -- EdgeSet -------------------------------------------------------------------


def test_edges_are_normalized():
    e = EdgeSet.of(3, [(2, 0), (1, 2)])
    assert e.sorted() == [(0, 2), (1, 2)]
    assert (2, 0) in e


def test_self_loop_rejected():
    with pytest.raises(ValidationError):
        EdgeSet.of(3, [(1, 1)])


def test_spanning_checks():
    assert chain(4).is_spanning_tree()
    assert not EdgeSet.of(4, [(0, 1), (1, 2), (0, 2)]).is_spanning_tree()


# -- enumeration ---------------------------------------------------------------


@pytest.mark.parametrize("d,count", [(2, 1), (3, 3), (4, 16), (5, 125), (6, 1296)])
def test_cayley_count(d, count):
    trees = list(enumerate_spanning_trees(d))
    assert len(trees) == count == d ** (d - 2)
    assert len({t.edges for t in trees}) == count
    assert all(t.is_spanning_tree() for t in trees)


@pytest.mark.parametrize("d", [3, 4, 5])
def test_enumeration_matches_subset_oracle(d):
    assert {t.edges for t in enumerate_spanning_trees(d)} == set(_brute_trees(d))


def test_enumeration_budget():
    with pytest.raises(TooLargeError):
        next(enumerate_spanning_trees(9))


# -- MWST ----------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 6), st.integers(0, 2**32 - 1))
def test_mwst_matches_enumeration(d, seed):
    rng = np.random.default_rng(seed)
    w = dict(zip(all_pairs(d), rng.random(d * (d - 1) // 2)))
    tree, _ = mwst(d, w)
    best = max(_brute_trees(d), key=lambda t: sum(w[e] for e in t))
    assert tree.edges == best


def test_mwst_all_equal_weights_lexicographic():
    tree, ties = mwst(3, {(0, 1): 1.0, (0, 2): 1.0, (1, 2): 1.0})
    assert tree.sorted() == [(0, 1), (0, 2)]
    assert ties == [((0, 1), (0, 2), (1, 2))]


def test_mwst_table1_first_edge_and_tie():
    mi = true_mi_table(table1_distribution(0.1, 0.01))
    tree, ties = mwst(3, mi)
    assert max(mi, key=mi.get) == (0, 1)
    assert (0, 1) in tree
    assert ((0, 2), (1, 2)) in ties


def test_mwst_recovers_true_tree():
    for seed in range(10):
        model = example2_random_tree(chain(5), seed)
        tree, _ = mwst(5, true_mi_table(to_dense(model)))
        assert tree == model.structure


# -- paths and diameter --------------------------------------------------------


def test_path_in_star():
    assert set(path_between(star(4), (1, 2))) == {(0, 1), (0, 2)}


def test_path_in_chain_is_ordered():
    assert path_between(chain(4), (0, 3)) == [(0, 1), (1, 2), (2, 3)]


def test_path_of_edge_is_itself():
    assert path_between(chain(4), (1, 2)) == [(1, 2)]


def test_path_length_four():
    # a path u - a - b - c - v with a pendant leaf
    tree = EdgeSet.of(6, [(0, 1), (1, 2), (2, 3), (3, 4), (2, 5)])
    assert len(path_between(tree, (0, 4))) == 4


def test_path_disconnected():
    with pytest.raises(DisconnectedInputError):
        path_between(EdgeSet.of(4, [(0, 1), (2, 3)]), (0, 3))


@pytest.mark.parametrize("tree,expected", [
    (star(4), 2), (star(9), 2), (chain(4), 3), (chain(7), 6), (BINARY7, 4),
])
def test_diameter(tree, expected):
    assert diameter(tree) == expected == _hops(tree).max()


@pytest.mark.parametrize("d", [4, 5])
def test_path_swap_invariants(d):
    for tree in enumerate_spanning_trees(d):
        hops = _hops(tree)
        longest = 0
        for f in tree.nonedges():
            path = path_between(tree, f)
            assert len(path) == hops[f]
            longest = max(longest, len(path))
            cycle = EdgeSet.of(d, list(path) + [f])
            assert not cycle.is_acyclic()
            for e in path:
                assert tree.swap(e, f).is_spanning_tree()
        assert longest == diameter(tree)


# -- forests -------------------------------------------------------------------


def test_proper_forest():
    assert not is_proper_forest(chain(4))
    assert is_proper_forest(EdgeSet.of(4, [(0, 1), (2, 3)]))
    assert is_proper_forest(EdgeSet.of(4, []))
    with pytest.raises(CyclicInputError):
        is_proper_forest(EdgeSet.of(3, [(0, 1), (1, 2), (0, 2)]))


# -- tree models ---------------------------------------------------------------


def test_single_edge_evaluate_is_pair_table():
    t = np.array([[0.4, 0.1], [0.2, 0.3]])
    m = TreeModel(EdgeSet.of(2, [(0, 1)]), 2, np.stack([t.sum(1), t.sum(0)]), {(0, 1): t})
    for a, b in itertools.product(range(2), repeat=2):
        assert evaluate(m, (a, b)) == pytest.approx(t[a, b])


def test_product_edge_rejected():
    p = np.array([0.3, 0.7])
    with pytest.raises(ValidationError):
        TreeModel(EdgeSet.of(2, [(0, 1)]), 2, np.stack([p, p]), {(0, 1): np.outer(p, p)})


def test_inconsistent_marginals_rejected():
    t = np.array([[0.4, 0.1], [0.2, 0.3]])
    with pytest.raises(ValidationError):
        TreeModel(EdgeSet.of(2, [(0, 1)]), 2, np.array([[0.6, 0.4], [0.5, 0.5]]), {(0, 1): t})


def test_star4_dense_by_multiplication():
    g = 0.2
    m = star4(g)
    c = np.array([[0.5 + g, 0.5 - g], [0.5 - g, 0.5 + g]])
    p0 = np.array([1 / 3, 2 / 3])
    explicit = np.einsum("a,ab,ac,ad->abcd", p0, c, c, c)
    dense = to_dense(m)
    assert dense.probs.sum() == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(dense.probs, explicit, atol=1e-15)
    for x in itertools.product(range(2), repeat=4):
        assert evaluate(m, x) == pytest.approx(explicit[x], abs=1e-15)


def test_evaluate_out_of_range():
    with pytest.raises(OutOfRangeSymbolError):
        evaluate(star4(0.2), (0, 0, 0, 2))


def test_roundtrip_from_dense():
    m = example2_random_tree(BINARY7, 3)
    back = TreeModel.from_dense(to_dense(m), m.structure)
    assert np.allclose(to_dense(back).probs, to_dense(m).probs, atol=1e-14)
    tree, _ = mwst(7, true_mi_table(to_dense(m)))
    assert tree == m.structure


def test_two_node_dense():
    t = np.array([[0.4, 0.1], [0.2, 0.3]])
    m = TreeModel.from_dense(DenseJoint.from_array(t), EdgeSet.of(2, [(0, 1)]))
    assert np.allclose(to_dense(m).probs, t)


# -- sampling ------------------------------------------------------------------


def test_sample_law_of_large_numbers():
    m = star4(0.2)
    x = sample(m, 100_000, seed=5)
    emp = np.bincount(np.ravel_multi_index(tuple(x.T.astype(int)), (2,) * 4), minlength=16) / len(x)
    assert np.max(np.abs(emp - to_dense(m).flat())) <= 0.01


def test_sample_deterministic():
    m = star4(0.1)
    assert np.array_equal(sample(m, 50, seed=9), sample(m, 50, seed=9))
    assert not np.array_equal(sample(m, 50, seed=9), sample(m, 50, seed=10))


def test_sample_degenerate_marginals_are_constant():
    t = np.array([[0.0, 0.0], [0.0, 1.0]])
    # product of point masses is allowed only as an empirical (product) model
    m = TreeModel(EdgeSet.of(2, [(0, 1)]), 2, np.array([[0, 1.0], [0, 1.0]]), {(0, 1): t},
                  allow_product=True)
    assert np.all(sample(m, 20, seed=1) == 1)


def test_mix_seed_spreads_indices():
    seeds = {mix_seed(0, r) for r in range(1000)}
    assert len(seeds) == 1000
    assert mix_seed(1, 0) != mix_seed(0, 1)
