import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chowliu.crossover import approx_rate
from chowliu.dist import PairJoint, marginalize, mutual_information
from chowliu.errors import ValidationError
from chowliu.experiments import DISJOINT_PAIR, PATH_PAIR, star4_pair
from chowliu.exponent import error_exponent, finite_sample_bound, optimal_projections
from chowliu.learning import learn
from chowliu.simulate import (
    SimConfig,
    SimResult,
    estimate_error_probability,
    estimate_generalized_error_probability,
    example2_random_tree,
    star4,
    symmetric_star,
    table1_distribution,
)
from chowliu.simulate import _DenseSampler
from chowliu.trees import ancestral_fill, enumerate_spanning_trees, mix_seed, sample, to_dense

TREES4 = list(enumerate_spanning_trees(4))


def _mi(dense, a, b):
    return mutual_information(marginalize(dense, [a, b]))


# -- constructors --------------------------------------------------------------


@pytest.mark.parametrize("gamma", [0.0, 0.5, -0.1])
def test_star4_gamma_range(gamma):
    with pytest.raises(ValidationError):
        star4(gamma)


def test_star4_mi_ordering():
    dense = to_dense(star4(0.2))
    assert dense.strictly_positive
    assert dense.probs.sum() == pytest.approx(1.0, abs=1e-15)
    edges = [_mi(dense, 0, i) for i in (1, 2, 3)]
    assert max(edges) - min(edges) <= 1e-15
    assert edges[0] > _mi(dense, 1, 2) > 0


def test_star4_small_gamma_is_near_independent():
    assert _mi(to_dense(star4(1e-4)), 0, 1) < 1e-7


def test_symmetric_star_reproduces_star4():
    model = symmetric_star(4, star4_pair(0.2, PATH_PAIR))
    assert np.allclose(to_dense(model).probs, to_dense(star4(0.2)).probs, atol=1e-15)


def test_symmetric_star_d9_rates_all_equal():
    model = symmetric_star(9, star4_pair(0.2, PATH_PAIR))
    rep = error_exponent(model, "approx")
    rates = np.array(list(rep.pair_rates.values()))
    assert len(rates) == 56
    assert np.ptp(rates) <= 1e-12


def test_symmetric_star_rejects_inconsistent_pair():
    pj = star4_pair(0.2, PATH_PAIR)
    probs = pj.probs.copy()
    probs[0, 0, 0] += 0.01
    probs[1, 0, 0] -= 0.01
    with pytest.raises(ValidationError):
        symmetric_star(4, PairJoint(pj.vars, probs, pj.edge, pj.nonedge))


def test_symmetric_star_needs_a_nonedge():
    with pytest.raises(ValidationError):
        symmetric_star(2, star4_pair(0.2, PATH_PAIR))


def test_example2_draws_positive_and_reproducible():
    for seed in range(100):
        m = example2_random_tree(TREES4[seed % 16], seed)
        assert to_dense(m).strictly_positive
    a = to_dense(example2_random_tree(TREES4[3], 7)).probs
    b = to_dense(example2_random_tree(TREES4[3], 7)).probs
    assert np.array_equal(a, b)


@pytest.mark.parametrize("xi,kappa", [(0.0, 0.1), (1 / 3, 0.1), (0.1, 0.0), (0.1, 0.5)])
def test_table1_range(xi, kappa):
    with pytest.raises(ValidationError):
        table1_distribution(xi, kappa)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 0.32), st.floats(0.01, 0.49))
def test_table1_sums_to_one_and_mi_tie(xi, kappa):
    j = table1_distribution(xi, kappa)
    assert j.probs.sum() == pytest.approx(1.0, abs=1e-14)
    assert abs(_mi(j, 1, 2) - _mi(j, 0, 2)) <= 1e-12


# -- configuration and results -------------------------------------------------


def test_sim_config_validation():
    with pytest.raises(ValidationError):
        SimConfig(0)
    with pytest.raises(ValidationError):
        SimConfig(10, runs=0)
    with pytest.warns(RuntimeWarning):
        SimConfig(10, runs=10**7 + 1)


def test_sim_result_properties():
    r = SimResult(100, 1000, 10, {1: 9, 2: 1})
    assert r.p_hat == 0.01
    assert r.simulated_rate == pytest.approx(-math.log(0.01) / 100)
    assert r.std_error == pytest.approx(math.sqrt(0.01 * 0.99 / 1000))
    assert r.modal_displacement == 1
    empty = SimResult(100, 1000, 0)
    assert empty.simulated_rate == math.inf and empty.insufficient_runs
    assert empty.modal_displacement is None


# -- Monte Carlo ---------------------------------------------------------------


def test_large_n_has_no_errors():
    res = estimate_error_probability(star4(0.2), SimConfig(100_000, runs=20, seed=1))
    assert res.errors == 0 and res.p_hat == 0.0
    assert res.insufficient_runs and res.simulated_rate == math.inf


def test_deterministic_given_seed():
    cfg = SimConfig(20, runs=500, seed=3)
    a = estimate_error_probability(star4(0.2), cfg)
    assert a == estimate_error_probability(star4(0.2), cfg)
    assert a != estimate_error_probability(star4(0.2), SimConfig(20, runs=500, seed=4))


def test_single_sample_runs_are_deterministic():
    cfg = SimConfig(1, runs=200, seed=2)
    model = example2_random_tree(TREES4[5], 2)
    a = estimate_error_probability(model, cfg)
    assert a == estimate_error_probability(model, cfg)
    assert 0 <= a.p_hat <= 1


def test_worker_independence():
    model = star4(0.1)
    one = estimate_error_probability(model, SimConfig(40, runs=9000, seed=5, workers=1))
    four = estimate_error_probability(model, SimConfig(40, runs=9000, seed=5, workers=4))
    assert one == four


def test_run_matches_direct_chow_liu():
    """Each Monte Carlo run agrees with learning from the same samples directly."""
    model = star4(0.05)
    runs = 60
    res = estimate_error_probability(model, SimConfig(30, runs=runs, seed=9))
    errors = 0
    for r in range(runs):
        rng = np.random.Generator(np.random.PCG64(mix_seed(9, r)))
        x = ancestral_fill(model, rng.random((1, 30, 4)))[0]
        errors += learn(x, 2).structure != model.structure
    assert res.errors == errors


def test_errors_are_mostly_single_swaps():
    res = estimate_error_probability(star4(0.2), SimConfig(100, runs=20_000, seed=0))
    assert res.errors > 0
    assert min(res.displaced) >= 1
    assert res.modal_displacement == 1
    assert sum(res.error_structures.values()) == res.errors


def test_bound_compliance():
    model = star4(0.2)
    k = error_exponent(model, "approx").k_p
    for n in (20, 60):
        res = estimate_error_probability(model, SimConfig(n, runs=5_000, seed=n))
        assert res.p_hat <= math.exp(finite_sample_bound(k, 4, 2, n)) + 3 * res.std_error


# -- generalized error probability ---------------------------------------------


def test_generalized_on_tree_matches_tree_estimator():
    model = example2_random_tree(TREES4[9], 4)
    cfg = SimConfig(25, runs=3000, seed=6)
    a = estimate_error_probability(model, cfg)
    b = estimate_generalized_error_probability(to_dense(model), cfg)
    assert a.errors == b.errors


def test_table1_either_projection_is_success():
    dense = table1_distribution(0.1, 0.01)
    proj = optimal_projections(dense)
    x = sample(proj.models[0], 50, seed=0)
    learned = learn(x, 2).structure
    assert learned in proj
    res = estimate_generalized_error_probability(dense, SimConfig(50, runs=3000, seed=1), proj)
    # the learned tree always contains the strong edge (0, 1), so one of the optimal
    # structures is always chosen and there are no errors at all
    assert res.errors == 0


def test_generalized_p_hat_decreases_in_n():
    dense = table1_distribution(0.1, 0.3)
    proj = optimal_projections(dense)
    rates = [estimate_generalized_error_probability(dense, SimConfig(n, runs=4000, seed=2), proj).p_hat
             for n in (20, 80, 320)]
    assert rates[0] > rates[1] > rates[2]


def test_dense_sampler_law_of_large_numbers():
    dense = table1_distribution(0.1, 0.2)
    res = estimate_generalized_error_probability(dense, SimConfig(1, runs=1))
    assert res.runs == 1  # smoke: sampler path runs on a non-tree
    u = np.random.default_rng(0).random((1, 200_000, 3))
    x = _DenseSampler(dense).fill(u)[0]
    emp = np.bincount(x[:, 0] * 4 + x[:, 1] * 2 + x[:, 2], minlength=8) / len(x)
    assert np.max(np.abs(emp - dense.flat())) < 0.005


def test_disjoint_swap_is_not_an_error_tree():
    """The disjoint pair has the smaller rate, but swapping it breaks the tree."""
    model = star4(0.2)
    assert approx_rate(star4_pair(0.2, DISJOINT_PAIR)) < approx_rate(star4_pair(0.2, PATH_PAIR))
    assert not model.structure.swap((0, 1), (2, 3)).is_spanning_tree()
    assert error_exponent(model, "approx").k_p == approx_rate(star4_pair(0.2, PATH_PAIR))
