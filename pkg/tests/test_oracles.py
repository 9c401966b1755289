import itertools
import math
import warnings

import numpy as np
import pytest

from misslasso import impute, synth
from misslasso.core import RegressionProblem, SparsityGraph
from misslasso.errors import SingularSystem, SupercriticalRegime
from misslasso.oracles import blanket_tree_simulator, dense_conditional_mean, exhaustive_blanket, prox_grad_lasso


def test_dense_conditional_mean_examples():
    assert dense_conditional_mean(np.eye(3), [1.0, 2.0, 3.0], [True, False, True], 1) == 0.0
    sigma = synth.ar1_covariance(3, 0.5)
    assert dense_conditional_mean(sigma, [1.0, 0.0, 2.0], [True, False, True], 1) == pytest.approx(1.2, abs=1e-12)
    assert dense_conditional_mean(sigma, [0.0, 0.0, 0.0], [False] * 3, 0) == 0.0
    with pytest.raises(SingularSystem):
        dense_conditional_mean(np.ones((3, 3)), [1.0, 1.0, 1.0], [True, False, True], 1)


def test_exhaustive_blanket_examples():
    chain = SparsityGraph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    assert exhaustive_blanket(chain, [True, False, False, True, False], 2) == {0, 3}
    tri = SparsityGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
    assert exhaustive_blanket(tri, [True, False, False], 2) == {0}
    lonely = SparsityGraph.from_edges(3, [(1, 2)])
    assert exhaustive_blanket(lonely, [False, True, True], 0) == set()


def test_blanket_bfs_matches_enumeration_random_graphs(rng):
    for _ in range(300):
        p = int(rng.integers(2, 11))
        A = np.triu(rng.random((p, p)) < rng.uniform(0.1, 0.6), 1)
        graph = SparsityGraph(A | A.T)
        mask = rng.random(p) < rng.uniform(0.1, 0.9)
        for k in np.flatnonzero(~mask):
            assert impute.markov_blanket(graph, mask, k).blanket == exhaustive_blanket(graph, mask, k)


def test_prox_grad_examples(rng):
    X = rng.standard_normal((20, 8))
    y = rng.standard_normal(20)
    huge = RegressionProblem(X, y, 1e6)
    assert not prox_grad_lasso(huge, 1).beta.any()
    ls = prox_grad_lasso(RegressionProblem(X, y, 0.0), 100_000)
    grad = X.T @ (X @ ls.beta - y) / 20
    assert np.max(np.abs(grad)) < 1e-6
    assert np.allclose(ls.beta, np.linalg.lstsq(X, y, rcond=None)[0], atol=1e-6)


def test_tree_simulator_full_observation():
    down = blanket_tree_simulator(3, 1.0, 1000, seed=1, variant="downward")
    root = blanket_tree_simulator(3, 1.0, 1000, seed=1, variant="root")
    assert np.all(down.sizes == 1) and np.all(root.sizes == 3)
    assert down.truncated == 0


def test_tree_simulator_first_moment():
    res = blanket_tree_simulator(3, 0.9, 100_000, seed=2)
    expect = 0.9 / (1 - 0.1 * 2)  # m = alpha + (1 - alpha)(d - 1) m
    assert abs(res.mean() - expect) < 3 * res.stderr()


def test_tree_simulator_supercritical_flag():
    with pytest.warns(SupercriticalRegime):
        res = blanket_tree_simulator(3, 0.4, 200, seed=3)
    assert res.supercritical
    assert res.truncated > 0


def test_tree_simulator_rejects_unknown_variant():
    with pytest.raises(ValueError):
        blanket_tree_simulator(3, 0.9, 10, seed=0, variant="sideways")


def test_blanket_third_moment_bound():
    # (1 - alpha)(d - 1)^3 < 1 is needed for k = 3
    for d, alpha in [(3, 0.9), (3, 0.95), (4, 0.97)]:
        assert (1 - alpha) * (d - 1) ** 3 < 1
        root = blanket_tree_simulator(d, alpha, 100_000, seed=d * 100 + int(alpha * 100), variant="root")
        # blanket of a vertex: 1 if it is open, else the sum over its d subtrees
        cubes = root.sizes.astype(float) ** 3
        m3 = alpha + (1 - alpha) * cubes.mean()
        se = (1 - alpha) * cubes.std(ddof=1) / math.sqrt(cubes.size)
        bound = alpha + (1 - alpha) * d**3 * alpha / (1 - (1 - alpha) * (d - 1) ** 3)
        assert m3 <= bound + 3 * se


def test_tree_survival_decays_exponentially():
    res = blanket_tree_simulator(3, 0.9, 100_000, seed=5)
    t, surv = res.survival()
    keep = surv * res.sizes.size >= 20  # drop the noisy far tail
    slope, intercept = np.polyfit(t[keep], np.log(surv[keep]), 1)
    fitted = slope * t[keep] + intercept
    resid = np.log(surv[keep]) - fitted
    r2 = 1 - resid.var() / np.log(surv[keep]).var()
    assert slope < 0 and r2 >= 0.9


def test_blanket_tail_on_random_sparse_graph():
    rng = np.random.default_rng(9)
    p, d, alpha = 600, 3, 0.9
    # random near-regular graph from a union of perfect matchings
    A = np.zeros((p, p), bool)
    for _ in range(d):
        perm = rng.permutation(p)
        A[perm[0::2], perm[1::2]] = True
    A = A | A.T
    np.fill_diagonal(A, False)
    graph = SparsityGraph(A)
    assert (1 - alpha) * (graph.d_max - 1) < 1
    sizes = []
    for _ in range(300):
        mask = rng.random(p) < alpha
        for k in np.flatnonzero(~mask):
            sizes.append(len(impute.markov_blanket(graph, mask, k).blanket))
    sizes = np.array(sizes)
    t = np.arange(1, sizes.max() + 1)
    surv = np.array([(sizes >= s).mean() for s in t])
    keep = surv * sizes.size >= 20
    slope, intercept = np.polyfit(t[keep], np.log(surv[keep]), 1)
    resid = np.log(surv[keep]) - (slope * t[keep] + intercept)
    assert slope < 0
    assert 1 - resid.var() / np.log(surv[keep]).var() >= 0.9
