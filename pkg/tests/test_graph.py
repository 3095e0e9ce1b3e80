import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

import sgl.graph as graph_mod
from sgl.core import TrainingSet
from sgl.features import SuperpixelFeatures
from sgl.graph import (GraphConfig, WeightedGraph, assign_labels, build_knn_graph, lgc_cost, lgc_iterate,
                       lgc_solve, lift_labels, normalized_affinity, pair_weight, project_to_pixels)
from sgl.superpixel import SuperpixelMap


def _features(rng, k, a=3, spread=0.3, extent=5.0):
    m = rng.normal(size=(k, a)) * spread
    return SuperpixelFeatures(m, m + 0.05 * rng.normal(size=(k, a)), rng.uniform(0, extent, size=(k, 2)))


def random_graph(rng, k, knn=None):
    cfg = GraphConfig(sigma_l=float(rng.uniform(1, 5)), k_nn=int(knn or rng.integers(1, min(k - 1, 10) + 1)),
                      kernel_beta=float(rng.uniform(0, 1)))
    return build_knn_graph(_features(rng, k), cfg)


def random_labels(rng, k, c=3, frac=0.3):
    Y = np.zeros((k, c))
    lab = rng.random(k) < frac
    lab[rng.integers(k)] = True
    Y[lab, rng.integers(0, c, lab.sum())] = 1.0
    return Y


# -- weights ------------------------------------------------------------------

def test_identical_features_weight_one():
    f = SuperpixelFeatures(np.ones((2, 3)), np.ones((2, 3)), np.zeros((2, 2)))
    assert pair_weight(0, 1, f, GraphConfig()) == 1.0
    with pytest.raises(ValueError):
        pair_weight(1, 1, f, GraphConfig())


def test_beta_one_uses_mean_only(rng):
    f = _features(rng, 2)
    cfg = GraphConfig(kernel_beta=1.0, sigma_s=0.2, sigma_l=1e9)
    dm = ((f.mean[0] - f.mean[1]) ** 2).sum()
    assert pair_weight(0, 1, f, cfg) == pytest.approx(math.exp(-dm / 0.04), rel=1e-12)


def test_pair_weight_scalar_oracle(rng):
    f = _features(rng, 2)
    b, ss, sl = 0.9, 0.2, 0.5
    dw = sum((f.weighted[0, i] - f.weighted[1, i]) ** 2 for i in range(3))
    dm = sum((f.mean[0, i] - f.mean[1, i]) ** 2 for i in range(3))
    dp = (f.centroid[0, 0] - f.centroid[1, 0]) ** 2 + (f.centroid[0, 1] - f.centroid[1, 1]) ** 2
    ref = math.exp(((b - 1) * dw - b * dm) / ss ** 2) * math.exp(-dp / sl ** 2)
    got = pair_weight(0, 1, f, GraphConfig(kernel_beta=b, sigma_s=ss, sigma_l=sl))
    assert got == pytest.approx(ref, rel=1e-12)


def test_three_nodes_complete(rng):
    g = build_knn_graph(_features(rng, 3), GraphConfig(k_nn=2, sigma_l=3.0))
    W = g.weights.toarray()
    assert ((W > 0) == ~np.eye(3, dtype=bool)).all()


def test_identical_nodes_unit_weights():
    f = SuperpixelFeatures(np.zeros((6, 2)), np.zeros((6, 2)), np.zeros((6, 2)))
    g = build_knn_graph(f, GraphConfig(k_nn=2))
    assert np.all(g.weights.data == 1.0)
    # ties go to the lowest index
    assert set(g.weights[5].indices.tolist()) >= {0, 1}


def test_knn_matches_brute_force(rng):
    k, knn = 40, 5
    f = _features(rng, k)
    cfg = GraphConfig(k_nn=knn, sigma_l=2.0)
    W = build_knn_graph(f, cfg).weights.toarray()
    w = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            if i != j:
                w[i, j] = pair_weight(i, j, f, cfg)
    keep = np.zeros((k, k), dtype=bool)
    for i in range(k):
        cand = sorted((j for j in range(k) if j != i), key=lambda j: (-w[i, j], j))[:knn]
        keep[i, cand] = True
    keep |= keep.T
    assert np.array_equal(W > 0, keep)
    assert np.allclose(W[keep], w[keep], rtol=1e-12)
    assert np.array_equal(W, W.T)


@given(st.integers(0, 2**31 - 1), st.integers(2, 60))
@settings(max_examples=30)
def test_graph_invariants(seed, k):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, k)
    W = g.weights.toarray()
    assert np.array_equal(W, W.T)
    assert W.min() >= 0 and W.max() <= 1
    assert np.all(np.diag(W) == 0)
    assert np.all((W > 0).sum(1) >= 1) or np.all(g.weights.getnnz(axis=1) >= 1)
    S = normalized_affinity(g).toarray()
    assert np.allclose(S, S.T)
    ev = np.linalg.eigvalsh(S)
    assert ev.min() >= -1 - 1e-10 and ev.max() <= 1 + 1e-10


# -- label lifting ------------------------------------------------------------

def _ts(coords_labels, shape):
    idx = np.array([y * shape[1] + x for (x, y), _ in coords_labels])
    lab = np.array([c for _, c in coords_labels])
    return TrainingSet(idx, lab, shape, 1, 0)


def test_lift_examples():
    a = np.array([[0, 0, 1, 1], [0, 0, 2, 2], [3, 3, 2, 2]])
    m = SuperpixelMap.from_assignment(a)
    ts = _ts([((0, 0), 3), ((1, 1), 3), ((2, 1), 1), ((3, 1), 2), ((2, 2), 2), ((3, 2), 2)], a.shape)
    Y = lift_labels(m, ts, 4)
    assert Y[0].tolist() == [0, 0, 1, 0]
    assert Y[1].tolist() == [0, 0, 0, 0]
    assert Y[2].tolist() == [0.25, 0.75, 0, 0]
    assert Y[3].tolist() == [0, 0, 0, 0]
    Yall = lift_labels(m, ts, 4, mode="all")
    assert Yall[2].tolist() == [0.25, 0.75, 0, 0]
    assert Yall[0].tolist() == [0, 0, 0.5, 0]


# -- propagation ----------------------------------------------------------------

def test_single_node():
    g = WeightedGraph(sp.csr_matrix((1, 1)))
    Y = np.array([[0.0, 1.0]])
    F = lgc_solve(g, Y, 0.15)
    assert np.allclose(F, 0.15 / 1.15 * Y)
    assert assign_labels(F).tolist() == [2]


def test_two_node_hand_solve():
    g = WeightedGraph(sp.csr_matrix(np.array([[0.0, 1.0], [1.0, 0.0]])))
    Y = np.array([[1.0, 0.0], [0.0, 0.0]])
    mu = 0.15
    b, a = mu / (1 + mu), 1 / (1 + mu)
    # (I - aS) F = bY with S = [[0,1],[1,0]]
    ref = b / (1 - a * a) * np.array([[1.0, 0.0], [a, 0.0]])
    F, info = lgc_solve(g, Y, mu, return_info=True)
    assert np.allclose(F, ref, atol=1e-15)
    assert assign_labels(F).tolist() == [1, 1]
    assert info["alpha"] == pytest.approx(a) and info["residual"] < 1e-14


@given(st.integers(0, 2**31 - 1), st.integers(2, 30))
@settings(max_examples=25)
def test_closed_form_matches_iteration(seed, k):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, k)
    Y = random_labels(rng, k)
    mu = float(rng.uniform(0.1, 1.0))
    F = lgc_solve(g, Y, mu)
    assert np.abs(F - lgc_iterate(g, Y, mu, tol=1e-13)).max() < 1e-8


def test_conjugate_gradient_path(rng, monkeypatch):
    g = random_graph(rng, 80)
    Y = random_labels(rng, 80)
    dense = lgc_solve(g, Y, 0.125)
    monkeypatch.setattr(graph_mod, "DENSE_LIMIT", 10)
    assert np.abs(lgc_solve(g, Y, 0.125) - dense).max() < 1e-8


def test_scaling_invariance(rng):
    g = random_graph(rng, 25)
    Y = random_labels(rng, 25)
    F = lgc_solve(g, Y, 0.1)
    F3 = lgc_solve(g, 3.0 * Y, 0.1)
    assert np.allclose(F3, 3.0 * F, rtol=1e-12, atol=1e-15)
    assert np.array_equal(assign_labels(F3), assign_labels(F))


def test_unlabeled_component_unclassified():
    W = np.zeros((4, 4))
    W[0, 1] = W[1, 0] = 1.0
    W[2, 3] = W[3, 2] = 0.5
    Y = np.zeros((4, 2))
    Y[0, 1] = 1
    F = lgc_solve(WeightedGraph(sp.csr_matrix(W)), Y, 0.125)
    assert np.all(F[2:] == 0)
    assert assign_labels(F).tolist() == [2, 2, 0, 0]


def test_isolated_node_keeps_scaled_label():
    W = np.zeros((3, 3))
    W[0, 1] = W[1, 0] = 1.0
    Y = np.array([[1.0, 0], [0, 0], [0, 1.0]])
    F = lgc_solve(WeightedGraph(sp.csr_matrix(W)), Y, 0.1)
    assert np.allclose(F[2], 0.1 / 1.1 * Y[2])


def test_solver_errors(rng):
    g = random_graph(rng, 5)
    with pytest.raises(ValueError):
        lgc_solve(g, np.zeros((5, 2)), 0.1)
    with pytest.raises(ValueError):
        lgc_solve(g, np.ones((4, 2)), 0.1)
    with pytest.raises(ValueError):
        GraphConfig(mu=0)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=20)
def test_closed_form_minimizes_cost(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(5, 40))
    g = random_graph(rng, k)
    Y = random_labels(rng, k)
    mu = float(rng.uniform(0.1, 0.15))
    F = lgc_solve(g, Y, mu)
    q0 = lgc_cost(F, g, Y, mu)
    for _ in range(20):
        i, j = rng.integers(k), rng.integers(Y.shape[1])
        for d in (1e-3, -1e-3):
            G = F.copy()
            G[i, j] += d
            assert lgc_cost(G, g, Y, mu) >= q0


def test_assign_labels_examples(rng):
    assert assign_labels(np.array([[0.1, 0.9]])).tolist() == [2]
    assert assign_labels(np.array([[0.3, 0.3, 0.3]])).tolist() == [1]
    assert assign_labels(np.zeros((1, 3))).tolist() == [0]
    F = rng.normal(size=(30, 4))
    ref = [1 + max(range(4), key=lambda j: (row[j], -j)) for row in F]
    assert assign_labels(F).tolist() == ref


def test_project_to_pixels(rng):
    m = SuperpixelMap.from_assignment(np.zeros((3, 4), int))
    assert (project_to_pixels(m, np.array([5])) == 5).all()
    a = rng.integers(0, 5, size=(6, 6))
    a[0, :5] = np.arange(5)
    m = SuperpixelMap.from_assignment(a)
    lab = rng.integers(1, 4, size=5)
    out = project_to_pixels(m, lab)
    assert all(out[y, x] == lab[a[y, x]] for y in range(6) for x in range(6))
    perm = rng.permutation(5)
    inv = np.argsort(perm)
    pm = SuperpixelMap.from_assignment(perm[a])
    assert np.array_equal(project_to_pixels(pm, lab[inv]), out)
    with pytest.raises(ValueError):
        project_to_pixels(m, lab[:3])
