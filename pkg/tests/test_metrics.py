import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgl.core import GroundTruth, TrainingSet
from sgl.errors import DataError
from sgl.metrics import compute_metrics, confusion_matrix, metrics_from_confusion


def brute_force(pred, truth, c):
    """Reference arithmetic straight from the definitions."""
    pairs = [(t, p) for t, p in zip(truth, pred)]
    n = len(pairs)
    M = [[sum(1 for t, p in pairs if t == i and p == j) for j in range(1, c + 1)] for i in range(1, c + 1)]
    oa = sum(M[i][i] for i in range(c)) / n
    accs = [M[i][i] / sum(M[i]) for i in range(c) if sum(M[i]) > 0]
    aa = sum(accs) / len(accs)
    rows = [sum(M[i]) for i in range(c)]
    cols = [sum(M[i][j] for i in range(c)) for j in range(c)]
    pe = sum(rows[i] * cols[i] for i in range(c)) / (n * n)
    kappa = (oa - pe) / (1 - pe) if pe != 1 else (1.0 if oa == 1 else 0.0)
    return M, oa, aa, kappa


def test_worked_kappa_example():
    r = metrics_from_confusion(np.array([[40, 10], [5, 45]]))
    assert r.oa == 0.85
    assert r.kappa == pytest.approx(0.70, abs=1e-15)
    assert r.aa == pytest.approx(0.85, abs=1e-15)


def test_perfect_and_constant():
    t = np.array([1, 1, 2, 2])
    r = metrics_from_confusion(confusion_matrix(t, t, 2))
    assert (r.oa, r.aa, r.kappa) == (1.0, 1.0, 1.0)
    r = metrics_from_confusion(confusion_matrix(t, np.ones(4, int), 2))
    assert r.oa == 0.5 and r.kappa == 0.0


def test_degenerate_chance_agreement():
    t = np.ones(5, int)
    with pytest.warns(RuntimeWarning):
        r = metrics_from_confusion(confusion_matrix(t, t, 3))
    assert r.kappa == 1.0 and "kappa-degenerate" in r.flags


def test_excludes_training_and_background():
    labels = np.array([[0, 1, 1], [2, 2, 0]])
    gt = GroundTruth(labels, 2)
    pred = np.array([[2, 1, 2], [2, 2, 1]])
    ts = TrainingSet(np.array([2]), np.array([1]), (2, 3), 1, 0)
    r = compute_metrics(pred, gt, ts)
    assert r.n_eval == 3 and r.oa == 1.0
    r = compute_metrics(pred, gt, ts, include_train=True)
    assert r.n_eval == 4 and r.oa == 0.75


def test_unclassified_counts_as_error():
    gt = GroundTruth(np.array([[1, 2]]), 2)
    r = compute_metrics(np.array([[1, 0]]), gt)
    assert r.oa == 0.5 and r.n_unclassified == 1


def test_errors():
    gt = GroundTruth(np.array([[1, 2]]), 2)
    with pytest.raises(DataError):
        compute_metrics(np.zeros((2, 2), int), gt)
    with pytest.raises(DataError):
        compute_metrics(np.zeros((1, 2), int), GroundTruth(np.zeros((1, 2), int), 2))


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=60)
def test_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    c = int(rng.integers(1, 6))
    n = int(rng.integers(1, 80))
    truth = rng.integers(1, c + 1, n)
    pred = np.where(rng.random(n) < 0.6, truth, rng.integers(1, c + 1, n))
    M, oa, aa, kappa = brute_force(pred.tolist(), truth.tolist(), c)
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        r = metrics_from_confusion(confusion_matrix(truth, pred, c))
    assert confusion_matrix(truth, pred, c).tolist() == M
    assert r.oa == pytest.approx(oa, abs=1e-15)
    assert r.aa == pytest.approx(aa, abs=1e-15)
    assert r.kappa == pytest.approx(kappa, abs=1e-12)
    assert r.kappa <= r.oa + 1e-15
