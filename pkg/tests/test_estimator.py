import numpy as np
import pytest
import scipy.sparse as sp
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from dbcd.errors import ConfigurationError
from dbcd.estimator import DistributedL1Classifier


def separable_problem(n=200, m=30, seed=0):
    rng = np.random.Generator(np.random.PCG64(seed))
    X = rng.standard_normal((n, m))
    w = np.zeros(m)
    pattern = np.array([2.0, -1.5, 1.0, 3.0, -2.0])
    w[: min(5, m)] = pattern[: min(5, m)]
    y = np.where(X @ w > 0, 1, -1)
    return X, y


def test_get_params_round_trip_and_clone():
    clf = DistributedL1Classifier(method="pcd-s", lam=0.05, n_nodes=3, seed=7)
    params = clf.get_params()
    assert params["method"] == "pcd-s"
    assert params["lam"] == 0.05
    assert params["n_nodes"] == 3
    twin = clone(clf)
    assert twin.get_params() == params
    clf.set_params(lam=0.2)
    assert clf.lam == 0.2
    assert twin.lam == 0.05


def test_fit_predict_separable():
    X, y = separable_problem()
    clf = DistributedL1Classifier(method="dbcd-s", lam=0.01, n_nodes=3,
                                  max_outer=300)
    clf.fit(X, y)
    assert clf.coef_.shape == (30,)
    assert clf.intercept_ == 0.0
    assert clf.n_iter_ >= 1
    assert clf.kkt_ >= 0.0
    assert clf.objective_ > 0.0
    acc = np.mean(clf.predict(X) == y)
    assert acc >= 0.95


def test_predict_before_fit_raises():
    X, _ = separable_problem()
    with pytest.raises(NotFittedError):
        DistributedL1Classifier().predict(X)


def test_three_classes_rejected():
    X, y = separable_problem()
    y3 = y.copy()
    y3[:10] = 2
    with pytest.raises(ValueError, match="binary"):
        DistributedL1Classifier().fit(X, y3)


def test_single_class_rejected():
    X, y = separable_problem()
    with pytest.raises(ValueError, match="one class"):
        DistributedL1Classifier().fit(X, np.ones_like(y))


def test_continuous_target_rejected():
    X, _ = separable_problem()
    with pytest.raises(ValueError):
        DistributedL1Classifier().fit(X, np.linspace(0.0, 1.0, X.shape[0]))


def test_zero_one_labels_map_back():
    X, y = separable_problem()
    y01 = (y > 0).astype(int)
    clf = DistributedL1Classifier(lam=0.01, max_outer=200).fit(X, y01)
    assert np.array_equal(clf.classes_, [0, 1])
    pred = clf.predict(X)
    assert set(np.unique(pred)) <= {0, 1}
    assert np.mean(pred == y01) >= 0.95


def test_string_labels_map_back():
    X, y = separable_problem()
    ystr = np.where(y > 0, "pos", "neg")
    clf = DistributedL1Classifier(lam=0.01, max_outer=200).fit(X, ystr)
    assert list(clf.classes_) == ["neg", "pos"]
    assert set(np.unique(clf.predict(X))) <= {"neg", "pos"}


def test_sparse_and_dense_inputs_agree():
    X, y = separable_problem(150, 20, seed=3)
    X[np.abs(X) < 0.8] = 0.0  # make it genuinely sparse
    dense = DistributedL1Classifier(lam=0.01, n_nodes=2, max_outer=150).fit(X, y)
    sparse = DistributedL1Classifier(lam=0.01, n_nodes=2, max_outer=150).fit(
        sp.csr_matrix(X), y
    )
    assert np.array_equal(dense.coef_, sparse.coef_)
    assert np.array_equal(dense.predict(X), sparse.predict(sp.csr_matrix(X)))


def test_decision_function_is_linear_score():
    X, y = separable_problem(100, 15, seed=4)
    clf = DistributedL1Classifier(lam=0.02, n_nodes=2, max_outer=150).fit(X, y)
    scores = clf.decision_function(X)
    assert scores == pytest.approx(X @ clf.coef_)
    assert np.array_equal(clf.predict(X), clf.classes_[(scores > 0).astype(int)])


def test_feature_count_mismatch_at_predict():
    X, y = separable_problem(100, 15, seed=4)
    clf = DistributedL1Classifier(lam=0.02, n_nodes=2, max_outer=100).fit(X, y)
    with pytest.raises(ValueError):
        clf.predict(X[:, :10])


def test_more_nodes_than_features_rejected():
    X, y = separable_problem(50, 3, seed=5)
    with pytest.raises(ConfigurationError, match="split"):
        DistributedL1Classifier(n_nodes=4).fit(X, y)


def test_trajectory_exposed():
    X, y = separable_problem(100, 15, seed=4)
    clf = DistributedL1Classifier(lam=0.02, n_nodes=2, max_outer=100).fit(X, y)
    assert len(clf.trajectory_.records) == clf.n_iter_
    assert clf.trajectory_.state.objective == clf.objective_


def test_passes_sklearn_estimator_checks():
    from sklearn.utils.estimator_checks import check_estimator

    check_estimator(
        DistributedL1Classifier(n_nodes=1, max_outer=60, kkt_tol=1e-4)
    )
