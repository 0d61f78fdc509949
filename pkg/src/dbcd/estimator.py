"""Scikit-learn style front end for the distributed solvers."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets, type_of_target
from sklearn.utils.validation import check_is_fitted, validate_data

from .datasets import Dataset, SparseMatrix
from .driver import MethodConfig, run_method

__all__ = ["DistributedL1Classifier"]


class DistributedL1Classifier(ClassifierMixin, BaseEstimator):
    """l1-regularized linear classifier fit on a simulated feature-partitioned cluster.

    Parameters mirror the solver configuration: ``method`` picks the
    update rule ('hydra', 'grock', 'pcd-r', 'pcd-s', 'dbcd-r', 'dbcd-s'),
    ``lam`` the l1 weight, ``n_nodes`` the simulated cluster size and
    ``wss_frac`` the per-node working-set fraction.  After ``fit`` the
    solution is in ``coef_`` and the per-iteration history in
    ``trajectory_``.

    >>> clf = DistributedL1Classifier(method="dbcd-s", lam=0.01).fit(X, y)
    >>> clf.predict(X)
    """

    def __init__(
        self,
        method="dbcd-s",
        lam=1e-2,
        loss="logistic",
        n_nodes=4,
        wss_frac=0.1,
        mu=1e-12,
        nu=1e-12,
        inner_cycles=10,
        beta_ls=0.5,
        sigma=0.01,
        max_outer=800,
        kkt_tol=1e-6,
        seed=0,
        eps_mode="fixed-k",
        omega=2.0,
        beta_comm=100.0,
        threads=1,
    ):
        self.method = method
        self.lam = lam
        self.loss = loss
        self.n_nodes = n_nodes
        self.wss_frac = wss_frac
        self.mu = mu
        self.nu = nu
        self.inner_cycles = inner_cycles
        self.beta_ls = beta_ls
        self.sigma = sigma
        self.max_outer = max_outer
        self.kkt_tol = kkt_tol
        self.seed = seed
        self.eps_mode = eps_mode
        self.omega = omega
        self.beta_comm = beta_comm
        self.threads = threads

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.classifier_tags.multi_class = False
        tags.input_tags.sparse = True
        return tags

    def _config(self) -> MethodConfig:
        return MethodConfig(
            method=self.method,
            lam=self.lam,
            n_nodes=self.n_nodes,
            wss_frac=self.wss_frac,
            mu=self.mu,
            nu=self.nu,
            inner_cycles=self.inner_cycles,
            beta_ls=self.beta_ls,
            sigma=self.sigma,
            max_outer=self.max_outer,
            kkt_tol=self.kkt_tol,
            seed=self.seed,
            eps_mode=self.eps_mode,
            omega=self.omega,
            beta_comm=self.beta_comm,
            threads=self.threads,
        )

    def fit(self, X, y):
        X, y = validate_data(self, X, y, accept_sparse="csc", dtype=np.float64)
        check_classification_targets(y)
        y_type = type_of_target(y, input_name="y", raise_unknown=True)
        if y_type != "binary":
            raise ValueError(
                "Only binary classification is supported. The type of the "
                f"target is {y_type}."
            )
        self.classes_ = np.unique(y)
        if self.classes_.size < 2:
            raise ValueError(
                "Classifier can't train when only one class is present."
            )
        signs = np.where(y == self.classes_[1], 1.0, -1.0)
        dataset = Dataset(
            SparseMatrix.from_csc(sp.csc_matrix(X)), signs, loss=self.loss
        )
        trajectory = run_method(self._config(), dataset)
        self.coef_ = trajectory.state.w
        self.intercept_ = 0.0
        self.n_iter_ = len(trajectory.records)
        self.kkt_ = trajectory.final_kkt
        self.objective_ = trajectory.state.objective
        self.trajectory_ = trajectory
        return self

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False, accept_sparse="csc", dtype=np.float64)
        return np.asarray(X @ self.coef_).ravel()

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[(scores > 0).astype(int)]
