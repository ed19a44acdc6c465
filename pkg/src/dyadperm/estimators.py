"""Estimator-style wrappers with scikit-learn conventions.

Networks are passed as ``(n, n)`` arrays; several covariate networks are a
sequence of arrays or a ``(k, n, n)`` array.
"""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .dyad import DyadMatrix, new_dyad_matrix, off_diagonal_mean
from .exceptions import DimensionMismatchError, DyadValidationError
from .permutation import run_mrqap, run_qap
from .regress import cluster_robust_variance, fit_dyadic_ols, make_design, wald_statistic
from .ustat import qap_estimates


def check_dyad(x, name: str = "X") -> DyadMatrix:
    """Validate one network; errors mention ``name``."""
    try:
        return new_dyad_matrix(x)
    except DyadValidationError as exc:
        raise type(exc)(f"{name}: {exc}") from None


def check_dyads(xs, n=None, name: str = "X") -> tuple:
    """Validate a stack of networks sharing ``n`` units."""
    if isinstance(xs, DyadMatrix):
        xs = [xs]
    elif isinstance(xs, np.ndarray) and xs.ndim == 2:
        xs = [xs]
    out = tuple(check_dyad(x, f"{name}[{k}]") for k, x in enumerate(xs))
    if not out:
        raise DyadValidationError(f"{name}: no networks given")
    n = out[0].n if n is None else n
    for k, m in enumerate(out):
        if m.n != n:
            raise DimensionMismatchError(f"{name}[{k}] has n={m.n}, expected {n}")
    return out


def check_seed(random_state) -> int:
    """Integer seed from ``None`` (fresh entropy), an int or a numpy Generator."""
    if random_state is None:
        return int(np.random.SeedSequence().entropy % (2**63))
    if isinstance(random_state, np.random.Generator):
        return int(random_state.integers(0, 2**63))
    if isinstance(random_state, numbers.Integral) and random_state >= 0:
        return int(random_state)
    raise ValueError(f"random_state must be None, a non-negative int or a Generator, got {random_state!r}")


class QAPTest(BaseEstimator):
    """QAP correlation test between two networks.

    Parameters
    ----------
    statistic : {"studentized", "plain"}
    n_reps : int
        Monte Carlo budget; small ``n`` switches to full enumeration.
    random_state : int, Generator or None
    eta1_correction : {"auto", "sen", "plain"}
    ties : {"inclusive", "literal"}

    Attributes
    ----------
    estimates_ : UStatEstimates
    report_ : PermutationReport
    statistic_, pvalue_, rho_ : float
    seed_ : int
    """

    def __init__(self, statistic="studentized", n_reps=999, random_state=0,
                 eta1_correction="auto", ties="inclusive"):
        self.statistic = statistic
        self.n_reps = n_reps
        self.random_state = random_state
        self.eta1_correction = eta1_correction
        self.ties = ties

    def fit(self, X, y):
        b = check_dyad(X, "X")
        a = check_dyad(y, "y")
        if a.n != b.n:
            raise DimensionMismatchError(f"X has n={b.n}, y has n={a.n}")
        self.seed_ = check_seed(self.random_state)
        self.estimates_ = qap_estimates(a, b, self.eta1_correction)
        self.report_ = run_qap(
            a, b, self.statistic, self.n_reps, self.seed_,
            eta1_correction=self.eta1_correction, ties=self.ties,
        )
        self.statistic_ = self.report_.observed
        self.pvalue_ = self.report_.pvalue
        self.rho_ = self.estimates_.rho_hat
        self.n_units_ = a.n
        return self


def _split_regressors(X, n_focal, controls, n):
    xs = check_dyads(X, n, "X")
    if controls is not None:
        cs = check_dyads(controls, n, "controls")
        return xs, cs
    if n_focal is None:
        return xs, ()
    if not 1 <= n_focal <= len(xs):
        raise ValueError(f"n_focal must be in [1, {len(xs)}], got {n_focal}")
    return xs[:n_focal], xs[n_focal:]


class DyadicRegression(RegressorMixin, BaseEstimator):
    """Least squares of a network on covariate networks with dyadic-robust variance.

    The first ``n_focal`` networks in ``X`` are the focal regressors (all of
    them by default); the Wald statistic tests those.
    """

    def __init__(self, n_focal=None, eta1_correction="auto"):
        self.n_focal = n_focal
        self.eta1_correction = eta1_correction

    def fit(self, X, y):
        a = check_dyad(y, "y")
        focal, nuisance = _split_regressors(X, self.n_focal, None, a.n)
        self.design_ = make_design(a, focal, nuisance)
        fit = fit_dyadic_ols(self.design_, self.eta1_correction)
        self.fit_ = fit
        self.coef_ = np.array(fit.coef)
        self.intercept_ = fit.intercept
        self.v_hat_ = np.array(fit.v_hat)
        self.standard_errors_ = fit.standard_errors
        self.residuals_ = np.array(fit.residuals)
        self.wald_ = wald_statistic(fit)
        self.n_features_in_ = len(self.coef_)
        return self

    def cluster_robust_variance(self):
        check_is_fitted(self, "fit_")
        return cluster_robust_variance(self.design_, self.fit_)

    def predict(self, X):
        check_is_fitted(self, "fit_")
        xs = check_dyads(X, None, "X")
        if len(xs) != self.n_features_in_:
            raise DimensionMismatchError(f"expected {self.n_features_in_} networks, got {len(xs)}")
        out = self.intercept_ + np.tensordot(self.coef_, np.stack([x.values for x in xs]), axes=1)
        np.fill_diagonal(out, 0.0)
        return out

    def score(self, X, y, sample_weight=None):
        """R^2 over off-diagonal entries."""
        a = check_dyad(y, "y")
        pred = self.predict(X)
        mask = ~np.eye(a.n, dtype=bool)
        resid = a.values[mask] - pred[mask]
        dev = a.values[mask] - off_diagonal_mean(a)
        return float(1.0 - np.sum(resid**2) / np.sum(dev**2))


class MRQAPTest(BaseEstimator):
    """Permutation test of focal coefficients in a dyadic regression.

    ``fit(X, y, controls=None)``: ``X`` holds the focal networks and
    ``controls`` the nuisance networks.
    """

    def __init__(self, strategy="b", statistic="wald", n_reps=999, random_state=0,
                 eta1_correction="auto", ties="inclusive"):
        self.strategy = strategy
        self.statistic = statistic
        self.n_reps = n_reps
        self.random_state = random_state
        self.eta1_correction = eta1_correction
        self.ties = ties

    def fit(self, X, y, controls=None):
        a = check_dyad(y, "y")
        focal = check_dyads(X, a.n, "X")
        nuisance = () if controls is None else check_dyads(controls, a.n, "controls")
        self.design_ = make_design(a, focal, nuisance)
        self.seed_ = check_seed(self.random_state)
        self.report_ = run_mrqap(
            self.design_, self.strategy, self.statistic, self.n_reps, self.seed_,
            eta1_correction=self.eta1_correction, ties=self.ties,
        )
        self.fit_ = fit_dyadic_ols(self.design_, self.eta1_correction)
        self.coef_ = np.array(self.fit_.coef)
        self.statistic_ = self.report_.observed
        self.pvalue_ = self.report_.pvalue
        return self
