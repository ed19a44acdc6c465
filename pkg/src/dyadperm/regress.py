"""Least squares on dyadic data, with variance estimators that respect the
dependence between dyads sharing a unit.

All fits include an intercept and use only off-diagonal entries. Each
unordered pair enters twice (as ``(i, j)`` and ``(j, i)``), which leaves the
solution unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dyad import DyadMatrix, centered, new_dyad_matrix, off_diagonal_mean
from .exceptions import (
    DimensionMismatchError,
    DyadValidationError,
    SingularDesignError,
    SingularVarianceError,
)
from .ustat import check_nondegenerate, eta1_factor, resolve_eta1_correction

#: Condition-number cutoff (on the correlation-scaled matrix) for singularity.
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class DyadDesign:
    """Outcome ``A``, focal regressors ``B_1..B_p`` and nuisance regressors ``C_1..C_q``."""

    outcome: DyadMatrix
    focal: tuple
    nuisance: tuple = ()
    names: Optional[tuple] = None

    @property
    def n(self) -> int:
        return self.outcome.n

    @property
    def p(self) -> int:
        return len(self.focal)

    @property
    def q(self) -> int:
        return len(self.nuisance)

    @property
    def regressors(self) -> tuple:
        return tuple(self.focal) + tuple(self.nuisance)

    @property
    def regressor_names(self) -> tuple:
        if self.names is not None:
            return self.names
        return tuple(f"b{k + 1}" for k in range(self.p)) + tuple(
            f"c{l + 1}" for l in range(self.q)
        )


def make_design(outcome, focal, nuisance=(), names: Optional[Sequence[str]] = None) -> DyadDesign:
    """Validate the matrices and bundle them into a :class:`DyadDesign`."""
    a = new_dyad_matrix(outcome)
    if isinstance(focal, (DyadMatrix, np.ndarray)):
        focal = [focal]
    focal = tuple(new_dyad_matrix(b) for b in focal)
    nuisance = tuple(new_dyad_matrix(c) for c in nuisance)
    if not focal:
        raise DyadValidationError("at least one focal regressor is required")
    for m in focal + nuisance:
        if m.n != a.n:
            raise DimensionMismatchError(f"regressor has n={m.n}, outcome has n={a.n}")
    if names is not None:
        names = tuple(str(x) for x in names)
        if len(names) != len(focal) + len(nuisance):
            raise DimensionMismatchError(
                f"{len(names)} names for {len(focal) + len(nuisance)} regressors"
            )
    return DyadDesign(a, focal, nuisance, names)


@dataclass(frozen=True)
class DyadFit:
    """Result of :func:`fit_dyadic_ols`.

    ``v_hat`` estimates the asymptotic covariance of ``sqrt(n) * coef``;
    standard errors are ``sqrt(diag(v_hat) / n)``.
    """

    intercept: float
    coef: np.ndarray
    residuals: np.ndarray
    sigma_hat: np.ndarray
    h1_phi_hat: np.ndarray
    v_hat: np.ndarray
    selection: np.ndarray
    n: int
    p: int
    q: int
    eta1_correction: str
    names: tuple = ()

    @property
    def theta(self) -> np.ndarray:
        """Focal coefficients."""
        return self.coef[: self.p]

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.v_hat), 0.0, None) / self.n)


def stack_centered(matrices) -> np.ndarray:
    """Stack ``m - mean(m)`` (zero diagonal) into an array of shape ``(k, n, n)``."""
    return np.stack([centered(m) for m in matrices])


def _cross(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``out[s, t] = sum_ij x[s, i, j] * y[t, i, j]`` with pairwise summation."""
    out = np.empty((x.shape[0], y.shape[0]))
    for s in range(x.shape[0]):
        for t in range(y.shape[0]):
            out[s, t] = np.sum(x[s] * y[t])
    return out


def scaled_inverse(mat: np.ndarray, exc=SingularDesignError, what="design") -> np.ndarray:
    """Inverse of a symmetric positive (semi)definite matrix via SVD.

    The condition number is judged after rescaling to unit diagonal so that
    regressors on very different scales are not flagged as collinear.
    """
    d = np.sqrt(np.diag(mat))
    if np.any(~np.isfinite(d)) or np.any(d == 0):
        raise exc(f"{what} covariance has a zero diagonal entry")
    corr = mat / np.outer(d, d)
    u, s, vt = np.linalg.svd(corr)
    if s[-1] <= 0 or s[0] / s[-1] > MAX_CONDITION:
        cond = np.inf if s[-1] <= 0 else s[0] / s[-1]
        raise exc(f"{what} covariance is singular (condition number {cond:.3g})")
    inv = (vt.T / s) @ u.T
    inv = 0.5 * (inv + inv.T)
    return inv / np.outer(d, d)


def fit_dyadic_ols(design: DyadDesign, eta1_correction: str = "auto") -> DyadFit:
    """Regress the outcome on an intercept and all regressors; estimate ``V_hat``.

    ``V_hat = 4 Sigma^-1 H Sigma^-1`` where ``Sigma`` is the regressor
    covariance over the ``n(n-1)`` dyads and ``H`` the covariance of the
    row means ``(n-1)^-1 sum_{j != i} e_ij (x_ij - x_bar)``.
    """
    n, p, q = design.n, design.p, design.q
    N = n * (n - 1)
    correction = resolve_eta1_correction(eta1_correction, n)
    names = design.regressor_names
    x = stack_centered(design.regressors)
    for name, m, dev in zip(names, design.regressors, x):
        check_nondegenerate(dev, m.values, name)
    ya = centered(design.outcome)
    sigma = _cross(x, x) / N
    sigma = 0.5 * (sigma + sigma.T)
    sigma_a = _cross(x, ya[None])[:, 0] / N
    sigma_inv = scaled_inverse(sigma)
    coef = sigma_inv @ sigma_a
    resid = ya - np.tensordot(coef, x, axes=1)
    np.fill_diagonal(resid, 0.0)
    phi = np.einsum("ij,kij->ik", resid, x) / (n - 1)
    h1 = eta1_factor(correction, n) * (phi.T @ phi)
    v = 4.0 * sigma_inv @ h1 @ sigma_inv
    v = 0.5 * (v + v.T)
    means = np.array([off_diagonal_mean(m) for m in design.regressors])
    intercept = off_diagonal_mean(design.outcome) - float(means @ coef)
    selection = np.zeros((p + q, p))
    selection[:p, :p] = np.eye(p)
    for arr in (coef, resid, sigma, h1, v, selection):
        arr.setflags(write=False)
    return DyadFit(
        intercept, coef, resid, sigma, h1, v, selection, n, p, q, correction, names
    )


def cluster_robust_variance(design: DyadDesign, fit: DyadFit) -> np.ndarray:
    """Liang-Zeger sandwich with one cluster per unit (matrix column).

    Diagonals of the outcome and regressors are filled with their
    off-diagonal means, an intercept column is added, and the sandwich is
    ``(sum_g X_g' X_g)^-1 (sum_g X_g' e_g e_g' X_g) (sum_g X_g' X_g)^-1``.
    Rows and columns are ordered ``(intercept, coef...)``. With Sen's
    correction the slope block times ``4 n^2 (n-1) / ((n-2)(n-4))`` equals
    ``fit.v_hat``.
    """
    n = design.n
    k = design.p + design.q
    if fit.n != n or fit.coef.shape[0] != k:
        raise DimensionMismatchError("fit does not belong to this design")
    filled = np.empty((k + 1, n, n))
    filled[0] = 1.0
    for s, m in enumerate(design.regressors, start=1):
        filled[s] = m.values
        np.fill_diagonal(filled[s], off_diagonal_mean(m))
    y = design.outcome.values.copy()
    np.fill_diagonal(y, off_diagonal_mean(design.outcome))
    beta = np.concatenate([[fit.intercept], fit.coef])
    e = y - np.tensordot(beta, filled, axes=1)
    bread = _cross(filled, filled)
    bread_inv = scaled_inverse(0.5 * (bread + bread.T))
    scores = np.einsum("sig,ig->gs", filled, e)
    meat = scores.T @ scores
    out = bread_inv @ meat @ bread_inv
    return 0.5 * (out + out.T)


def wald_statistic(fit: DyadFit, subset: str = "partial") -> float:
    """``n * theta' (F' V F)^-1 theta`` for the focal block (``"partial"``)
    or for every coefficient (``"full"``)."""
    if subset == "partial":
        k = fit.p
    elif subset == "full":
        k = fit.p + fit.q
    else:
        raise ValueError(f"subset must be 'partial' or 'full', got {subset!r}")
    theta = fit.coef[:k]
    vf = fit.v_hat[:k, :k]
    vinv = scaled_inverse(vf, SingularVarianceError, "coefficient")
    return float(fit.n * theta @ vinv @ theta)


def residualize(targets, controls=()) -> list:
    """Residual matrices from regressing each target's dyads on 1 and the controls."""
    targets = [new_dyad_matrix(t) for t in targets]
    controls = [new_dyad_matrix(c) for c in controls]
    if not targets:
        return []
    n = targets[0].n
    for m in targets + controls:
        if m.n != n:
            raise DimensionMismatchError("all matrices must share n")
    t = stack_centered(targets)
    if controls:
        c = stack_centered(controls)
        for l, (m, dev) in enumerate(zip(controls, c)):
            check_nondegenerate(dev, m.values, f"c{l + 1}")
        N = n * (n - 1)
        scc = _cross(c, c) / N
        gamma = scaled_inverse(0.5 * (scc + scc.T)) @ (_cross(c, t) / N)
        t = t - np.tensordot(gamma.T, c, axes=1)
    out = []
    for r in t:
        np.fill_diagonal(r, 0.0)
        r = 0.5 * (r + r.T)
        out.append(new_dyad_matrix(r))
    return out
