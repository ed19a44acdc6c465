"""Permutation distributions for QAP and MRQAP.

Units are relabelled by a permutation ``pi`` applied to rows and columns of
one or more matrices at once. When ``n!`` is small every permutation is
enumerated; otherwise replicates come from a seeded
:class:`~dyadperm.rng.PermutationStream`.

Replicate statistics are computed from per-row Gram matrices
``G_i = sum_j z_ij z_ij'`` of the centered layers ``z = (a, x_1, ..., x_k)``.
Only the cross-products between permuted and fixed layers change with
``pi``, and those are the only ones recomputed.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Optional

import numpy as np

from ._kernels import permuted_cross_rowsums
from .dyad import centered, new_dyad_matrix
from .exceptions import (
    BudgetWarning,
    DyadValidationError,
    EmptyReplicatesError,
    SingularDesignError,
    SingularVarianceError,
    ZeroVarianceError,
)
from .regress import DyadDesign, residualize, stack_centered
from .rng import ALGORITHM, PermutationStream
from .ustat import check_nondegenerate, eta1_factor, qap_estimates, resolve_eta1_correction

#: Enumerate all ``n!`` permutations when ``n! <= max(n_reps, EXACT_LIMIT)``.
EXACT_LIMIT = 50_000
#: Monte Carlo budgets below this trigger a :class:`BudgetWarning`.
MIN_MONTE_CARLO_REPS = 100
#: Relative tolerance for counting a replicate as tied with the observed value.
TIE_RTOL = 1e-9
BATCH = 256

QAP_STATISTICS = ("plain", "studentized")
MRQAP_STATISTICS = ("coef", "wald")
TIE_RULES = ("inclusive", "literal")


class Mode(str, Enum):
    EXACT = "exact"
    MONTE_CARLO = "monte-carlo"


class Strategy(str, Enum):
    """What gets permuted in MRQAP."""

    OUTCOME = "a"
    FOCAL = "b"
    RESIDUAL_FOCAL = "eps-b"
    RESIDUAL_OUTCOME = "eps"


@dataclass(frozen=True, eq=False)
class PermutationReport:
    """Observed statistic, its permutation replicates and the p-value.

    ``replicates`` are in replicate order (enumeration order in exact mode,
    stream order otherwise); in exact mode the first one is the identity.
    """

    observed: float
    replicates: np.ndarray
    pvalue: float
    alternative: str
    mode: Mode
    n_reps: int
    seed: Optional[int]
    statistic: str
    strategy: Optional[Strategy] = None
    ties: str = "inclusive"
    rng_algorithm: str = ALGORITHM
    eta1_correction: str = "plain"

    def __eq__(self, other):
        if not isinstance(other, PermutationReport):
            return NotImplemented
        same = [
            getattr(self, f) == getattr(other, f)
            for f in (
                "observed", "pvalue", "alternative", "mode", "n_reps", "seed",
                "statistic", "strategy", "ties", "rng_algorithm", "eta1_correction",
            )
        ]
        return all(same) and np.array_equal(self.replicates, other.replicates)

    __hash__ = None


def permutation_cdf(replicates, t: float) -> float:
    """Fraction of replicates ``<= t``."""
    reps = np.asarray(replicates, dtype=float)
    if reps.size == 0:
        raise EmptyReplicatesError("no replicates")
    return float(np.count_nonzero(reps <= t) / reps.size)


def _tie_tol(observed: float) -> float:
    return TIE_RTOL * abs(observed) + 1e-300


def two_sided_pvalue(observed: float, replicates, *, ties: str = "inclusive", add_one: bool = False) -> float:
    """Mass of replicates at least as extreme as ``|observed|`` in either tail.

    ``ties="literal"`` evaluates ``1 - L(|W|) + L(-|W|)`` literally, where ``L``
    is the empirical CDF: replicates equal to ``+|W|`` are not counted.
    ``ties="inclusive"`` counts replicates within a relative ``1e-9`` of
    ``+|W|`` as well, which makes the exact-enumeration p-value
    ``#{|W_pi| >= |W|} / n!``. With ``add_one`` the observed value is counted
    as one extra extreme replicate (Monte Carlo).
    """
    reps = np.asarray(replicates, dtype=float)
    if reps.size == 0:
        raise EmptyReplicatesError("no replicates")
    w = abs(observed)
    if ties == "literal":
        count = np.count_nonzero((reps > w) | (reps <= -w))
    elif ties == "inclusive":
        tol = _tie_tol(w)
        count = np.count_nonzero((reps >= w - tol) | (reps <= -w + tol))
    else:
        raise ValueError(f"ties must be one of {TIE_RULES}, got {ties!r}")
    if add_one:
        return (count + 1) / (reps.size + 1)
    return count / reps.size


def upper_pvalue(observed: float, replicates, *, add_one: bool = False) -> float:
    """Mass of replicates ``>= observed`` (for non-negative statistics such as Wald)."""
    reps = np.asarray(replicates, dtype=float)
    if reps.size == 0:
        raise EmptyReplicatesError("no replicates")
    count = np.count_nonzero(reps >= observed - _tie_tol(observed))
    if add_one:
        return (count + 1) / (reps.size + 1)
    return count / reps.size


def permutation_mode(n: int, n_reps: int) -> Mode:
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    if n <= 12 and math.factorial(n) <= max(n_reps, EXACT_LIMIT):
        return Mode.EXACT
    return Mode.MONTE_CARLO


def permutation_batches(n: int, n_reps: int, seed: int, batch: int = BATCH, index: int = 0) -> tuple:
    """``(mode, total, iterator over int64 arrays of permutations)``.

    ``index`` selects one of many independent streams under the same seed.
    """
    mode = permutation_mode(n, n_reps)
    if mode is Mode.EXACT:
        total = math.factorial(n)

        def exact() -> Iterator[np.ndarray]:
            perms = itertools.permutations(range(n))
            while True:
                chunk = np.array(list(itertools.islice(perms, batch)), dtype=np.int64)
                if chunk.size == 0:
                    return
                yield chunk.reshape(-1, n)

        return mode, total, exact()
    if n_reps < MIN_MONTE_CARLO_REPS:
        warnings.warn(
            f"{n_reps} Monte Carlo permutations is below the recommended "
            f"{MIN_MONTE_CARLO_REPS}",
            BudgetWarning,
            stacklevel=3,
        )
    stream = PermutationStream(seed, index=index)

    def sampled() -> Iterator[np.ndarray]:
        for start in range(0, n_reps, batch):
            yield stream.block(n, start, min(start + batch, n_reps))

    return mode, n_reps, sampled()


def _row_gram(z: np.ndarray) -> np.ndarray:
    """``G[i, s, t] = sum_j z[s, i, j] z[t, i, j]`` via the replicate kernel."""
    d, n, _ = z.shape
    idx = np.arange(d)
    ident = np.arange(n, dtype=np.int64)[None, :]
    return permuted_cross_rowsums(z, idx, idx, ident)[0]


class QAPContext:
    """Precomputed pieces for evaluating QAP statistics on ``(A_pi, B)``."""

    def __init__(self, a, b, eta1_correction: str = "auto"):
        a = new_dyad_matrix(a)
        b = new_dyad_matrix(b)
        est = qap_estimates(a, b, eta1_correction)
        self.estimates = est
        self.n = n = est.n
        self.correction = est.eta1_correction
        self.factor = eta1_factor(self.correction, n)
        self.eta2 = est.eta2_alpha_hat * est.eta2_beta_hat
        self.z = np.ascontiguousarray(np.stack([centered(a), centered(b)]))
        self._moving = np.array([0])
        self._fixed = np.array([1])

    def rowsums(self, perms: np.ndarray) -> np.ndarray:
        return permuted_cross_rowsums(self.z, self._moving, self._fixed, perms)[:, :, 0, 0]

    def statistics(self, rowsums: np.ndarray) -> dict:
        n = self.n
        phi0 = rowsums.sum(axis=1) / (n * (n - 1) - 1)
        rho = phi0 / math.sqrt(self.eta2)
        eta1 = self.factor * np.sum((rowsums / (n - 1)) ** 2, axis=1)
        if np.any(eta1 <= 0):
            raise ZeroVarianceError("v_hat is zero for some permutation")
        v = 4.0 * eta1 / self.eta2
        plain = math.sqrt(n) * rho
        return {"plain": plain, "studentized": plain / np.sqrt(v)}

    def evaluate(self, perms: np.ndarray) -> dict:
        return self.statistics(self.rowsums(perms))

    def observed(self) -> dict:
        ident = np.arange(self.n, dtype=np.int64)[None, :]
        return {k: float(v[0]) for k, v in self.evaluate(ident).items()}


def _check_choice(value, choices, what):
    if value not in choices:
        raise ValueError(f"{what} must be one of {choices}, got {value!r}")


def run_qap(
    a,
    b,
    statistic: str = "studentized",
    n_reps: int = 999,
    seed: int = 0,
    *,
    eta1_correction: str = "auto",
    ties: str = "inclusive",
) -> PermutationReport:
    """QAP test of association between two dyadic matrices.

    Replicates evaluate ``statistic`` on ``(A_pi, B)``. ``statistic`` is
    ``"plain"`` (``sqrt(n) * rho_hat``) or ``"studentized"``
    (``sqrt(n) * rho_hat / v_hat^(1/2)``); the p-value is two-sided.
    """
    _check_choice(statistic, QAP_STATISTICS, "statistic")
    _check_choice(ties, TIE_RULES, "ties")
    ctx = QAPContext(a, b, eta1_correction)
    observed = ctx.observed()[statistic]
    mode, total, batches = permutation_batches(ctx.n, n_reps, seed)
    reps = np.concatenate([ctx.evaluate(p)[statistic] for p in batches])
    p = two_sided_pvalue(observed, reps, ties=ties, add_one=mode is Mode.MONTE_CARLO)
    return PermutationReport(
        observed, reps, p, "two-sided", mode, total,
        seed if mode is Mode.MONTE_CARLO else None, statistic,
        ties=ties, eta1_correction=ctx.correction,
    )


class MRQAPContext:
    """Precomputed pieces for MRQAP replicates under one strategy.

    Layer 0 of the permuted stack is the outcome; layers ``1..p`` the focal
    regressors and ``p+1..p+q`` the nuisance regressors. Residual strategies
    replace the outcome (``eps``) or focal layers (``eps-b``) by residuals on
    ``1`` and the nuisance regressors.
    """

    def __init__(self, design: DyadDesign, strategy="b", eta1_correction: str = "auto"):
        self.design = design
        self.strategy = strategy = Strategy(strategy)
        n, p, q = design.n, design.p, design.q
        self.n, self.p, self.q = n, p, q
        self.correction = resolve_eta1_correction(eta1_correction, n)
        self.factor = eta1_factor(self.correction, n)
        check_nondegenerate(centered(design.outcome), design.outcome.values, "a")
        for name, m in zip(design.regressor_names, design.regressors):
            check_nondegenerate(centered(m), m.values, name)
        base = stack_centered((design.outcome,) + design.regressors)
        self.z_observed = np.ascontiguousarray(base)
        z = base.copy()
        if strategy is Strategy.OUTCOME:
            moving = [0]
        elif strategy is Strategy.FOCAL:
            moving = list(range(1, p + 1))
        elif strategy is Strategy.RESIDUAL_FOCAL:
            moving = list(range(1, p + 1))
            resid = residualize(design.focal, design.nuisance)
            z[1 : p + 1] = stack_centered(resid)
        else:
            moving = [0]
            z[0] = stack_centered(residualize([design.outcome], design.nuisance))[0]
        d = z.shape[0]
        self.z = np.ascontiguousarray(z)
        self.moving = np.array(moving, dtype=np.int64)
        self.fixed = np.array([s for s in range(d) if s not in moving], dtype=np.int64)
        self.gram0 = _row_gram(self.z)

    def gram(self, perms: np.ndarray) -> np.ndarray:
        mv, fx = self.moving, self.fixed
        cross = permuted_cross_rowsums(self.z, mv, fx, perms)
        g = np.broadcast_to(self.gram0, (perms.shape[0],) + self.gram0.shape).copy()
        g[:, :, mv[:, None], mv[None, :]] = self.gram0[perms][:, :, mv[:, None], mv[None, :]]
        g[:, :, mv[:, None], fx[None, :]] = cross
        g[:, :, fx[:, None], mv[None, :]] = np.swapaxes(cross, 2, 3)
        return g

    def statistics(self, g: np.ndarray) -> dict:
        n, p = self.n, self.p
        tot = g.sum(axis=1) / (n * (n - 1))
        s = tot[:, 1:, 1:]
        sa = tot[:, 1:, 0]
        try:
            s_inv = np.linalg.inv(s)
        except np.linalg.LinAlgError:
            raise SingularDesignError("permuted design is singular") from None
        w = np.einsum("rkl,rl->rk", s_inv, sa)
        phi = (g[:, :, 1:, 0] - np.einsum("rikl,rl->rik", g[:, :, 1:, 1:], w)) / (n - 1)
        h = self.factor * np.einsum("rik,ril->rkl", phi, phi)
        v = 4.0 * s_inv @ h @ s_inv
        theta = w[:, :p]
        vf = 0.5 * (v[:, :p, :p] + np.swapaxes(v[:, :p, :p], 1, 2))
        try:
            wald = n * np.einsum("rk,rk->r", theta, np.linalg.solve(vf, theta[..., None])[..., 0])
        except np.linalg.LinAlgError:
            raise SingularVarianceError("coefficient covariance is singular") from None
        if p == 1:
            coef = math.sqrt(n) * theta[:, 0]
        else:
            coef = n * np.sum(theta * theta, axis=1)
        return {"coef": coef, "wald": wald}

    def evaluate(self, perms: np.ndarray) -> dict:
        return self.statistics(self.gram(perms))

    def observed(self) -> dict:
        if self.strategy in (Strategy.OUTCOME, Strategy.FOCAL):
            g0 = self.gram0
        else:
            g0 = _row_gram(self.z_observed)
        return {k: float(v[0]) for k, v in self.statistics(g0[None]).items()}


def mrqap_alternative(statistic: str, p: int) -> str:
    return "two-sided" if statistic == "coef" and p == 1 else "greater"


def run_mrqap(
    design: DyadDesign,
    strategy="b",
    statistic: str = "wald",
    n_reps: int = 999,
    seed: int = 0,
    *,
    eta1_correction: str = "auto",
    ties: str = "inclusive",
) -> PermutationReport:
    """MRQAP test of the focal coefficients.

    ``statistic="wald"`` uses ``n theta' (F'VF)^-1 theta`` with an upper-tail
    p-value. ``statistic="coef"`` uses ``sqrt(n) * theta_1`` (two-sided) when
    there is one focal regressor and ``n * ||theta||^2`` (upper tail)
    otherwise.
    """
    _check_choice(statistic, MRQAP_STATISTICS, "statistic")
    _check_choice(ties, TIE_RULES, "ties")
    if not isinstance(design, DyadDesign):
        raise DyadValidationError("design must be a DyadDesign (see make_design)")
    ctx = MRQAPContext(design, strategy, eta1_correction)
    observed = ctx.observed()[statistic]
    mode, total, batches = permutation_batches(ctx.n, n_reps, seed)
    reps = np.concatenate([ctx.evaluate(p)[statistic] for p in batches])
    alternative = mrqap_alternative(statistic, ctx.p)
    add_one = mode is Mode.MONTE_CARLO
    if alternative == "two-sided":
        pval = two_sided_pvalue(observed, reps, ties=ties, add_one=add_one)
    else:
        pval = upper_pvalue(observed, reps, add_one=add_one)
    return PermutationReport(
        observed, reps, pval, alternative, mode, total,
        seed if add_one else None, statistic, ctx.strategy,
        ties=ties, eta1_correction=ctx.correction,
    )
