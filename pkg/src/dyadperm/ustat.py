"""Point estimates and U-statistic variance components for QAP."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dyad import DyadMatrix, centered, new_dyad_matrix
from .exceptions import DegenerateMatrixError, DimensionMismatchError, ZeroVarianceError

#: Relative threshold below which an off-diagonal variance is treated as zero.
DEGENERACY_RTOL = 1e-14
#: Smallest n at which ``eta1_correction="auto"`` selects Sen's factor.
SEN_MIN_UNITS = 8

ETA1_CORRECTIONS = ("auto", "sen", "plain")


def resolve_eta1_correction(correction: str, n: int) -> str:
    """Map ``"auto"`` to ``"sen"`` (n >= 8) or ``"plain"``; validate the rest."""
    if correction not in ETA1_CORRECTIONS:
        raise ValueError(
            f"eta1_correction must be one of {ETA1_CORRECTIONS}, got {correction!r}"
        )
    if correction == "auto":
        return "sen" if n >= SEN_MIN_UNITS else "plain"
    if correction == "sen" and n <= 4:
        raise ValueError("Sen's correction needs n >= 5")
    return correction


def eta1_factor(correction: str, n: int) -> float:
    """Multiplier applied to ``sum_i psi_i^2`` where ``psi_i`` is a row mean over ``j != i``.

    ``plain`` gives ``1/n``; ``sen`` gives ``(n-1)/((n-2)(n-4))``.
    """
    correction = resolve_eta1_correction(correction, n)
    if correction == "sen":
        return (n - 1) / ((n - 2) * (n - 4))
    return 1.0 / n


@dataclass(frozen=True)
class UStatEstimates:
    phi0_hat: float
    eta2_alpha_hat: float
    eta2_beta_hat: float
    eta1_phi_hat: float
    rho_hat: float
    v_hat: float
    n: int
    eta1_correction: str = "plain"


def check_nondegenerate(dev: np.ndarray, values: np.ndarray, which: str) -> float:
    """Return the off-diagonal sum of squares of ``dev``; raise if it is numerically zero."""
    ss = float(np.sum(dev * dev))
    n = dev.shape[0]
    scale = float(np.max(np.abs(values))) ** 2
    if ss == 0.0 or ss / (n * (n - 1) - 1) < DEGENERACY_RTOL * scale:
        raise DegenerateMatrixError(
            f"matrix {which!r} has constant off-diagonal entries", which=which
        )
    return ss


def qap_estimates(a: DyadMatrix, b: DyadMatrix, eta1_correction: str = "auto") -> UStatEstimates:
    """Pearson correlation of two dyadic matrices and its studentizing variance.

    ``phi0_hat``, ``eta2_alpha_hat`` and ``eta2_beta_hat`` use the
    ``n(n-1) - 1`` normalizer; ``eta1_phi_hat`` averages squared row means of
    the cross-products ``(a_ij - a_bar)(b_ij - b_bar)`` with the factor chosen
    by ``eta1_correction`` (see :func:`eta1_factor`).
    """
    a = new_dyad_matrix(a)
    b = new_dyad_matrix(b)
    if a.n != b.n:
        raise DimensionMismatchError(f"a has n={a.n} but b has n={b.n}")
    n = a.n
    ad = centered(a)
    bd = centered(b)
    ssa = check_nondegenerate(ad, a.values, "a")
    ssb = check_nondegenerate(bd, b.values, "b")
    denom = n * (n - 1) - 1
    prod = ad * bd
    phi0 = float(np.sum(prod)) / denom
    eta2a = ssa / denom
    eta2b = ssb / denom
    correction = resolve_eta1_correction(eta1_correction, n)
    rows = prod.sum(axis=1) / (n - 1)
    eta1 = eta1_factor(correction, n) * float(np.sum(rows * rows))
    rho = phi0 / math.sqrt(eta2a * eta2b)
    v = 4.0 * eta1 / (eta2a * eta2b)
    return UStatEstimates(phi0, eta2a, eta2b, eta1, rho, v, n, correction)


def studentized_statistic(e: UStatEstimates) -> float:
    """``sqrt(n) * rho_hat / sqrt(v_hat)``."""
    if not e.v_hat > 0:
        raise ZeroVarianceError("v_hat is zero; the first-order projection is degenerate")
    return math.sqrt(e.n) * e.rho_hat / math.sqrt(e.v_hat)


def unstudentized_statistic(e: UStatEstimates) -> float:
    return math.sqrt(e.n) * e.rho_hat
