import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadperm import apply_double_permutation, new_dyad_matrix, qap_estimates
from dyadperm.exceptions import DegenerateMatrixError, DimensionMismatchError, ZeroVarianceError
from dyadperm.ustat import (
    UStatEstimates,
    eta1_factor,
    resolve_eta1_correction,
    studentized_statistic,
    unstudentized_statistic,
)
from oracles import qap_oracle, sym


@pytest.mark.parametrize("n, correction", [(5, "plain"), (6, "sen"), (9, "sen"), (9, "plain"), (13, "sen")])
def test_estimates_match_loops(rng, n, correction):
    a = sym(rng, n) + 2.0
    b = 0.3 * a + sym(rng, n)
    np.fill_diagonal(a, 0)
    np.fill_diagonal(b, 0)
    e = qap_estimates(a, b, correction)
    rho, stud, v = qap_oracle(a, b, correction)
    assert e.rho_hat == pytest.approx(rho, rel=1e-12)
    assert e.v_hat == pytest.approx(v, rel=1e-12)
    assert studentized_statistic(e) == pytest.approx(stud, rel=1e-12)
    assert unstudentized_statistic(e) == pytest.approx(math.sqrt(n) * rho, rel=1e-12)


def test_rho_is_pearson_of_offdiagonal(pair):
    a, b = pair
    mask = ~np.eye(a.shape[0], dtype=bool)
    e = qap_estimates(a, b)
    assert e.rho_hat == pytest.approx(np.corrcoef(a[mask], b[mask])[0, 1], rel=1e-12)


def test_studentized_closed_form(pair):
    e = qap_estimates(*pair)
    alt = math.sqrt(e.n) * e.phi0_hat / (2 * math.sqrt(e.eta1_phi_hat))
    assert studentized_statistic(e) == pytest.approx(alt, rel=1e-12)


@pytest.mark.parametrize("n, expected", [(5, "plain"), (7, "plain"), (8, "sen"), (40, "sen")])
def test_auto_correction(n, expected):
    assert resolve_eta1_correction("auto", n) == expected


def test_correction_errors():
    with pytest.raises(ValueError):
        resolve_eta1_correction("sen", 4)
    with pytest.raises(ValueError):
        resolve_eta1_correction("jackknife", 10)
    assert eta1_factor("plain", 10) == 0.1
    assert eta1_factor("sen", 10) == pytest.approx(9 / 48)


def test_degenerate_names_input(make_sym):
    a = np.ones((5, 5)) - np.eye(5)
    with pytest.raises(DegenerateMatrixError) as info:
        qap_estimates(make_sym(5), a)
    assert info.value.which == "b"
    with pytest.raises(DegenerateMatrixError) as info:
        qap_estimates(a * 1e-300, make_sym(5))
    assert info.value.which == "a"


def test_dimension_mismatch(make_sym):
    with pytest.raises(DimensionMismatchError):
        qap_estimates(make_sym(5), make_sym(6))


def test_zero_variance_raises():
    e = UStatEstimates(0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 10, "plain")
    with pytest.raises(ZeroVarianceError):
        studentized_statistic(e)


@settings(max_examples=50, deadline=None)
@given(st.integers(5, 10), st.integers(0, 2**32 - 1), st.floats(0.1, 50), st.floats(-20, 20))
def test_affine_and_relabelling_invariance(n, seed, scale, shift):
    rng = np.random.default_rng(seed)
    a, b = sym(rng, n), sym(rng, n)
    e0 = qap_estimates(a, b)
    a2 = scale * a + shift
    np.fill_diagonal(a2, 0)
    e1 = qap_estimates(a2, b)
    assert e1.rho_hat == pytest.approx(e0.rho_hat, rel=1e-9, abs=1e-12)
    assert studentized_statistic(e1) == pytest.approx(studentized_statistic(e0), rel=1e-9, abs=1e-12)
    pi = rng.permutation(n)
    ma, mb = new_dyad_matrix(a), new_dyad_matrix(b)
    e2 = qap_estimates(apply_double_permutation(ma, pi), apply_double_permutation(mb, pi))
    assert e2.rho_hat == pytest.approx(e0.rho_hat, rel=1e-9, abs=1e-12)
    assert e2.v_hat == pytest.approx(e0.v_hat, rel=1e-9)
    assert -1 - 1e-12 <= e0.rho_hat <= 1 + 1e-12
