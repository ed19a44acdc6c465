import json

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dyadperm import new_dyad_matrix, parse_edge_list, parse_matrix_csv, qap_estimates, write_matrix_csv
from dyadperm.exceptions import (
    AsymmetricError,
    ConflictingDuplicateEdgeError,
    ParseError,
    SelfLoopError,
    UnknownLabelError,
)
from dyadperm.io import align_to, dumps_report, histogram, report_document


@pytest.fixture
def write(tmp_path):
    def _write(text, name="m.csv"):
        p = tmp_path / name
        p.write_text(text)
        return p

    return _write


def test_plain_grid(write):
    m = parse_matrix_csv(write("0,1,2\n1,0,3\n2,3,0\n"))
    np.testing.assert_array_equal(m.values, [[0, 1, 2], [1, 0, 3], [2, 3, 0]])
    assert m.labels is None


@pytest.mark.parametrize(
    "text",
    [
        "id,u1,u2,u3\nu1,0,1,2\nu2,1,0,3\nu3,2,3,0\n",
        "u1,u2,u3\n0,1,2\n1,0,3\n2,3,0\n",
        "u1,0,1,2\nu2,1,0,3\nu3,2,3,0\n",
    ],
)
def test_labels(write, text):
    m = parse_matrix_csv(write(text))
    assert m.labels == ("u1", "u2", "u3")
    assert m.values[1, 2] == 3


def test_ragged_row_reports_line(write):
    with pytest.raises(ParseError) as info:
        parse_matrix_csv(write("0,1,2\n1,0\n2,3,0\n"))
    assert info.value.line == 2


def test_bad_cell_reports_column(write):
    with pytest.raises(ParseError) as info:
        parse_matrix_csv(write("0,1,2\n1,0,x\n2,3,0\n"))
    assert (info.value.line, info.value.column) == (2, 3)


def test_label_mismatch(write):
    with pytest.raises(ParseError):
        parse_matrix_csv(write("id,u1,u2,u3\nu1,0,1,2\nzz,1,0,3\nu3,2,3,0\n"))


def test_validation_propagates(write):
    with pytest.raises(AsymmetricError):
        parse_matrix_csv(write("0,1,2\n5,0,3\n2,3,0\n"))


def test_edge_list_basic(write):
    m = parse_edge_list(write("1,2,5.0\n", "e.csv"), n_declared=3)
    expected = np.zeros((3, 3))
    expected[0, 1] = expected[1, 0] = 5.0
    np.testing.assert_array_equal(m.values, expected)


def test_edge_list_errors(write):
    with pytest.raises(SelfLoopError):
        parse_edge_list(write("1,1,2.0\n1,2,1\n", "e.csv"), 3)
    with pytest.raises(ConflictingDuplicateEdgeError) as info:
        parse_edge_list(write("1,2,5\n2,1,4\n", "e.csv"), 3)
    assert info.value.line == 2
    with pytest.raises(UnknownLabelError):
        parse_edge_list(write("1,4,1\n", "e.csv"), 3)
    with pytest.raises(UnknownLabelError):
        parse_edge_list(write("a,zz,1\n", "e.csv"), labels=["a", "b", "c"])


def test_edge_list_duplicates_that_agree(write):
    m = parse_edge_list(write("source,target,weight\n1,2,5\n2,1,5.0000000000001\n2,3,1\n", "e.csv"))
    assert m.n == 3 and m.values[0, 1] == 5


def test_edge_list_labels(write):
    m = parse_edge_list(write("# comment\nb,a,2\nc,a,1\nc,b,3\n", "e.csv"))
    assert m.labels == ("b", "a", "c")
    assert m.values[0, 1] == 2
    fixed = parse_edge_list(write("b,a,2\nc,a,1\nc,b,3\n", "e.csv"), labels=["a", "b", "c"])
    assert fixed.labels == ("a", "b", "c")
    assert fixed.values[1, 2] == 3


def test_edge_list_and_matrix_agree(tmp_path, make_sym):
    a = np.round(make_sym(6), 3)
    b = np.round(make_sym(6), 3)
    write_matrix_csv(a, tmp_path / "a.csv")
    lines = [f"{i + 1},{j + 1},{float(b[i, j])!r}" for i in range(6) for j in range(i + 1, 6)]
    (tmp_path / "b.edges").write_text("\n".join(lines) + "\n")
    write_matrix_csv(b, tmp_path / "b.csv")
    ea = parse_matrix_csv(tmp_path / "a.csv")
    e1 = qap_estimates(ea, parse_edge_list(tmp_path / "b.edges"))
    e2 = qap_estimates(ea, parse_matrix_csv(tmp_path / "b.csv"))
    assert e1 == e2


values = st.integers(3, 7).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.floats(-1e6, 1e6, allow_nan=False, allow_subnormal=True))
)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(values, st.booleans())
def test_round_trip(tmp_path, x, labelled):
    x = x + x.T
    np.fill_diagonal(x, 0.0)
    labels = [f"n{k}" for k in range(x.shape[0])] if labelled else None
    m = new_dyad_matrix(x, labels)
    path = tmp_path / "rt.csv"
    write_matrix_csv(m, path)
    back = parse_matrix_csv(path)
    assert back.values.tobytes() == m.values.tobytes()
    assert back.labels == m.labels


def test_align_to_reorders(make_sym):
    a = new_dyad_matrix(make_sym(4), list("wxyz"))
    pi = [2, 0, 3, 1]
    b = new_dyad_matrix(a.values[np.ix_(pi, pi)], [a.labels[k] for k in pi])
    assert align_to(a, b) == a


def test_report_formatting():
    doc = report_document("qap", {"b": 0.1, "a": [1.0, 2, 1 / 3], "c": np.float64(2.0)})
    text = dumps_report(doc)
    parsed = json.loads(text)
    assert parsed["result"]["a"][2] == 1 / 3
    assert "0.33333333333333331" in text
    assert "2.0" in text
    keys = list(parsed)
    assert keys == sorted(keys)
    assert parsed["schema_version"]


def test_report_rejects_non_finite():
    with pytest.raises(ValueError):
        dumps_report(report_document("qap", {"x": float("nan")}))


def test_histogram_counts_everything():
    x = np.random.default_rng(0).normal(size=500)
    h = histogram(x)
    assert h["counts"].sum() == 500
    np.testing.assert_allclose(h["edges"], np.histogram_bin_edges(x, bins="fd"))
