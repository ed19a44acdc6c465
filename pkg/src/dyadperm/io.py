"""Reading networks from CSV files and writing machine-readable reports.

Matrix CSV
    An ``n x n`` comma-separated grid. An optional header row carries unit
    labels (``id,u1,u2,u3`` or ``u1,u2,u3``) and an optional first column
    carries row labels.

Edge-list CSV
    One ``i,j,weight`` line per dyad, endpoints either 1-based integers or
    labels. Unlisted pairs are zero. Lines starting with ``#`` are ignored,
    as is a header line whose weight field is not a number.

Reports are JSON with sorted keys and every float written with 17
significant digits, so equal inputs give equal bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import fields, is_dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .dyad import DyadMatrix, new_dyad_matrix
from .exceptions import (
    ConflictingDuplicateEdgeError,
    DimensionMismatchError,
    ParseError,
    SelfLoopError,
    UnknownLabelError,
)

SCHEMA_VERSION = "1.0"
EDGE_ATOL = 1e-9


def _float(cell: str):
    try:
        return float(cell)
    except ValueError:
        return None


def _read_rows(path):
    """Non-blank rows with their 1-based line numbers and stripped cells."""
    out = []
    with open(path, newline="", encoding="utf-8-sig") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row]
            if not cells or all(c == "" for c in cells):
                continue
            out.append((lineno, cells))
    return out


def parse_matrix_csv(path) -> DyadMatrix:
    """Read a matrix CSV into a validated :class:`DyadMatrix`.

    Raises :class:`ParseError` with ``line`` and ``column`` (1-based) for
    ragged rows, empty or non-numeric cells and inconsistent labels.
    """
    rows = _read_rows(path)
    if not rows:
        raise ParseError(f"{path}: empty file", line=1)
    header = None
    top = rows[0][1]
    if all(_float(c) is None for c in (top[1:] or top)):
        header = rows[0]
        rows = rows[1:]
    if not rows:
        raise ParseError(f"{path}: header but no data rows", line=header[0] + 1)
    n = len(rows)
    first = rows[0][1]
    has_label_col = _float(first[0]) is None or (
        len(first) == n + 1 and (header is None or len(header[1]) == n + 1)
    )
    width = n + 1 if has_label_col else n
    values = np.empty((n, n))
    row_labels = []
    for i, (lineno, cells) in enumerate(rows):
        if len(cells) != width:
            raise ParseError(
                f"{path}: row {i + 1} has {len(cells)} fields, expected {width}",
                line=lineno, column=min(len(cells), width) + 1,
            )
        if has_label_col:
            row_labels.append(cells[0])
            cells = cells[1:]
        for j, c in enumerate(cells):
            v = _float(c)
            if v is None:
                col = j + 1 + int(has_label_col)
                raise ParseError(f"{path}: cannot read {c!r} as a number", line=lineno, column=col)
            values[i, j] = v
    labels = None
    if header is not None:
        h = header[1]
        if len(h) == n + 1:
            h = h[1:]
        if len(h) != n:
            raise ParseError(f"{path}: header has {len(header[1])} fields for {n} units", line=header[0])
        labels = tuple(h)
    if has_label_col:
        if labels is not None and tuple(row_labels) != labels:
            k = next(k for k, (x, y) in enumerate(zip(row_labels, labels)) if x != y)
            raise ParseError(
                f"{path}: row label {row_labels[k]!r} does not match header label {labels[k]!r}",
                line=rows[k][0], column=1,
            )
        labels = tuple(row_labels)
    return new_dyad_matrix(values, labels)


def parse_edge_list(path, n_declared=None, labels=None) -> DyadMatrix:
    """Read an edge list into a symmetric :class:`DyadMatrix`.

    Endpoints are 1-based indices when every endpoint is an integer and no
    ``labels`` are given; otherwise they are labels, numbered in order of
    first appearance unless ``labels`` fixes the order. A missing weight
    means 1. Repeated pairs, in either orientation, must agree within
    ``1e-9``.
    """
    rows = [(ln, c) for ln, c in _read_rows(path) if not c[0].startswith("#")]
    if rows and len(rows[0][1]) >= 3 and _float(rows[0][1][2]) is None:
        rows = rows[1:]
    for lineno, cells in rows:
        if len(cells) not in (2, 3):
            raise ParseError(
                f"{path}: expected 'i,j,weight', got {len(cells)} fields",
                line=lineno, column=min(len(cells), 3) + 1,
            )
    if labels is not None:
        labels = tuple(str(x) for x in labels)
        if n_declared is not None and n_declared != len(labels):
            raise DimensionMismatchError(f"{len(labels)} labels but n={n_declared}")
        index = {lab: k for k, lab in enumerate(labels)}
        numeric = False
    else:
        numeric = all(
            _is_int(c) for _, cells in rows for c in cells[:2]
        )
        index = {}
    if numeric:
        n = n_declared if n_declared is not None else max(
            (int(c) for _, cells in rows for c in cells[:2]), default=0
        )
    entries = []
    for lineno, cells in rows:
        ends = []
        for col, c in enumerate(cells[:2], start=1):
            if numeric:
                k = int(c) - 1
                if not 0 <= k < n:
                    raise UnknownLabelError(f"{path}: unit {c} outside 1..{n}", line=lineno, column=col)
            elif labels is not None:
                if c not in index:
                    raise UnknownLabelError(f"{path}: unknown unit label {c!r}", line=lineno, column=col)
                k = index[c]
            else:
                k = index.setdefault(c, len(index))
            ends.append(k)
        if len(cells) == 3:
            w = _float(cells[2])
            if w is None or not math.isfinite(w):
                raise ParseError(f"{path}: bad weight {cells[2]!r}", line=lineno, column=3)
        else:
            w = 1.0
        entries.append((lineno, ends[0], ends[1], w))
    if not numeric and labels is None:
        labels = tuple(index)
        if n_declared is not None:
            if n_declared < len(labels):
                raise UnknownLabelError(f"{path}: {len(labels)} distinct units but n={n_declared}")
            labels = labels + tuple(f"unit{k + 1}" for k in range(len(labels), n_declared))
    if not numeric:
        n = len(labels)
    values = np.zeros((n, n))
    seen = {}
    for lineno, i, j, w in entries:
        if i == j:
            if w != 0.0:
                raise SelfLoopError(f"{path}: self-loop on unit {i + 1} with weight {w!r}", line=lineno)
            continue
        key = (min(i, j), max(i, j))
        if key in seen:
            prev_w, prev_line = seen[key]
            if abs(prev_w - w) > EDGE_ATOL * max(1.0, abs(prev_w), abs(w)):
                raise ConflictingDuplicateEdgeError(
                    f"{path}: weight {w!r} for pair {key[0] + 1},{key[1] + 1} conflicts with "
                    f"{prev_w!r} on line {prev_line}",
                    line=lineno,
                )
            continue
        seen[key] = (w, lineno)
        values[i, j] = values[j, i] = w
    return new_dyad_matrix(values, labels)


def _is_int(cell: str) -> bool:
    try:
        int(cell)
    except ValueError:
        return False
    return True


def write_matrix_csv(m, path) -> None:
    """Write a matrix CSV that :func:`parse_matrix_csv` reads back exactly."""
    m = new_dyad_matrix(m)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if m.labels is not None:
            w.writerow(("id",) + m.labels)
        for i, row in enumerate(m.values):
            cells = [repr(float(x)) for x in row]
            w.writerow(([m.labels[i]] if m.labels is not None else []) + cells)


def read_network(path, fmt: str = "matrix", n_declared=None, labels=None) -> DyadMatrix:
    if fmt == "matrix":
        return parse_matrix_csv(path)
    if fmt == "edges":
        return parse_edge_list(path, n_declared, labels)
    raise ValueError(f"unknown network format {fmt!r}")


def align_to(reference: DyadMatrix, m: DyadMatrix, name: str = "matrix") -> DyadMatrix:
    """Reorder ``m``'s units to match ``reference``'s labels when both are labelled."""
    if m.n != reference.n:
        raise DimensionMismatchError(f"{name} has n={m.n}, expected {reference.n}")
    if reference.labels is None or m.labels is None or m.labels == reference.labels:
        return m
    pos = {lab: k for k, lab in enumerate(m.labels)}
    missing = [lab for lab in reference.labels if lab not in pos]
    if missing or len(pos) != m.n:
        raise DimensionMismatchError(f"{name} labels do not match the outcome's labels")
    order = np.array([pos[lab] for lab in reference.labels])
    return new_dyad_matrix(m.values[np.ix_(order, order)], reference.labels)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def input_record(path) -> dict:
    return {"path": str(path), "sha256": file_digest(path), "name": Path(path).stem}


def histogram(values) -> dict:
    """Freedman-Diaconis binning of ``values``."""
    x = np.asarray(values, dtype=float)
    edges = np.histogram_bin_edges(x, bins="fd")
    counts, _ = np.histogram(x, bins=edges)
    return {"rule": "freedman-diaconis", "edges": edges, "counts": counts}


def to_plain(obj):
    """Convert results (dataclasses, arrays, enums) into JSON-ready values."""
    if isinstance(obj, Enum):
        return obj.value
    if is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _format_float(x: float, where: str) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x!r} at {where}")
    s = format(x, ".17g")
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def _emit(obj, indent: int, where: str) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _format_float(obj, where)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{pad}{json.dumps(k, ensure_ascii=False)}: {_emit(obj[k], indent + 1, f'{where}.{k}')}"
            for k in sorted(obj)
        ]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_emit(v, indent, f"{where}[{k}]") for k, v in enumerate(obj)) + "]"
        items = [f"{pad}{_emit(v, indent + 1, f'{where}[{k}]')}" for k, v in enumerate(obj)]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__} at {where}")


def dumps_report(doc) -> str:
    """Serialize a report: sorted keys, 17 significant digits, finite numbers only."""
    return _emit(to_plain(doc), 0, "$") + "\n"


def report_document(command: str, result, inputs=None, histogram_of=None, timing=None) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "inputs": inputs or {},
        "result": to_plain(result),
    }
    if histogram_of is not None:
        doc["histogram"] = histogram(histogram_of)
    if timing is not None:
        doc["timing"] = timing
    return doc
