"""Reading and writing the on-disk formats.

* dissimilarities: CSV rows ``i,j,d[,w]``; a header is recognised by a
  non-numeric first token.
* dense matrices: CSV with ``n`` rows of ``n`` values.
* points: CSV rows ``x,y[,z]`` with an optional trailing integer ``label``
  column when written with labels.
* tie-count graphs: CSV rows ``relation,i,j,count``.
* results: JSON with ``n, p, q, coords, projections, stress, trace``.
* traces: CSV ``iteration,total_stress,grad_norm,lr_X,lr_Q,step_norm``.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import (
    DissimilarityData,
    Embedding,
    MPSEError,
    ProjectionStack,
    RunResult,
    TraceRecord,
    complete_from_matrix,
)
from .datasets import LabeledPoints2D, MultiRelationGraph


def _is_number(token):
    try:
        float(token)
    except ValueError:
        return False
    return True


def _rows(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(t.strip() for t in r)]
    if rows and not _is_number(rows[0][0].strip()):
        rows = rows[1:]
    return rows


def _fmt(x):
    return repr(float(x))


def read_dissimilarity(path, n=None):
    """Read a pair list; ``n`` defaults to one more than the largest index."""
    edges = []
    for lineno, row in enumerate(_rows(path), 1):
        if len(row) not in (3, 4):
            raise MPSEError(f"{path}: row {lineno} has {len(row)} fields, expected 3 or 4")
        edges.append((int(row[0]), int(row[1]), *map(float, row[2:])))
    if n is None:
        n = 1 + max((max(e[0], e[1]) for e in edges), default=-1)
    return DissimilarityData.from_edges(n, edges)


def write_dissimilarity(data, path, weights=None):
    """Write a pair list; the weight column is included unless all weights are 1."""
    if weights is None:
        weights = not np.all(data.weight == 1.0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "d", "w"] if weights else ["i", "j", "d"])
        for i, j, d, wt in zip(data.rows, data.cols, data.dist, data.weight):
            row = [int(i), int(j), _fmt(d)]
            if weights:
                row.append(_fmt(wt))
            w.writerow(row)


def read_matrix(path):
    """Read a dense ``n x n`` matrix file as complete dissimilarity data."""
    M = np.array([[float(t) for t in row] for row in _rows(path)])
    return complete_from_matrix(M)


def load_relation(path):
    """Read a relation in either format.

    A file is taken as a dense matrix when it is square and has more than
    four columns, or when its header row does not start with ``i``.
    """
    with open(path, newline="") as fh:
        first = next(csv.reader(fh), [])
    header = bool(first) and not _is_number(first[0].strip())
    rows = _rows(path)
    if header:
        dense = first[0].strip() != "i"
    else:
        dense = bool(rows) and len(rows) == len(rows[0]) and len(rows[0]) > 4
    return read_matrix(path) if dense else read_dissimilarity(path)


def read_points(path):
    """Read a points CSV; a column headed ``label`` becomes the labels."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    header = None
    if rows and not _is_number(rows[0][0].strip()):
        header, rows = [t.strip() for t in rows[0]], rows[1:]
    arr = np.array([[float(t) for t in r] for r in rows])
    if header is not None and "label" in header:
        col = header.index("label")
        coords = np.delete(arr, col, axis=1)
        return LabeledPoints2D(coords, arr[:, col].astype(int))
    return LabeledPoints2D(arr)


def write_points(points, path, labels=None):
    X = points.coords if hasattr(points, "coords") else np.asarray(points)
    if labels is None:
        labels = getattr(points, "labels", None)
    header = ["x", "y", "z"][: X.shape[1]]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header + (["label"] if labels is not None else []))
        for k, row in enumerate(X):
            out = [_fmt(v) for v in row]
            if labels is not None:
                out.append(int(labels[k]))
            w.writerow(out)


def read_graph(path, n=None):
    """Read ``relation,i,j,count`` rows into a :class:`MultiRelationGraph`."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    # the first field is a name, so a header is recognised by its text
    if rows and rows[0][0].strip() == "relation":
        rows = rows[1:]
    relations = {}
    max_index = -1
    for lineno, row in enumerate(rows, 1):
        if len(row) != 4:
            raise MPSEError(f"{path}: row {lineno} is not relation,i,j,count")
        name, i, j, cnt = row[0].strip(), int(row[1]), int(row[2]), float(row[3])
        relations.setdefault(name, []).append((i, j, cnt))
        max_index = max(max_index, i, j)
    return MultiRelationGraph(max_index + 1 if n is None else n, relations)


def write_graph(graph, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["relation", "i", "j", "count"])
        for name, ties in graph.relations.items():
            for i, j, cnt in ties:
                w.writerow([name, int(i), int(j), int(cnt) if float(cnt).is_integer() else cnt])


def write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_result(result, path):
    write_json(result.to_dict(), path)


def read_result(path):
    return RunResult.from_dict(read_json(path))


def read_embedding(path):
    obj = read_json(path)
    if isinstance(obj, list):
        return Embedding(np.asarray(obj, dtype=float))
    return Embedding.from_dict(obj)


def read_projections(path):
    obj = read_json(path)
    if isinstance(obj, dict):
        obj = obj["projections"]
    return ProjectionStack.from_list(obj)


def write_projections(P, path):
    write_json(P.to_list(), path)


def write_trace(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TraceRecord.FIELDS)
        for rec in trace:
            w.writerow([rec.iteration] + [_fmt(v) for v in rec.as_row()[1:]])


def read_trace(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    return [TraceRecord(int(r[0]), *map(float, r[1:])) for r in rows]


def ensure_dir(path):
    Path(path).mkdir(parents=True, exist_ok=True)
    return Path(path)
