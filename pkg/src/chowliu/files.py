"""Model and sample file formats.

A model file is JSON::

    {"format": "chowliu-model", "version": 1, "d": 3, "alphabet": 2,
     "kind": "dense", "probs": ["0.125", ...]}

or, for a tree payload, ``"kind": "tree"`` with ``edges`` (list of node
pairs), ``node_marginals`` (d rows of |X| values) and ``edge_marginals``
(one |X| x |X| table per edge, axis 0 the smaller node). Probabilities are
written as 17-significant-digit decimal strings so they round-trip exactly;
plain JSON numbers are accepted on input.

A sample file holds one sample per line, symbols separated by spaces or
commas. Blank lines and lines starting with ``#`` are skipped.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from .dist import DenseJoint
from .errors import ParseError
from .trees import EdgeSet, TreeModel

FORMAT = "chowliu-model"
VERSION = 1

_SEP = re.compile(r"[,\s]+")


def format_prob(x: float) -> str:
    return format(float(x), ".17g")


def _probs(values, where: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in values], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: probabilities must be numbers or decimal strings") from exc


def _nested(values, where: str) -> np.ndarray:
    if isinstance(values, (list, tuple)) and values and isinstance(values[0], (list, tuple)):
        return np.stack([_nested(v, where) for v in values])
    if not isinstance(values, (list, tuple)):
        raise ParseError(f"{where}: expected a list")
    return _probs(values, where)


def model_to_dict(model) -> dict:
    if isinstance(model, DenseJoint):
        return {
            "format": FORMAT, "version": VERSION, "d": model.num_vars,
            "alphabet": model.alphabet, "kind": "dense",
            "probs": [format_prob(p) for p in model.flat()],
        }
    if isinstance(model, TreeModel):
        edges = model.structure.sorted()
        return {
            "format": FORMAT, "version": VERSION, "d": model.d,
            "alphabet": model.alphabet, "kind": "tree",
            "edges": [list(e) for e in edges],
            "node_marginals": [[format_prob(p) for p in row] for row in model.node_marginals],
            "edge_marginals": [
                [[format_prob(p) for p in row] for row in model.edge_marginals[e]] for e in edges
            ],
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_dict(doc, allow_product: bool = False):
    """Build a DenseJoint or TreeModel; structural problems raise ParseError."""
    if not isinstance(doc, dict):
        raise ParseError("model document must be a JSON object")
    if doc.get("format", FORMAT) != FORMAT:
        raise ParseError(f"unknown format {doc.get('format')!r}")
    if doc.get("version", VERSION) != VERSION:
        raise ParseError(f"unsupported version {doc.get('version')!r}")
    try:
        d, k, kind = int(doc["d"]), int(doc["alphabet"]), doc["kind"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"model needs integer d, alphabet and a kind: {exc}") from exc
    if kind == "dense":
        probs = _probs(doc.get("probs", []), "probs")
        return DenseJoint(d, k, probs)
    if kind == "tree":
        try:
            edges = [tuple(int(v) for v in e) for e in doc["edges"]]
            nodes = _nested(doc["node_marginals"], "node_marginals")
            tables = [_nested(t, "edge_marginals") for t in doc["edge_marginals"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"tree payload is incomplete: {exc}") from exc
        if len(tables) != len(edges):
            raise ParseError("edge_marginals must have one table per edge")
        structure = EdgeSet.of(d, edges)
        pairs = {}
        for (a, b), t in zip(edges, tables):
            pairs[(a, b) if a < b else (b, a)] = t if a < b else t.T
        return TreeModel(structure, k, nodes, pairs, allow_product=allow_product)
    raise ParseError(f"unknown model kind {kind!r}")


def dumps_model(model) -> str:
    return json.dumps(model_to_dict(model), indent=1) + "\n"


def loads_model(text: str, allow_product: bool = False):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno) from exc
    return model_from_dict(doc, allow_product)


def read_model(path, allow_product: bool = False):
    return loads_model(Path(path).read_text(), allow_product)


def write_model(model, path) -> None:
    Path(path).write_text(dumps_model(model))


def parse_samples(lines) -> np.ndarray:
    """Integer sample matrix from text lines; malformed rows raise ParseError."""
    rows, width = [], None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = [t for t in _SEP.split(line) if t]
        try:
            row = [int(t) for t in tokens]
        except ValueError:
            raise ParseError(f"non-integer symbol in {line!r}", lineno) from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"expected {width} symbols, found {len(row)}", lineno)
        rows.append(row)
    if not rows:
        raise ParseError("no samples found")
    return np.array(rows, dtype=np.int64)


def read_samples(path) -> np.ndarray:
    with open(path) as fh:
        return parse_samples(fh)


def write_samples(samples, path, sep: str = " ") -> None:
    x = np.asarray(samples)
    with open(path, "w") as fh:
        for row in x:
            fh.write(sep.join(str(int(v)) for v in row) + "\n")
