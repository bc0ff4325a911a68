"""Chow-Liu maximum-likelihood tree estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dist import DenseJoint, marginalize, mutual_information
from .errors import EmptySampleError, OutOfRangeSymbolError
from .trees import EdgeSet, TreeModel, all_pairs, mwst


@dataclass(frozen=True, eq=False)
class LearnResult:
    structure: EdgeSet
    model: TreeModel
    mi_table: dict
    ties: list


def _check_samples(samples, alphabet):
    x = np.asarray(samples)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptySampleError("samples must be a nonempty (n, d) matrix")
    if not np.issubdtype(x.dtype, np.integer):
        raise OutOfRangeSymbolError("samples must be integer symbols")
    if alphabet is None:
        alphabet = max(int(x.max()) + 1, 2)
    if x.min() < 0 or x.max() >= alphabet:
        raise OutOfRangeSymbolError(f"symbols must lie in 0..{alphabet - 1}")
    return x.astype(np.int64), alphabet


def pairwise_types(samples, alphabet: int | None = None):
    """Empirical node marginals ``(d, k)`` and pairwise tables ``{(i, j): (k, k)}``."""
    x, k = _check_samples(samples, alphabet)
    n, d = x.shape
    nodes = np.stack([np.bincount(x[:, i], minlength=k) / n for i in range(d)])
    pairs = {}
    for i, j in all_pairs(d):
        counts = np.bincount(x[:, i] * k + x[:, j], minlength=k * k)
        pairs[(i, j)] = (counts / n).reshape(k, k)
    return nodes, pairs, k


def structure_from_mi(d: int, mi_table: dict):
    """MWST over mutual-information edge weights; returns ``(EdgeSet, ties)``."""
    return mwst(d, mi_table)


def true_mi_table(joint: DenseJoint) -> dict:
    return {p: mutual_information(marginalize(joint, p)) for p in all_pairs(joint.num_vars)}


def learn(samples, alphabet: int | None = None) -> LearnResult:
    """Chow-Liu estimate: MWST on empirical MI, empirical pairwise parameters."""
    nodes, pairs, k = pairwise_types(samples, alphabet)
    d = nodes.shape[0]
    mi = {p: mutual_information(t) for p, t in pairs.items()}
    structure, ties = structure_from_mi(d, mi)
    model = TreeModel(structure, k, nodes, {e: pairs[e] for e in structure},
                      allow_product=True)
    return LearnResult(structure, model, mi, ties)


def log_likelihood(model: TreeModel, samples) -> float:
    """Sum of log P(x_k) over the rows of ``samples`` (``-inf`` on a zero)."""
    x = np.asarray(samples, dtype=np.int64)
    nodes = model.node_marginals
    cols = np.arange(model.d)
    with np.errstate(divide="ignore"):
        total = np.log(nodes[cols, x]).sum(axis=1)
        for (i, j), t in model.edge_marginals.items():
            total += np.log(t[x[:, i], x[:, j]]) - np.log(nodes[i, x[:, i]]) - np.log(nodes[j, x[:, j]])
    return float(total.sum())
