"""Discrete probability tables and information-theoretic primitives.

All quantities are in nats. Symbols are ``0..alphabet-1``. Tables are stored
as numpy arrays with one axis per variable (row-major over variable index
when flattened).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    EmptySampleError,
    InvalidIndexError,
    OutOfRangeSymbolError,
    SupportViolationError,
    TooLargeError,
    ValidationError,
    ZeroMarginalError,
)

NORM_TOL = 1e-12
RENORM_TOL = 1e-9
DENSE_BUDGET = 2**24


def _checked_table(probs, num_vars: int, alphabet: int) -> np.ndarray:
    arr = np.array(probs, dtype=float)
    shape = (alphabet,) * num_vars
    if arr.size != alphabet**num_vars:
        raise ValidationError(
            f"expected {alphabet**num_vars} cells for {num_vars} vars over "
            f"{alphabet} symbols, got {arr.size}"
        )
    arr = arr.reshape(shape)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValidationError("probabilities must be finite and nonnegative")
    total = arr.sum()
    if abs(total - 1.0) > RENORM_TOL:
        raise ValidationError(f"probabilities sum to {total!r}, not 1")
    if abs(total - 1.0) > NORM_TOL:
        arr = arr / total
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DenseJoint:
    """Explicit joint table over ``alphabet**num_vars`` outcomes."""

    num_vars: int
    alphabet: int
    probs: np.ndarray

    def __post_init__(self):
        if self.num_vars < 1:
            raise ValidationError("num_vars must be positive")
        if self.alphabet < 2:
            raise ValidationError("alphabet size must be at least 2")
        if self.alphabet**self.num_vars > DENSE_BUDGET:
            raise TooLargeError(
                f"{self.alphabet}^{self.num_vars} cells exceeds the dense budget"
            )
        object.__setattr__(
            self, "probs", _checked_table(self.probs, self.num_vars, self.alphabet)
        )

    @classmethod
    def from_array(cls, probs) -> "DenseJoint":
        arr = np.asarray(probs, dtype=float)
        return cls(arr.ndim, arr.shape[0], arr)

    @property
    def strictly_positive(self) -> bool:
        return bool(np.all(self.probs > 0))

    def flat(self) -> np.ndarray:
        return self.probs.reshape(-1)


@dataclass(frozen=True, eq=False)
class PairJoint:
    """Marginal of a joint on the nodes of a node-pair pair ``(edge, nonedge)``.

    ``vars`` lists the 3 or 4 distinct nodes in axis order. ``edge`` and
    ``nonedge`` are node pairs drawn from ``vars``.
    """

    vars: tuple
    probs: np.ndarray
    edge: tuple
    nonedge: tuple

    def __post_init__(self):
        vars_ = tuple(int(v) for v in self.vars)
        if len(vars_) not in (3, 4) or len(set(vars_)) != len(vars_):
            raise ValidationError("a pair joint spans 3 or 4 distinct nodes")
        edge, nonedge = _pair(self.edge), _pair(self.nonedge)
        if edge == nonedge:
            raise ValidationError("edge and nonedge must differ")
        if set(edge) | set(nonedge) != set(vars_):
            raise ValidationError("vars must be exactly the nodes of edge and nonedge")
        arr = np.asarray(self.probs, dtype=float)
        if arr.ndim != len(vars_) or len(set(arr.shape)) != 1:
            raise ValidationError("probs must have one equal-length axis per var")
        object.__setattr__(self, "vars", vars_)
        object.__setattr__(self, "edge", edge)
        object.__setattr__(self, "nonedge", nonedge)
        object.__setattr__(self, "probs", _checked_table(arr, arr.ndim, arr.shape[0]))

    @property
    def share_flag(self) -> bool:
        return len(self.vars) == 3

    @property
    def alphabet(self) -> int:
        return self.probs.shape[0]

    def axes(self, pair) -> tuple:
        a, b = _pair(pair)
        return self.vars.index(a), self.vars.index(b)

    def pair_marginal(self, pair) -> np.ndarray:
        """Pairwise marginal on ``pair`` with axis 0 the smaller node."""
        return _marginal_array(self.probs, self.axes(pair))

    @classmethod
    def from_dense(cls, joint: DenseJoint, edge, nonedge) -> "PairJoint":
        edge, nonedge = _pair(edge), _pair(nonedge)
        vars_ = tuple(sorted(set(edge) | set(nonedge)))
        sub = marginalize(joint, vars_)
        return cls(vars_, sub.probs, edge, nonedge)


@dataclass(frozen=True, eq=False)
class EmpiricalCounts:
    num_vars: int
    alphabet: int
    counts: np.ndarray
    n: int = field(default=0)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64).reshape(
            (self.alphabet,) * self.num_vars
        )
        if np.any(counts < 0):
            raise ValidationError("counts must be nonnegative")
        total = int(counts.sum())
        if self.n and self.n != total:
            raise ValidationError("counts do not sum to n")
        if total == 0:
            raise EmptySampleError("no samples")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "n", total)

    def joint(self) -> DenseJoint:
        return DenseJoint(self.num_vars, self.alphabet, self.counts / self.n)


def _pair(pair) -> tuple:
    a, b = (int(x) for x in pair)
    if a == b:
        raise InvalidIndexError(f"degenerate node pair ({a}, {b})")
    return (a, b) if a < b else (b, a)


def _marginal_array(probs: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    keep = list(keep)
    drop = tuple(i for i in range(probs.ndim) if i not in keep)
    out = probs.sum(axis=drop) if drop else probs
    # after summing, remaining axes are in increasing order
    order = sorted(keep)
    return np.transpose(out, [order.index(k) for k in keep])


def marginalize(joint: DenseJoint, keep: Sequence[int]) -> DenseJoint:
    """Sum out every variable not in ``keep``; result axes follow ``keep``."""
    keep = [int(k) for k in keep]
    if not keep:
        raise InvalidIndexError("keep must be nonempty")
    if len(set(keep)) != len(keep):
        raise InvalidIndexError("keep indices must be distinct")
    if any(k < 0 or k >= joint.num_vars for k in keep):
        raise InvalidIndexError(f"index out of range for {joint.num_vars} vars")
    return DenseJoint(len(keep), joint.alphabet, _marginal_array(joint.probs, keep))


def _xlogx_ratio(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def entropy(joint) -> float:
    p = _as_array(joint).reshape(-1)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def mutual_information(pair) -> float:
    """I(X;Y) of a two-variable joint, with the 0 log 0 = 0 convention."""
    p = _as_array(pair)
    if p.ndim != 2:
        raise ValidationError("mutual information needs a 2-variable joint")
    prod = np.outer(p.sum(axis=1), p.sum(axis=0))
    # rounding can push tiny values below zero for product tables
    return max(_xlogx_ratio(p, prod), 0.0)


def kl_divergence(q, p) -> float:
    """D(q || p). Raises when q puts mass where p has none."""
    qa, pa = _as_array(q), _as_array(p)
    if qa.shape != pa.shape:
        raise ValidationError("kl_divergence needs tables of equal shape")
    if np.any((qa > 0) & (pa <= 0)):
        raise SupportViolationError("q is not absolutely continuous w.r.t. p")
    return max(_xlogx_ratio(qa, pa), 0.0)


def density_table(pair_table: np.ndarray) -> np.ndarray:
    """log P(a,b) / (P(a) P(b)) on a 2-D table (the information density)."""
    a = pair_table.sum(axis=1, keepdims=True)
    b = pair_table.sum(axis=0, keepdims=True)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ZeroMarginalError("information density needs positive marginals")
    if np.any(pair_table <= 0):
        raise ZeroMarginalError("information density needs a positive pair table")
    return np.log(pair_table / (a * b))


def information_density(pair_joint: PairJoint, which="edge") -> np.ndarray:
    """s_e evaluated at every outcome of ``pair_joint``.

    ``which`` is ``"edge"``, ``"nonedge"`` or an explicit node pair. The result
    has the shape of ``pair_joint.probs``.
    """
    if isinstance(which, str):
        if which not in ("edge", "nonedge"):
            raise ValidationError(f"unknown selector {which!r}")
        pair = getattr(pair_joint, which)
    else:
        pair = _pair(which)
    ax = pair_joint.axes(pair)
    s = density_table(_marginal_array(pair_joint.probs, ax))
    idx = np.indices(pair_joint.probs.shape)
    return s[idx[ax[0]], idx[ax[1]]]


def empirical_distribution(samples, alphabet: int | None = None) -> EmpiricalCounts:
    """Type (normalized histogram) of a ``(n, d)`` integer sample matrix."""
    x = np.asarray(samples)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptySampleError("samples must be a nonempty (n, d) matrix")
    if not np.issubdtype(x.dtype, np.integer):
        raise OutOfRangeSymbolError("samples must be integer symbols")
    if alphabet is None:
        alphabet = max(int(x.max()) + 1, 2)
    if x.min() < 0 or x.max() >= alphabet:
        raise OutOfRangeSymbolError(f"symbols must lie in 0..{alphabet - 1}")
    n, d = x.shape
    codes = np.ravel_multi_index(tuple(x.T), (alphabet,) * d)
    counts = np.bincount(codes, minlength=alphabet**d)
    return EmpiricalCounts(d, alphabet, counts, n)


def _as_array(obj) -> np.ndarray:
    if isinstance(obj, (DenseJoint, PairJoint)):
        return obj.probs
    return np.asarray(obj, dtype=float)
