"""Monte Carlo estimates of the structure-learning error probability.

Every run r draws its samples from its own PCG64 stream seeded with
``mix_seed(seed, r)``, so the result does not depend on how runs are split
into blocks or spread over worker processes. Within a block the samples,
pairwise tables and mutual informations are computed with array operations.
"""

from __future__ import annotations

import logging
import math
import warnings
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dist import DenseJoint, PairJoint, mutual_information
from .errors import ValidationError
from .exponent import optimal_projections
from .trees import (
    EdgeSet,
    TreeModel,
    _bfs_edges,
    all_pairs,
    ancestral_fill,
    enumerate_spanning_trees,
    mix_seed,
    mwst,
)

log = logging.getLogger(__name__)

DEFAULT_RUNS = 100_000
RUNS_WARN = 10_000_000
ENUM_MAX_D = 6  # above this, each run goes through Kruskal
MARGIN = 1e-9  # score gap below which the enumeration shortcut defers to Kruskal
BLOCK_CELLS = 1 << 22


# -- model constructors ------------------------------------------------------


def star4(gamma: float) -> TreeModel:
    """Four-node star centred on node 0 with P(x0=0) = 1/3.

    Each leaf copies the centre's bias: P(xi=0 | x0=0) = 1/2 + gamma and
    P(xi=0 | x0=1) = 1/2 - gamma.
    """
    if not 0 < gamma < 0.5:
        raise ValidationError(f"gamma must lie in (0, 1/2), got {gamma}")
    cond = np.array([[0.5 + gamma, 0.5 - gamma], [0.5 - gamma, 0.5 + gamma]])
    structure = EdgeSet.of(4, [(0, 1), (0, 2), (0, 3)])
    conds = {(0, i): cond for i in (1, 2, 3)}
    return TreeModel.from_conditionals(structure, [1 / 3, 2 / 3], conds)


def symmetric_star(d: int, q_ab: PairJoint, tol: float = 1e-10) -> TreeModel:
    """Star on ``d`` nodes whose edges all look like Q_a and non-edges like Q_b.

    Q_a is the edge marginal of ``q_ab`` (the node of the edge that is not in
    the non-edge, or else its smaller node, is the centre) and Q_b the
    non-edge marginal, which must be the leaf-leaf joint the star implies.
    """
    if d < 3:
        raise ValidationError("a star with a non-edge needs d >= 3")
    qa = q_ab.pair_marginal(q_ab.edge)
    qb = q_ab.pair_marginal(q_ab.nonedge)
    ia, ib = mutual_information(qa), mutual_information(qb)
    if not ia > ib > 0:
        raise ValidationError(f"need I(Q_a) > I(Q_b) > 0, got {ia:.6g} and {ib:.6g}")
    centre = next((v for v in q_ab.edge if v not in q_ab.nonedge), q_ab.edge[0])
    if centre != q_ab.edge[0]:
        qa = qa.T
    pc = qa.sum(axis=1)
    cond = qa / pc[:, None]
    implied = np.einsum("c,cx,cy->xy", pc, cond, cond)
    if np.max(np.abs(implied - qb)) > tol:
        raise ValidationError("Q_b is not the leaf-leaf joint implied by Q_a")
    leaf = qa.sum(axis=0)
    if np.max(np.abs(qb.sum(axis=1) - leaf)) > tol or np.max(np.abs(qb - qb.T)) > tol:
        raise ValidationError("Q_a and Q_b have inconsistent leaf marginals")
    structure = EdgeSet.of(d, [(0, i) for i in range(1, d)])
    return TreeModel.from_conditionals(structure, pc, {(0, i): cond for i in range(1, d)})


def example2_random_tree(structure: EdgeSet, seed: int) -> TreeModel:
    """Binary tree model with every Bernoulli parameter drawn from U[0, 1].

    The root is node 0; conditionals are drawn in breadth-first edge order.
    """
    rng = np.random.Generator(np.random.PCG64(mix_seed(seed, 0)))
    p0 = rng.random()
    conds = {}
    for parent, child in _bfs_edges(structure, 0):
        a, b = rng.random(2)
        conds[(parent, child)] = np.array([[a, 1 - a], [b, 1 - b]])
    return TreeModel.from_conditionals(structure, [p0, 1 - p0], conds)


def table1_distribution(xi: float, kappa: float) -> DenseJoint:
    """Three binary variables whose optimal tree projection is not unique."""
    if not 0 < xi < 1 / 3:
        raise ValidationError(f"xi must lie in (0, 1/3), got {xi}")
    if not 0 < kappa < 0.5:
        raise ValidationError(f"kappa must lie in (0, 1/2), got {kappa}")
    a = (0.5 - xi) * (0.5 - kappa)
    b = (0.5 + xi) * (0.5 - kappa)
    c = (1 / 3 + xi) * kappa
    f = (2 / 3 - xi) * kappa
    # rows x1 x2 x3 = 000, 001, ..., 111
    return DenseJoint(3, 2, [a, b, c, f, f, c, a, b])


# -- Monte Carlo -------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    n: int
    runs: int = DEFAULT_RUNS
    seed: int = 0
    workers: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n must be at least 1")
        if self.runs < 1:
            raise ValidationError("runs must be at least 1")
        if self.runs > RUNS_WARN:
            warnings.warn(f"{self.runs} runs exceeds the desk-scale cap of {RUNS_WARN}",
                          RuntimeWarning, stacklevel=3)


@dataclass(frozen=True, eq=False)
class SimResult:
    n: int
    runs: int
    errors: int
    displaced: dict = field(default_factory=dict)  # edges differing from truth -> runs
    error_structures: dict = field(default_factory=dict)  # sorted edge tuple -> runs

    @property
    def p_hat(self) -> float:
        return self.errors / self.runs

    @property
    def insufficient_runs(self) -> bool:
        """No error was observed, so the rate estimate is unbounded."""
        return self.errors == 0

    @property
    def simulated_rate(self) -> float:
        if self.errors == 0:
            return math.inf
        return -math.log(self.p_hat) / self.n

    @property
    def std_error(self) -> float:
        p = self.p_hat
        return math.sqrt(p * (1 - p) / self.runs)

    @property
    def modal_displacement(self) -> int | None:
        if not self.displaced:
            return None
        return max(self.displaced.items(), key=lambda kv: (kv[1], -kv[0]))[0]

    def __eq__(self, other):
        if not isinstance(other, SimResult):
            return NotImplemented
        return (self.n, self.runs, self.errors, self.displaced, self.error_structures) == (
            other.n, other.runs, other.errors, other.displaced, other.error_structures)


class _Plan:
    """Everything a worker needs to evaluate a block of runs."""

    def __init__(self, model: TreeModel, truth: list, cfg: SimConfig):
        self.model = model
        self.n, self.seed = cfg.n, cfg.seed
        self.d, self.k = model.d, model.alphabet
        self.pairs = all_pairs(self.d)
        self.truth = [frozenset(s.edges) for s in truth]
        self.trees = None
        if self.d <= ENUM_MAX_D:
            self.trees = list(enumerate_spanning_trees(self.d))
            index = {p: j for j, p in enumerate(self.pairs)}
            self.incidence = np.zeros((len(self.trees), len(self.pairs)))
            for t, tree in enumerate(self.trees):
                for e in tree.edges:
                    self.incidence[t, index[e]] = 1.0
        per_run = self.n * self.d
        self.block = max(1, min(4096, BLOCK_CELLS // per_run))

    def uniforms(self, start: int, stop: int) -> np.ndarray:
        u = np.empty((stop - start, self.n, self.d))
        for i, r in enumerate(range(start, stop)):
            rng = np.random.Generator(np.random.PCG64(mix_seed(self.seed, r)))
            u[i] = rng.random((self.n, self.d))
        return u

    def mi_weights(self, x: np.ndarray) -> np.ndarray:
        """Empirical MI of every node pair for every run; shape ``(runs, pairs)``."""
        runs, n, d = x.shape
        k = self.k
        w = np.empty((runs, len(self.pairs)))
        offs = (np.arange(runs) * k * k)[:, None]
        xi = x.astype(np.int64)
        for j, (a, b) in enumerate(self.pairs):
            codes = (xi[:, :, a] * k + xi[:, :, b]) + offs
            t = np.bincount(codes.ravel(), minlength=runs * k * k).reshape(runs, k, k) / n
            pa = t.sum(axis=2, keepdims=True)
            pb = t.sum(axis=1, keepdims=True)
            with np.errstate(divide="ignore", invalid="ignore"):
                terms = np.where(t > 0, t * np.log(t / (pa * pb)), 0.0)
            w[:, j] = np.maximum(terms.sum(axis=(1, 2)), 0.0)
        return w

    def learned(self, weights: np.ndarray) -> list:
        """Learned edge sets (as frozensets) for each row of ``weights``."""
        out = [None] * len(weights)
        slow = range(len(weights))
        if self.trees is not None:
            scores = weights @ self.incidence.T
            top = np.argmax(scores, axis=1)
            part = np.partition(scores, -2, axis=1)[:, -2:] if scores.shape[1] > 1 else None
            clear = np.ones(len(weights), bool) if part is None else part[:, 1] - part[:, 0] > MARGIN
            for i in np.flatnonzero(clear):
                out[i] = self.trees[top[i]].edges
            slow = np.flatnonzero(~clear)
        for i in slow:
            tree, _ = mwst(self.d, dict(zip(self.pairs, weights[i])))
            out[i] = tree.edges
        return out

    def run_block(self, bounds) -> tuple:
        start, stop = bounds
        u = self.uniforms(start, stop)
        if isinstance(self.model, _DenseSampler):
            x = self.model.fill(u)
        else:
            x = ancestral_fill(self.model, u)
        learned = self.learned(self.mi_weights(x))
        errors = 0
        displaced, structures = Counter(), Counter()
        for edges in learned:
            if edges in self.truth:
                continue
            errors += 1
            displaced[min(len(edges - t) for t in self.truth)] += 1
            structures[tuple(sorted(edges))] += 1
        return errors, displaced, structures


def _blocks(runs: int, size: int) -> list:
    return [(s, min(s + size, runs)) for s in range(0, runs, size)]


def _simulate(model: TreeModel, truth: list, cfg: SimConfig) -> SimResult:
    plan = _Plan(model, truth, cfg)
    blocks = _blocks(cfg.runs, plan.block)
    if cfg.workers and cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(plan.run_block, blocks))
    else:
        parts = [plan.run_block(b) for b in blocks]
    errors = sum(p[0] for p in parts)
    displaced, structures = Counter(), Counter()
    for _, dis, st in parts:
        displaced.update(dis)
        structures.update(st)
    log.debug("n=%d: %d errors in %d runs", cfg.n, errors, cfg.runs)
    return SimResult(cfg.n, cfg.runs, errors, dict(sorted(displaced.items())),
                     dict(sorted(structures.items())))


def estimate_error_probability(model: TreeModel, cfg: SimConfig) -> SimResult:
    """Fraction of runs in which Chow-Liu on ``cfg.n`` samples misses the true tree."""
    return _simulate(model, [model.structure], cfg)


def estimate_generalized_error_probability(dense: DenseJoint, cfg: SimConfig,
                                           projections=None) -> SimResult:
    """As :func:`estimate_error_probability`, counting any optimal projection as correct.

    When ``dense`` is itself a tree distribution it is sampled through its
    tree factorization, exactly as the tree-model estimator would; otherwise
    each sample picks a cell of the joint table by inversion.
    """
    proj = projections or optimal_projections(dense)
    if len(proj.structures) == 1 and proj.pi_star <= 1e-12:
        model = proj.models[0]
    else:
        model = _DenseSampler(dense)
    return _simulate(model, list(proj.structures), cfg)


class _DenseSampler:
    """Duck-typed stand-in for a TreeModel that samples from a dense table."""

    def __init__(self, dense: DenseJoint):
        self.dense = dense
        self.d = dense.num_vars
        self.alphabet = dense.alphabet
        self.cdf = np.cumsum(dense.flat())

    def fill(self, uniforms: np.ndarray) -> np.ndarray:
        # one uniform per sample picks the joint cell; the remaining columns are unused
        cells = np.searchsorted(self.cdf, uniforms[..., 0] * self.cdf[-1], side="right")
        cells = np.minimum(cells, self.cdf.size - 1)
        digits = np.unravel_index(cells, (self.alphabet,) * self.d)
        return np.stack(digits, axis=-1).astype(np.int8)
