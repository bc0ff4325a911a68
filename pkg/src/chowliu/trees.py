"""Spanning-tree combinatorics and tree-factorized distributions."""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .dist import DENSE_BUDGET, DenseJoint, _pair, marginalize
from .errors import (
    CyclicInputError,
    DisconnectedInputError,
    InvalidIndexError,
    OutOfRangeSymbolError,
    TooLargeError,
    ValidationError,
)

TIE_TOL = 1e-12
MARGINAL_TOL = 1e-10
MAX_ENUM_NODES = 8

_MASK64 = (1 << 64) - 1


def mix_seed(seed: int, index: int) -> int:
    """SplitMix64 finalizer applied to ``seed`` and ``index``.

    Gives every run its own stream regardless of how runs are spread
    over workers.
    """
    z = (int(seed) * 0x9E3779B97F4A7C15 + int(index) + 1) & _MASK64
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class EdgeSet:
    """Undirected edges on nodes ``0..d-1``; pairs are stored as ``(min, max)``."""

    d: int
    edges: frozenset

    def __post_init__(self):
        norm = set()
        for e in self.edges:
            a, b = _pair(e)
            if not (0 <= a < self.d and 0 <= b < self.d):
                raise InvalidIndexError(f"edge ({a}, {b}) outside 0..{self.d - 1}")
            norm.add((a, b))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def of(cls, d: int, edges) -> "EdgeSet":
        return cls(d, frozenset(tuple(e) for e in edges))

    def __iter__(self):
        return iter(sorted(self.edges))

    def __len__(self):
        return len(self.edges)

    def __contains__(self, pair) -> bool:
        return _pair(pair) in self.edges

    def sorted(self) -> list:
        return sorted(self.edges)

    def nonedges(self) -> list:
        return [p for p in itertools.combinations(range(self.d), 2) if p not in self.edges]

    def swap(self, remove, add) -> "EdgeSet":
        return EdgeSet(self.d, (self.edges - {_pair(remove)}) | {_pair(add)})

    def adjacency(self) -> list:
        adj = [[] for _ in range(self.d)]
        for a, b in sorted(self.edges):
            adj[a].append(b)
            adj[b].append(a)
        return adj

    def is_acyclic(self) -> bool:
        uf = _UnionFind(self.d)
        return all(uf.union(a, b) for a, b in self.edges)

    def is_spanning_tree(self) -> bool:
        return len(self.edges) == self.d - 1 and self.is_acyclic()

    def __str__(self):
        return "{" + ", ".join(f"({a},{b})" for a, b in self.sorted()) + "}"


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True


def all_pairs(d: int) -> list:
    return list(itertools.combinations(range(d), 2))


def tie_groups(weights: Mapping, tie_tol: float = TIE_TOL) -> list:
    """Pairs sorted by decreasing weight, grouped where weights agree within tol.

    Each group is sorted lexicographically, which is the tie-break rule.
    """
    ordered = sorted(weights, key=lambda p: (-weights[p], p))
    groups: list = []
    head = None
    for p in ordered:
        if groups and abs(weights[p] - head) <= tie_tol:
            groups[-1].append(p)
        else:
            groups.append([p])
            head = weights[p]
    return [sorted(g) for g in groups]


def mwst(d: int, weights: Mapping, tie_tol: float = TIE_TOL):
    """Maximum-weight spanning tree by Kruskal.

    ``weights`` must cover every node pair. Returns ``(EdgeSet, ties)`` where
    ``ties`` lists the groups of pairs whose weights agree within ``tie_tol``.
    """
    w = {_pair(p): float(v) for p, v in weights.items()}
    missing = [p for p in all_pairs(d) if p not in w]
    if missing:
        raise ValidationError(f"missing weights for pairs {missing[:3]}...")
    groups = tie_groups(w, tie_tol)
    uf = _UnionFind(d)
    chosen = []
    for group in groups:
        for a, b in group:
            if uf.union(a, b):
                chosen.append((a, b))
    ties = [tuple(g) for g in groups if len(g) > 1]
    return EdgeSet(d, frozenset(chosen)), ties


def enumerate_spanning_trees(d: int) -> Iterator[EdgeSet]:
    """All ``d**(d-2)`` labelled spanning trees, decoded from Pruefer sequences."""
    if d > MAX_ENUM_NODES:
        raise TooLargeError(f"enumeration limited to d <= {MAX_ENUM_NODES}")
    if d < 1:
        raise ValidationError("d must be positive")
    if d <= 2:
        yield EdgeSet(d, frozenset({(0, 1)} if d == 2 else ()))
        return
    for seq in itertools.product(range(d), repeat=d - 2):
        yield EdgeSet(d, frozenset(_prufer_decode(seq, d)))


def _prufer_decode(seq, d: int) -> list:
    degree = [1] * d
    for v in seq:
        degree[v] += 1
    edges = []
    for v in seq:
        leaf = degree.index(1)
        edges.append((min(leaf, v), max(leaf, v)))
        degree[leaf] -= 1
        degree[v] -= 1
    u, w = (i for i in range(d) if degree[i] == 1)
    edges.append((u, w))
    return edges


def path_between(tree: EdgeSet, pair) -> list:
    """Edges of ``tree`` along the unique path joining the nodes of ``pair``.

    Edges are ordered from ``pair[0]`` to ``pair[1]`` (in the order given).
    """
    u, v = (int(x) for x in pair)
    if u == v:
        raise InvalidIndexError("path endpoints must differ")
    adj = tree.adjacency()
    prev = {u: None}
    queue = deque([u])
    while queue:
        x = queue.popleft()
        if x == v:
            break
        for y in adj[x]:
            if y not in prev:
                prev[y] = x
                queue.append(y)
    if v not in prev:
        raise DisconnectedInputError(f"nodes {u} and {v} are not connected")
    path = []
    x = v
    while prev[x] is not None:
        path.append(_pair((prev[x], x)))
        x = prev[x]
    return path[::-1]


def _hop_distances(adj, source: int) -> list:
    dist = [-1] * len(adj)
    dist[source] = 0
    queue = deque([source])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if dist[y] < 0:
                dist[y] = dist[x] + 1
                queue.append(y)
    return dist


def diameter(tree: EdgeSet) -> int:
    adj = tree.adjacency()
    best = 0
    for s in range(tree.d):
        dist = _hop_distances(adj, s)
        if min(dist) < 0:
            raise DisconnectedInputError("diameter needs a connected tree")
        best = max(best, max(dist))
    return best


def is_proper_forest(structure: EdgeSet) -> bool:
    """True iff the acyclic edge set has fewer than ``d - 1`` edges."""
    if not structure.is_acyclic():
        raise CyclicInputError("edge set contains a cycle")
    return len(structure) < structure.d - 1


@dataclass(frozen=True, eq=False)
class TreeModel:
    """Distribution factorizing over a spanning tree.

    ``edge_marginals[(i, j)]`` (``i < j``) is a ``(k, k)`` table with axis 0
    indexing ``x_i``. By default every edge marginal must carry dependence;
    models built from finite samples pass ``allow_product=True``.
    """

    structure: EdgeSet
    alphabet: int
    node_marginals: np.ndarray
    edge_marginals: Mapping
    allow_product: bool = False

    def __post_init__(self):
        d, k = self.structure.d, self.alphabet
        if k < 2:
            raise ValidationError("alphabet size must be at least 2")
        if not self.structure.is_spanning_tree():
            raise ValidationError("structure must be a spanning tree")
        nodes = np.array(self.node_marginals, dtype=float)
        if nodes.shape != (d, k):
            raise ValidationError(f"node_marginals must have shape ({d}, {k})")
        if np.any(nodes < 0) or np.any(np.abs(nodes.sum(axis=1) - 1) > 1e-9):
            raise ValidationError("node marginals must be distributions")
        edges = {}
        for e in self.structure:
            if e not in {_pair(p) for p in self.edge_marginals}:
                raise ValidationError(f"missing edge marginal for {e}")
        for p, table in self.edge_marginals.items():
            e = _pair(p)
            t = np.array(table, dtype=float)
            if tuple(p) != e:
                t = t.T
            if t.shape != (k, k) or np.any(t < 0) or abs(t.sum() - 1) > 1e-9:
                raise ValidationError(f"edge marginal {e} is not a {k}x{k} distribution")
            if e not in self.structure:
                raise ValidationError(f"edge marginal {e} is not a tree edge")
            i, j = e
            if (np.max(np.abs(t.sum(axis=1) - nodes[i])) > MARGINAL_TOL
                    or np.max(np.abs(t.sum(axis=0) - nodes[j])) > MARGINAL_TOL):
                raise ValidationError(f"edge marginal {e} disagrees with node marginals")
            if not self.allow_product and np.max(np.abs(t - np.outer(nodes[i], nodes[j]))) <= 1e-12:
                raise ValidationError(
                    f"edge marginal {e} is a product distribution; the tree would be a proper forest"
                )
            t.setflags(write=False)
            edges[e] = t
        nodes.setflags(write=False)
        object.__setattr__(self, "node_marginals", nodes)
        object.__setattr__(self, "edge_marginals", edges)

    @property
    def d(self) -> int:
        return self.structure.d

    @classmethod
    def from_dense(cls, joint: DenseJoint, structure: EdgeSet, allow_product=False) -> "TreeModel":
        """Tree with the pairwise marginals of ``joint`` on ``structure`` (its tree projection)."""
        nodes = np.array([marginalize(joint, [i]).probs for i in range(joint.num_vars)])
        edges = {e: marginalize(joint, e).probs for e in structure}
        return cls(structure, joint.alphabet, nodes, edges, allow_product)

    @classmethod
    def from_conditionals(cls, structure: EdgeSet, root_marginal, conditionals: Mapping,
                          root: int = 0, allow_product=False) -> "TreeModel":
        """Build from a root marginal and ``conditionals[(parent, child)][x_p, x_c]``."""
        root_marginal = np.asarray(root_marginal, dtype=float)
        k = root_marginal.size
        nodes = np.zeros((structure.d, k))
        nodes[root] = root_marginal
        edges = {}
        for parent, child in _bfs_edges(structure, root):
            cond = np.asarray(conditionals[(parent, child)], dtype=float)
            joint = nodes[parent][:, None] * cond
            nodes[child] = joint.sum(axis=0)
            edges[_pair((parent, child))] = joint if parent < child else joint.T
        return cls(structure, k, nodes, edges, allow_product)

    def conditional(self, parent: int, child: int) -> np.ndarray:
        """P(x_child | x_parent) as a ``(k, k)`` row-stochastic table.

        Rows for parent symbols with zero probability are left uniform; they
        are never reached when sampling.
        """
        t = self.edge_marginals[_pair((parent, child))]
        if parent > child:
            t = t.T
        pm = t.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            cond = np.where(pm > 0, t / np.where(pm > 0, pm, 1), 1.0 / self.alphabet)
        return cond


def _bfs_edges(structure: EdgeSet, root: int) -> list:
    """(parent, child) pairs in breadth-first order from ``root``."""
    adj = structure.adjacency()
    seen = {root}
    order = []
    queue = deque([root])
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                order.append((x, y))
                queue.append(y)
    return order


def evaluate(model: TreeModel, x) -> float:
    """P(x) = prod_i P_i(x_i) * prod_(i,j) P_ij(x_i,x_j) / (P_i(x_i) P_j(x_j))."""
    x = [int(v) for v in x]
    if len(x) != model.d:
        raise InvalidIndexError(f"outcome must have {model.d} symbols")
    if any(v < 0 or v >= model.alphabet for v in x):
        raise OutOfRangeSymbolError(f"symbols must lie in 0..{model.alphabet - 1}")
    nodes = model.node_marginals
    single = [nodes[i, x[i]] for i in range(model.d)]
    if min(single) == 0.0:
        return 0.0
    p = float(np.prod(single))
    for (i, j), t in model.edge_marginals.items():
        p *= t[x[i], x[j]] / (single[i] * single[j])
    return p


def to_dense(model: TreeModel) -> DenseJoint:
    d, k = model.d, model.alphabet
    if k**d > DENSE_BUDGET:
        raise TooLargeError(f"{k}^{d} cells exceeds the dense budget")
    nodes = model.node_marginals
    idx = np.indices((k,) * d)
    with np.errstate(divide="ignore", invalid="ignore"):
        table = np.ones((k,) * d)
        for i in range(d):
            table = table * nodes[i][idx[i]]
        for (i, j), t in model.edge_marginals.items():
            denom = nodes[i][idx[i]] * nodes[j][idx[j]]
            table = table * np.where(denom > 0, t[idx[i], idx[j]] / np.where(denom > 0, denom, 1), 0.0)
    return DenseJoint(d, k, table)


def ancestral_fill(model: TreeModel, uniforms: np.ndarray, root: int = 0) -> np.ndarray:
    """Map uniforms of shape ``(..., d)`` to samples by ancestral inversion."""
    k = model.alphabet
    u = np.asarray(uniforms)
    out = np.empty(u.shape, dtype=np.int8 if k <= 127 else np.int64)
    root_cdf = np.cumsum(model.node_marginals[root])
    out[..., root] = np.minimum((u[..., root, None] >= root_cdf).sum(-1), k - 1)
    for parent, child in _bfs_edges(model.structure, root):
        cdf = np.cumsum(model.conditional(parent, child), axis=1)
        rows = cdf[out[..., parent]]
        out[..., child] = np.minimum((u[..., child, None] >= rows).sum(-1), k - 1)
    return out


def sample(model: TreeModel, n: int, seed: int = 0) -> np.ndarray:
    """``n`` i.i.d. samples (rows) from the tree model, rooted at node 0."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    rng = np.random.Generator(np.random.PCG64(int(seed) & _MASK64))
    return ancestral_fill(model, rng.random((n, model.d)))
