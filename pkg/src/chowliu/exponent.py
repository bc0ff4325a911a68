"""Error exponent of Chow-Liu structure learning.

The exponent is the smallest crossover rate between a non-edge e' and an
edge e on the tree path joining the endpoints of e'. Swapping such a pair
yields another spanning tree, which is what makes the event an error.
The same search, with a filter that ignores swaps landing inside the set of
optimal tree projections, gives the exponent for non-tree distributions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

from scipy.special import gammaln

from .crossover import SolverConfig, approx_rate, exact_rate
from .dist import DenseJoint, PairJoint, entropy, marginalize
from .errors import NotStrictlyPositiveError, ValidationError
from .learning import true_mi_table
from .trees import (
    TIE_TOL,
    EdgeSet,
    TreeModel,
    diameter,
    enumerate_spanning_trees,
    is_proper_forest,
    mwst,
    path_between,
    to_dense,
)

log = logging.getLogger(__name__)

INF = math.inf
MODES = ("exact", "approx")


@dataclass(frozen=True, eq=False)
class ExponentReport:
    k_p: float
    dominant_nonedge: tuple | None
    replacement: tuple | None
    dominant_error_tree: EdgeSet | None
    pair_rates: dict
    evaluations: int
    mode: str
    structure: EdgeSet
    co_minimal: tuple = ()

    def as_dict(self) -> dict:
        return {
            "k_p": _num(self.k_p),
            "dominant_nonedge": _edge_list(self.dominant_nonedge),
            "replacement": _edge_list(self.replacement),
            "dominant_error_tree": _tree_list(self.dominant_error_tree),
            "structure": _tree_list(self.structure),
            "pair_rates": [
                {"edge": list(e), "nonedge": list(f), "rate": _num(r)}
                for (e, f), r in sorted(self.pair_rates.items(), key=lambda kv: (kv[0][1], kv[0][0]))
            ],
            "evaluations": self.evaluations,
            "evaluation_bound": evaluation_bound(self.structure),
            "mode": self.mode,
            "co_minimal": [[list(e), list(f)] for e, f in self.co_minimal],
        }


@dataclass(frozen=True, eq=False)
class ProjectionSet:
    pi_star: float
    structures: tuple
    models: tuple
    max_weight: float
    mi_table: dict

    def __contains__(self, structure) -> bool:
        return any(structure == s for s in self.structures)


@dataclass(frozen=True, eq=False)
class FilterDecision:
    structure: EdgeSet
    edge: tuple
    nonedge: tuple
    excluded: bool


@dataclass(frozen=True, eq=False)
class GeneralizedReport(ExponentReport):
    projections: ProjectionSet | None = None
    dominant_structure: EdgeSet | None = None
    filter_trace: tuple = ()
    nonedge_rates: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = super().as_dict()
        out["dominant_structure"] = _tree_list(self.dominant_structure)
        out["projections"] = [_tree_list(s) for s in self.projections.structures]
        out["pi_star"] = _num(self.projections.pi_star)
        out["excluded_swaps"] = [
            {"structure": _tree_list(t.structure), "edge": list(t.edge), "nonedge": list(t.nonedge)}
            for t in self.filter_trace if t.excluded
        ]
        out["nonedge_rates"] = [
            {"structure": _tree_list(s), "nonedge": list(f), "rate": _num(r)}
            for (s, f), r in self.nonedge_rates.items()
        ]
        return out


@dataclass(frozen=True)
class PositivityCertificate:
    positive: bool
    witness: tuple | None  # (edge, nonedge) with I(P_edge) <= I(P_nonedge)
    witness_gap: float | None
    structure: EdgeSet
    proper_forest: bool

    @property
    def consistent(self) -> bool:
        """Conditions (b) and (c) agree."""
        return self.positive == (not self.proper_forest)


def _num(x):
    if x is None:
        return None
    return "inf" if math.isinf(x) else float(x)


def _edge_list(e):
    return None if e is None else list(e)


def _tree_list(t):
    return None if t is None else [list(e) for e in t.sorted()]


def evaluation_budget(tree: EdgeSet) -> int:
    """Number of (e, e') rate evaluations made by the exponent search on ``tree``."""
    return sum(len(path_between(tree, f)) for f in tree.nonedges())


def evaluation_bound(tree: EdgeSet) -> float:
    """diam * (d-1) * (d-2) / 2, an upper bound on :func:`evaluation_budget`."""
    d = tree.d
    return 0.5 * diameter(tree) * (d - 1) * (d - 2)


def finite_sample_bound(k_p: float, d: int, alphabet: int, n: int) -> float:
    """Log of ((d-1)^2 (d-2) / 2) * C(n + 1 + |X|^4, n + 1) * exp(-n K_P)."""
    if n < 1:
        raise ValidationError("n must be at least 1")
    if k_p < 0:
        raise ValidationError("k_p must be nonnegative")
    if d < 2 or alphabet < 2:
        raise ValidationError("need d >= 2 and alphabet >= 2")
    prefactor = (d - 1) ** 2 * (d - 2) / 2
    if prefactor == 0:
        return -INF
    m = alphabet**4
    log_binom = gammaln(n + 2 + m) - gammaln(n + 2) - gammaln(m + 1)
    return float(math.log(prefactor) + log_binom - n * k_p)


class _RateTable:
    """Memoized J or J~ for node-pair pairs of one dense joint."""

    def __init__(self, dense: DenseJoint, mode: str, cfg: SolverConfig):
        if mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
        self.dense, self.mode, self.cfg = dense, mode, cfg
        self.rates: dict = {}

    def __call__(self, e: tuple, f: tuple) -> float:
        key = (e, f)
        if key not in self.rates:
            pj = PairJoint.from_dense(self.dense, e, f)
            if self.mode == "exact":
                self.rates[key] = exact_rate(pj, self.cfg).rate
            else:
                self.rates[key] = approx_rate(pj, self.cfg)
        return self.rates[key]


def _argmin(items, tol: float):
    """Lexicographically smallest key among items whose rate is within tol of the minimum.

    ``items`` are ``(rate, key)``; returns ``(min_rate, key, co_minimal_keys)``.
    """
    items = list(items)
    if not items:
        return INF, None, []
    lo = min(r for r, _ in items)
    if math.isinf(lo):
        return INF, None, []
    co = sorted(k for r, k in items if r <= lo + tol)
    return lo, co[0], co


def dominant_replacement(tree: EdgeSet, nonedge, rate_fn: Callable, excluded=None,
                         tie_tol: float = TIE_TOL):
    """r(e') = argmin over path edges e of rate_fn(e, e'); returns ``(edge, rate)``.

    ``excluded(e)`` may veto path edges; with nothing left the rate is +inf
    and the edge is None.
    """
    f = tuple(sorted(nonedge))
    if f in tree:
        raise ValidationError(f"{f} is an edge of the tree")
    path = sorted(path_between(tree, f))
    cands = [e for e in path if not (excluded and excluded(e))]
    rate, e, _ = _argmin(((rate_fn(e, f), e) for e in cands), tie_tol)
    return e, rate


def _search(structures, rate_fn, in_set=None, tie_tol: float = TIE_TOL):
    """Triple minimum over structures, non-edges and path edges."""
    trace = []
    per_nonedge = {}
    best = []
    for s in structures:
        for f in s.nonedges():
            def excluded(e, s=s, f=f):
                out = bool(in_set and in_set(s.swap(e, f)))
                trace.append(FilterDecision(s, e, f, out))
                return out

            _, rate = dominant_replacement(s, f, rate_fn, excluded, tie_tol)
            per_nonedge[(s, f)] = rate
            # every admissible pair competes, so co-minimal ties inside one path are kept
            admissible = [t.edge for t in trace if t.structure is s and t.nonedge == f and not t.excluded]
            best.extend((rate_fn(a, f), (tuple(s.sorted()), f, a)) for a in admissible)
    k, key, co = _argmin(best, tie_tol)
    return k, key, co, per_nonedge, trace


def _dense_and_structure(model):
    if isinstance(model, TreeModel):
        return to_dense(model), model.structure
    if isinstance(model, DenseJoint):
        structure, _ = mwst(model.num_vars, true_mi_table(model))
        return model, structure
    raise ValidationError("expected a TreeModel or DenseJoint")


def _report(cls, k, key, co, rates, structures, mode, **extra):
    by_tuple = {tuple(s.sorted()): s for s in structures}
    if key is None:
        s = structures[0]
        return cls(k, None, None, None, dict(rates.rates), len(rates.rates), mode, s, (), **extra)
    s = by_tuple[key[0]]
    f, e = key[1], key[2]
    err = s.swap(e, f)
    if len(err.edges - s.edges) != 1 or not err.is_spanning_tree():
        raise AssertionError("dominant error tree must differ from the truth by one edge")
    co_pairs = tuple((c[2], c[1]) for c in co)
    return cls(k, f, e, err, dict(rates.rates), len(rates.rates), mode, s, co_pairs, **extra)


def error_exponent(model, mode: str = "exact", cfg: SolverConfig | None = None) -> ExponentReport:
    """K_P = min over non-edges e' and path edges e of J_{e,e'} (or J~ in approx mode).

    ``model`` is a :class:`TreeModel`, or a :class:`DenseJoint` whose Chow-Liu
    tree on the true mutual informations is used as E_P.
    """
    cfg = cfg or SolverConfig()
    dense, structure = _dense_and_structure(model)
    if mode == "exact" and not dense.strictly_positive:
        raise NotStrictlyPositiveError("exact mode needs a strictly positive distribution")
    rates = _RateTable(dense, mode, cfg)
    k, key, co, _, _ = _search([structure], rates)
    return _report(ExponentReport, k, key, co, rates, [structure], mode)


def positivity_certificate(model, tol: float = TIE_TOL) -> PositivityCertificate:
    """Check I(P_e') < I(P_e) for every non-edge e' and e on its path.

    The structural counterpart is whether the edges carrying nonzero mutual
    information form a proper forest; for strictly positive P the two agree.
    """
    dense, structure = _dense_and_structure(model)
    if not dense.strictly_positive:
        raise NotStrictlyPositiveError("positivity conditions assume a strictly positive P")
    mi = true_mi_table(dense)
    witness, gap = None, None
    for f in structure.nonedges():
        for e in sorted(path_between(structure, f)):
            g = mi[e] - mi[f]
            if g <= tol and (gap is None or (g, f, e) < (gap, witness[1], witness[0])):
                witness, gap = (e, f), g
    support = EdgeSet.of(structure.d, [e for e in structure if mi[e] > tol])
    return PositivityCertificate(witness is None, witness, gap, structure, is_proper_forest(support))


def optimal_projections(dense: DenseJoint, tie_tol: float = TIE_TOL) -> ProjectionSet:
    """Every spanning tree with maximal total mutual information (within tie_tol)."""
    d = dense.num_vars
    mi = true_mi_table(dense)
    scored = []
    for t in enumerate_spanning_trees(d):
        scored.append((math.fsum(mi[e] for e in t), t))
    top = max(w for w, _ in scored)
    structures = tuple(sorted((t for w, t in scored if w >= top - tie_tol), key=lambda t: t.sorted()))
    models = tuple(TreeModel.from_dense(dense, t, allow_product=True) for t in structures)
    node_h = math.fsum(entropy(marginalize(dense, [i])) for i in range(d))
    pi_star = max(node_h - entropy(dense) - top, 0.0)
    return ProjectionSet(pi_star, structures, models, top, mi)


def generalized_exponent(dense: DenseJoint, mode: str = "exact", cfg: SolverConfig | None = None,
                         projections: ProjectionSet | None = None) -> GeneralizedReport:
    """Exponent for learning any structure outside the set of optimal projections.

    Swaps that turn one optimal structure into another are not errors and
    are filtered out. A non-edge left with no admissible swap has rate +inf.
    """
    cfg = cfg or SolverConfig()
    if not isinstance(dense, DenseJoint):
        raise ValidationError("generalized_exponent needs a DenseJoint")
    if mode == "exact" and not dense.strictly_positive:
        raise NotStrictlyPositiveError("exact mode needs a strictly positive distribution")
    proj = projections or optimal_projections(dense)
    rates = _RateTable(dense, mode, cfg)
    k, key, co, per_nonedge, trace = _search(proj.structures, rates, proj.__contains__)
    dominant = None
    if key is not None:
        dominant = next(s for s in proj.structures if tuple(s.sorted()) == key[0])
    return _report(GeneralizedReport, k, key, co, rates, list(proj.structures), mode,
                   projections=proj, dominant_structure=dominant,
                   filter_trace=tuple(trace), nonedge_rates=per_nonedge)


__all__ = [
    "ExponentReport",
    "GeneralizedReport",
    "PositivityCertificate",
    "ProjectionSet",
    "FilterDecision",
    "dominant_replacement",
    "error_exponent",
    "evaluation_budget",
    "evaluation_bound",
    "finite_sample_bound",
    "generalized_exponent",
    "optimal_projections",
    "positivity_certificate",
]
