"""Crossover rates between the empirical mutual informations of two node pairs.

The exact rate is the minimum of D(Q || P) over joints Q on the 3 or 4
variables of the pair, subject to I(Q_e) = I(Q_e'). The problem is
non-convex, so it is solved from several starting points:

1. each start is pushed through a quadratic-penalty continuation in the
   softmax parameterization of the simplex, with BFGS as the inner solver.
   The start at P begins with a soft penalty; the others begin stiffer so
   that they stay near their own local minimum;
2. the result is polished by Newton's method on the full KKT system
   (analytic Hessians), which lands on the constraint to machine precision;
3. the best polished objective over restarts is returned.

A minimizer may sit on the boundary of the simplex, where a whole cell of
one pair table is empty. The softmax path cannot reach such faces reliably,
so each single-cell face is also solved directly with its cells pinned at
zero, and the lowest objective over restarts and faces wins.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .dist import (
    PairJoint,
    _pair,
    empirical_distribution,
    information_density,
    kl_divergence,
    mutual_information,
)
from .errors import (
    ChowLiuError,
    DegenerateInformationDensityError,
    EmptySampleError,
    NotStrictlyPositiveError,
    SolverNonConvergenceError,
    ValidationError,
    ZeroMarginalError,
)
from .trees import mix_seed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    restarts: int = 20
    penalty_init: float | None = None  # None: 1 / Var(s_e' - s_e)
    penalty_factor: float = 10.0
    penalty_stages: int = 6
    tol_constraint: float = 1e-8
    tol_stationarity: float = 1e-10
    tol_var: float = 1e-12
    seed: int = 0
    smoothing: bool = False
    polish_iters: int = 60

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


@dataclass(frozen=True, eq=False)
class CrossoverOutcome:
    rate: float
    q_star: np.ndarray
    constraint_residual: float
    restarts_used: int
    converged: bool
    restart_objectives: tuple = field(default=())
    pair_joint: PairJoint | None = None
    face_objectives: tuple = field(default=())

    @property
    def consensus_spread(self) -> float:
        vals = [v for v in self.restart_objectives if np.isfinite(v)]
        return float(max(vals) - min(vals)) if vals else float("nan")

    @property
    def consensus_count(self) -> int:
        """Restarts whose objective is within 1e-6 of the returned rate."""
        return sum(abs(v - self.rate) <= 1e-6 for v in self.restart_objectives)


class _Layout:
    """Index bookkeeping for one pair joint flattened to a vector."""

    def __init__(self, pj: PairJoint):
        self.k = pj.alphabet
        self.p = pj.probs.reshape(-1).copy()
        self.m = self.p.size
        idx = np.indices(pj.probs.shape).reshape(pj.probs.ndim, -1)
        ae, be = pj.axes(pj.edge)
        af, bf = pj.axes(pj.nonedge)
        self.ie = idx[ae] * self.k + idx[be]
        self.if_ = idx[af] * self.k + idx[bf]
        self.Ae = np.zeros((self.k * self.k, self.m))
        self.Ae[self.ie, np.arange(self.m)] = 1.0
        self.Af = np.zeros((self.k * self.k, self.m))
        self.Af[self.if_, np.arange(self.m)] = 1.0

    def marg(self, q, which):
        idx = self.ie if which == "e" else self.if_
        return np.bincount(idx, weights=q, minlength=self.k * self.k).reshape(self.k, self.k)

    def h_and_grad(self, q, face=False):
        """h(q) = I(q_e') - I(q_e) and its gradient in q (up to a constant shift).

        With ``face`` set, empty pair-table cells are allowed (0 log 0 = 0);
        the gradient is then meaningful only on cells feeding nonempty ones.
        """
        mi_e, ve = self._density(q, self.ie, face)
        mi_f, vf = self._density(q, self.if_, face)
        return mi_f - mi_e, vf[self.if_] - ve[self.ie]

    def _density(self, q, idx, face=False):
        k = self.k
        t = np.bincount(idx, weights=q, minlength=k * k).reshape(k, k)
        a = t.sum(axis=1, keepdims=True)
        b = t.sum(axis=0, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            s = np.log(t) - np.log(a) - np.log(b)
        if face:
            s = np.where(t > 0, s, 0.0)
            bad = np.any(a <= 0) or np.any(b <= 0) or np.any(t < 0)
        else:
            bad = np.any(t <= 0)
        if bad or not np.all(np.isfinite(s)):
            raise ZeroMarginalError("information density needs a positive pair table")
        return max(float(np.sum(t * s)), 0.0), s.reshape(-1)

    def h_hessian(self, q):
        return self._mi_hessian(q, self.Af, "f") - self._mi_hessian(q, self.Ae, "e")

    def _mi_hessian(self, q, A, which):
        k = self.k
        t = self.marg(q, which)
        a, b = t.sum(axis=1), t.sum(axis=0)
        r = np.repeat(np.arange(k), k)
        c = np.tile(np.arange(k), k)
        flat = t.reshape(-1)
        # empty cells only touch columns of A that are pinned at zero
        H = np.diag(np.divide(1.0, flat, out=np.zeros_like(flat), where=flat > 0))
        H -= (r[:, None] == r[None, :]) / a[r][:, None]
        H -= (c[:, None] == c[None, :]) / b[c][:, None]
        return A.T @ H @ A


_FLOOR = 1e-300
# restarts other than P itself begin the continuation this much stiffer; with
# the soft initial penalty every start is pulled into the basin nearest P
EXPLORE_BOOST = 100.0
# a pair-table cell below these fractions of its value under P is tried as empty
FACE_RATIOS = (1e-9, 1e-6, 1e-4)


def _softmax(z):
    w = np.exp(z - z.max())
    return np.maximum(w / w.sum(), _FLOOR)


def _penalty_fun(z, mu, lay: _Layout, free=None):
    q = _softmax(z)
    p = lay.p if free is None else lay.p[free]
    logr = np.log(q / p)
    D = float(q @ logr)
    if free is None:
        h, gh = lay.h_and_grad(q)
    else:
        full = np.zeros(lay.m)
        full[free] = q
        h, gh = lay.h_and_grad(full, True)
        gh = gh[free]
    g = logr + 1.0 + mu * h * gh
    return D + 0.5 * mu * h * h, q * (g - q @ g)


def _kkt_polish(q, lam, lay: _Layout, cfg: SolverConfig, free=None):
    """Newton on grad D + lam grad h + nu 1 = 0, h = 0, sum q = 1.

    ``free`` restricts the solve to a face of the simplex: the other cells
    are held at zero.
    """
    face = free is not None
    free = np.arange(lay.m) if free is None else free
    m = free.size
    ones = np.ones(m)
    p = lay.p[free]

    def full(qf):
        out = np.zeros(lay.m)
        out[free] = qf
        return out

    def residual(qf, lam, nu):
        h, gh = lay.h_and_grad(full(qf), face)
        gh = gh[free]
        r1 = np.log(qf / p) + 1.0 + lam * gh + nu
        return np.concatenate([r1, [h, qf.sum() - 1.0]]), gh

    qf = q[free] / q[free].sum()
    if not np.all(np.isfinite(qf)) or np.any(qf <= 0):
        return q, lam, False
    gD = np.log(qf / p) + 1.0
    _, gh = lay.h_and_grad(full(qf), face)
    gh = gh[free]
    if not (np.all(np.isfinite(gD)) and np.all(np.isfinite(gh))):
        return q, lam, False
    coef, *_ = np.linalg.lstsq(np.column_stack([gh, ones]), -gD, rcond=None)
    if lam is None:
        lam = coef[0]
    nu = coef[1]
    res, gh = residual(qf, lam, nu)
    for _ in range(cfg.polish_iters):
        if (np.max(np.abs(res[:m])) <= cfg.tol_stationarity
                and abs(res[m]) <= 1e-14 and abs(res[m + 1]) <= 1e-14):
            return full(qf), lam, True
        W = np.diag(1.0 / qf) + lam * lay.h_hessian(full(qf))[np.ix_(free, free)]
        K = np.zeros((m + 2, m + 2))
        K[:m, :m] = W
        K[:m, m] = K[m, :m] = gh
        K[:m, m + 1] = K[m + 1, :m] = ones
        if not np.all(np.isfinite(K)):
            return full(qf), lam, False
        try:
            step = np.linalg.solve(K, -res)
        except np.linalg.LinAlgError:
            return full(qf), lam, False
        if not np.all(np.isfinite(step)):
            return full(qf), lam, False
        dq = step[:m]
        neg = dq < 0
        alpha = min(1.0, 0.9 * np.min(-qf[neg] / dq[neg])) if np.any(neg) else 1.0
        base = np.linalg.norm(res)
        while alpha > 1e-8:
            qn = qf + alpha * dq
            try:
                rn, ghn = residual(qn, lam + alpha * step[m], nu + alpha * step[m + 1])
            except ZeroMarginalError:
                alpha *= 0.5
                continue
            if np.linalg.norm(rn) < base or alpha == 1.0 and base < 1e-9:
                break
            alpha *= 0.5
        else:
            return full(qf), lam, False
        qf, lam, nu, res, gh = qn, lam + alpha * step[m], nu + alpha * step[m + 1], rn, ghn
    ok = (np.max(np.abs(res[:m])) <= cfg.tol_stationarity
          and abs(res[m]) <= cfg.tol_constraint)
    return full(qf), lam, ok


def _collapsed_face(q, lay: _Layout, ratio: float):
    """Cells of q left free when pair-table cells that vanished are pinned at zero.

    The divergence has infinite slope at q_i = 0, so a minimizer can touch the
    boundary only where a whole pair-table cell empties and the information
    density diverges. Returns None when no cell has collapsed.
    """
    pinned = np.zeros(lay.m, bool)
    for idx in (lay.ie, lay.if_):
        t = np.bincount(idx, weights=q, minlength=lay.k * lay.k)
        t_p = np.bincount(idx, weights=lay.p, minlength=lay.k * lay.k)
        gone = t < ratio * t_p
        pinned |= gone[idx]
    if not pinned.any() or pinned.all():
        return None
    return np.flatnonzero(~pinned)


def _cell_faces(lay: _Layout):
    """Free cells of q for each face where one pair-table cell is empty."""
    for idx in (lay.ie, lay.if_):
        for c in range(lay.k * lay.k):
            yield np.flatnonzero(idx != c)


def _starts(lay: _Layout, cfg: SolverConfig):
    yield np.log(lay.p)
    if cfg.restarts > 1:
        yield np.zeros(lay.m)
    rng = np.random.Generator(np.random.PCG64(mix_seed(cfg.seed, lay.m)))
    for _ in range(cfg.restarts - 2):
        yield np.log(np.maximum(rng.dirichlet(np.ones(lay.m)), 1e-300))


def _variance_gap(pj: PairJoint) -> tuple:
    """(I(P_e') - I(P_e), Var(s_e' - s_e)) under ``pj``."""
    p = pj.probs
    ds = _density_gap(pj)
    mean = float(np.sum(p * ds))
    var = float(np.sum(p * ds * ds) - mean * mean)
    gap = mutual_information(pj.pair_marginal(pj.nonedge)) - mutual_information(pj.pair_marginal(pj.edge))
    return gap, max(var, 0.0)


def _density_gap(pj: PairJoint) -> np.ndarray:
    return information_density(pj, "nonedge") - information_density(pj, "edge")


def _solve_from(z0, mu0, lay: _Layout, cfg: SolverConfig, free=None):
    """Penalty continuation then KKT polish from softmax logits ``z0``.

    With ``free`` given, ``z0`` covers only those cells and the rest stay at zero.
    """
    z = z0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for stage in range(cfg.penalty_stages):
            mu = mu0 * cfg.penalty_factor**stage
            r = minimize(_penalty_fun, z, args=(mu, lay, free), jac=True, method="BFGS",
                         options={"gtol": 1e-12, "maxiter": 400})
            z = r.x
    q_pen = np.zeros(lay.m)
    q_pen[slice(None) if free is None else free] = _softmax(z)
    if not np.all(np.isfinite(q_pen)):
        raise ZeroMarginalError("penalty phase diverged")
    h_pen, _ = lay.h_and_grad(q_pen, free is not None)
    D_pen = kl_divergence(q_pen, lay.p)
    attempts = [free]
    for ratio in FACE_RATIOS:
        f = _collapsed_face(q_pen, lay, ratio)
        if f is not None and free is not None:
            f = np.intersect1d(f, free)
        if f is not None and f.size:
            attempts.append(f)
    seen = set()
    for free in attempts:
        key = None if free is None else tuple(free)
        if key in seen:
            continue
        seen.add(key)
        q, lam, ok = _kkt_polish(q_pen, mu * h_pen, lay, cfg, free)
        D = kl_divergence(q, lay.p)
        h, _ = lay.h_and_grad(q, free is not None)
        # a polish that wandered to a different stationary point is rejected; the
        # penalty point is slightly infeasible, which shifts D by about lam * h_pen
        if ok and abs(D - D_pen) > 1e-3 * max(D, 1e-12) + 2 * abs(lam * h_pen) + 1e-12:
            ok = False
        if ok:
            break
    return (D if ok else np.inf, ok, q, abs(h), D_pen)


def exact_rate(pair_joint: PairJoint, cfg: SolverConfig | None = None) -> CrossoverOutcome:
    """Minimum of D(Q || P_{e,e'}) subject to I(Q_e) = I(Q_e')."""
    cfg = cfg or SolverConfig()
    pj = pair_joint
    if not np.all(pj.probs > 0):
        raise NotStrictlyPositiveError("the exact crossover rate needs a strictly positive joint")
    lay = _Layout(pj)
    gap, var = _variance_gap(pj)
    if abs(gap) <= cfg.tol_constraint:
        return CrossoverOutcome(0.0, pj.probs.copy(), abs(gap), 0, True, (0.0,), pj)
    mu0 = cfg.penalty_init or 1.0 / max(var, cfg.tol_var)

    def attempt(z0, mu, free=None):
        try:
            return _solve_from(z0, mu, lay, cfg, free)
        except (ChowLiuError, FloatingPointError, np.linalg.LinAlgError) as exc:
            log.debug("restart failed: %s", exc)
            return (np.inf, False, np.full(lay.m, np.nan), np.inf, np.inf)

    results = [attempt(z0, mu0 if k == 0 else mu0 * EXPLORE_BOOST) for k, z0 in enumerate(_starts(lay, cfg))]
    objectives = tuple(r[0] for r in results)
    faces = [attempt(np.log(lay.p[free]), mu0, free) for free in _cell_faces(lay)]
    face_objectives = tuple(r[0] for r in faces)
    results += faces
    good = [i for i, r in enumerate(results) if r[1]]
    if not good:
        i = min(range(len(results)), key=lambda j: (results[j][4], j))
        best = CrossoverOutcome(results[i][4], results[i][2].reshape(pj.probs.shape),
                                results[i][3], len(objectives), False, objectives, pj,
                                face_objectives)
        raise SolverNonConvergenceError("no restart met the solver tolerances", best)
    i = min(good, key=lambda j: (results[j][0], j))
    D, _, q, resid, _ = results[i]
    log.debug("crossover %s/%s: rate %.6g from attempt %d", pj.edge, pj.nonedge, D, i)
    return CrossoverOutcome(D, q.reshape(pj.probs.shape), resid, len(objectives), True,
                            objectives, pj, face_objectives)


def approx_rate(pair_joint: PairJoint, cfg: SolverConfig | None = None) -> float:
    """(I(P_e') - I(P_e))^2 / (2 Var(s_e' - s_e)), the Euclidean approximation."""
    cfg = cfg or SolverConfig()
    gap, var = _variance_gap(pair_joint)
    if abs(gap) <= cfg.tol_constraint:
        return 0.0
    if var < cfg.tol_var:
        raise DegenerateInformationDensityError(
            f"Var(s_e' - s_e) = {var:.3g} is below {cfg.tol_var:g} while the MIs differ by {gap:.3g}"
        )
    return gap * gap / (2.0 * var)


def psi_weight(pair_joint: PairJoint) -> float:
    """[(L K^-1 L^T)^-1]_11 from the linearized least-squares problem.

    Rows of L are (s_e' - s_e) and the all-ones vector; K is diag(1/P).
    Equals 1 / Var(s_e' - s_e).
    """
    p = pair_joint.probs.reshape(-1)
    L = np.vstack([_density_gap(pair_joint).reshape(-1), np.ones_like(p)])
    M = (L * p) @ L.T
    return float(np.linalg.inv(M)[0, 0])


def is_very_noisy(pair_joint: PairJoint, eps: float) -> bool:
    pe = pair_joint.pair_marginal(pair_joint.edge)
    pf = pair_joint.pair_marginal(pair_joint.nonedge)
    return bool(np.max(np.abs(pe - pf)) < eps)


def empirical_pair_joint(samples, edge, nonedge, alphabet: int | None = None,
                         smoothing: bool = False) -> PairJoint:
    """Type of the columns of ``samples`` on the nodes of ``(edge, nonedge)``."""
    x = np.asarray(samples)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptySampleError("samples must be a nonempty (n, d) matrix")
    edge, nonedge = _pair(edge), _pair(nonedge)
    vars_ = tuple(sorted(set(edge) | set(nonedge)))
    if max(vars_) >= x.shape[1]:
        raise ValidationError(f"samples have only {x.shape[1]} columns")
    counts = empirical_distribution(x[:, list(vars_)].astype(np.int64), alphabet)
    probs = counts.counts / counts.n
    if np.any(probs == 0):
        if not smoothing:
            raise NotStrictlyPositiveError(
                "empirical pair joint has zero cells; enable smoothing to add 1/(2n)"
            )
        probs = probs + 1.0 / (2 * counts.n)
        probs = probs / probs.sum()
    return PairJoint(vars_, probs, edge, nonedge)


def empirical_rate(samples, edge, nonedge, cfg: SolverConfig | None = None,
                   alphabet: int | None = None) -> CrossoverOutcome:
    """Crossover rate with the empirical pair joint in place of the true one."""
    cfg = cfg or SolverConfig()
    pj = empirical_pair_joint(samples, edge, nonedge, alphabet, cfg.smoothing)
    return exact_rate(pj, cfg)
