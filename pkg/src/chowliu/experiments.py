"""Sweeps over the four-node star used to compare exact, approximate,
simulated and empirical rates. Each function returns a list of flat rows
(dicts) ready for CSV output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .crossover import SolverConfig, approx_rate, empirical_rate, exact_rate
from .dist import PairJoint, mutual_information
from .exponent import error_exponent, finite_sample_bound
from .simulate import SimConfig, estimate_error_probability, star4
from .trees import mix_seed, sample, to_dense

# the path pair that dominates the star's exponent, and the disjoint pair
PATH_PAIR = ((0, 1), (1, 2))
DISJOINT_PAIR = ((0, 1), (2, 3))

DEFAULT_GAMMAS = (0.01, 0.025, 0.05, 0.075, 0.1, 0.125, 0.15, 0.175, 0.2)
DEFAULT_SIM_NS = (50, 100, 150, 200, 250, 300)
DEFAULT_EMPIRICAL_NS = (1_000, 10_000, 100_000)
FULL_EMPIRICAL_N = 8_000_000


@dataclass(frozen=True)
class RateRow:
    gamma: float
    edge: tuple
    nonedge: tuple
    mi_gap: float
    exact: float
    approx: float

    @property
    def rel_gap(self) -> float:
        return abs(self.approx - self.exact) / self.exact

    def as_row(self) -> dict:
        return {
            "gamma": self.gamma, "edge": _pair_str(self.edge), "nonedge": _pair_str(self.nonedge),
            "mi_gap": self.mi_gap, "exact": self.exact, "approx": self.approx,
            "rel_gap": self.rel_gap,
        }


def _pair_str(p) -> str:
    return f"{p[0]}-{p[1]}"


def star4_pair(gamma: float, pair=PATH_PAIR) -> PairJoint:
    return PairJoint.from_dense(to_dense(star4(gamma)), *pair)


def star4_rates(gammas=DEFAULT_GAMMAS, pair=PATH_PAIR, cfg: SolverConfig | None = None) -> list:
    cfg = cfg or SolverConfig()
    rows = []
    for g in gammas:
        pj = star4_pair(g, pair)
        gap = mutual_information(pj.pair_marginal(pj.edge)) - mutual_information(pj.pair_marginal(pj.nonedge))
        rows.append(RateRow(g, pj.edge, pj.nonedge, gap, exact_rate(pj, cfg).rate, approx_rate(pj, cfg)))
    return rows


def star4_sim(gamma: float = 0.2, ns=DEFAULT_SIM_NS, runs: int = 100_000, seed: int = 0,
              workers: int | None = None, cfg: SolverConfig | None = None) -> list:
    model = star4(gamma)
    cfg = cfg or SolverConfig(seed=seed)
    k_exact = error_exponent(model, "exact", cfg).k_p
    k_approx = error_exponent(model, "approx", cfg).k_p
    rows = []
    for n in ns:
        res = estimate_error_probability(model, SimConfig(n, runs, seed, workers))
        log_bound = finite_sample_bound(k_exact, model.d, model.alphabet, n)
        rows.append({
            "n": n, "runs": runs, "errors": res.errors, "p_hat": res.p_hat,
            "simulated_rate": res.simulated_rate, "insufficient_runs": res.insufficient_runs,
            "exact_k": k_exact, "approx_k": k_approx, "log_bound": log_bound,
            "bound_ok": res.errors == 0 or np.log(res.p_hat) <= log_bound,
        })
    return rows


def star4_empirical(gamma: float = 0.2, ns=DEFAULT_EMPIRICAL_NS, seeds: int = 20, pair=PATH_PAIR,
                    seed: int = 0, cfg: SolverConfig | None = None, full: bool = False) -> list:
    """Empirical rate on ``pair`` for each n and seed, next to the true rate."""
    cfg = cfg or SolverConfig(seed=seed)
    model = star4(gamma)
    true = exact_rate(star4_pair(gamma, pair), cfg).rate
    ns = tuple(ns) + ((FULL_EMPIRICAL_N,) if full and FULL_EMPIRICAL_N not in ns else ())
    rows = []
    for n in ns:
        for s in range(seeds):
            x = sample(model, n, mix_seed(seed, n * 1_000 + s))
            j = empirical_rate(x, *pair, cfg=cfg, alphabet=model.alphabet).rate
            rows.append({"n": n, "seed": s, "empirical": j, "exact": true,
                         "rel_err": abs(j - true) / true})
    return rows
