"""Command-line interface.

Exit codes: 0 success, 2 unreadable or malformed input, 3 invalid values,
4 usage error, 5 crossover solver failed to converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys

from . import experiments
from .crossover import SolverConfig, approx_rate, empirical_rate, exact_rate
from .dist import DenseJoint, PairJoint
from .errors import ChowLiuError, ParseError, SolverNonConvergenceError, ValidationError
from .exponent import (
    error_exponent,
    evaluation_bound,
    evaluation_budget,
    finite_sample_bound,
    generalized_exponent,
    optimal_projections,
    positivity_certificate,
)
from .files import format_prob, read_model, read_samples, write_model
from .learning import learn
from .simulate import SimConfig, estimate_error_probability, estimate_generalized_error_probability
from .trees import TreeModel, to_dense

EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, EXIT_USAGE, EXIT_SOLVER = 0, 2, 3, 4, 5
SEED_ENV = "CHOWLIU_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _pair_arg(text: str) -> tuple:
    try:
        a, b = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected i,j but got {text!r}") from None
    return (a, b)


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list:
    try:
        return [int(float(v)) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _add_common(p, solver=False):
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--seed", type=int, default=None,
                   help=f"random seed (default: ${SEED_ENV} or 0)")
    if solver:
        g = p.add_argument_group("crossover solver")
        g.add_argument("--restarts", type=int, default=SolverConfig.restarts)
        g.add_argument("--penalty-init", type=float, default=None)
        g.add_argument("--penalty-factor", type=float, default=SolverConfig.penalty_factor)
        g.add_argument("--penalty-stages", type=int, default=SolverConfig.penalty_stages)
        g.add_argument("--tol-constraint", type=float, default=SolverConfig.tol_constraint)
        g.add_argument("--tol-stationarity", type=float, default=SolverConfig.tol_stationarity)
        g.add_argument("--tol-var", type=float, default=SolverConfig.tol_var)


def _solver_cfg(args) -> SolverConfig:
    if args.restarts < 1:
        raise UsageError("--restarts must be at least 1")
    return SolverConfig(
        restarts=args.restarts, penalty_init=args.penalty_init, penalty_factor=args.penalty_factor,
        penalty_stages=args.penalty_stages, tol_constraint=args.tol_constraint,
        tol_stationarity=args.tol_stationarity, tol_var=args.tol_var, seed=args.seed,
        smoothing=getattr(args, "smoothing", False),
    )


def _num(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float):
        return _num(obj)
    if hasattr(obj, "item"):
        return _jsonable(obj.item())
    return obj


def _emit_json(doc, out):
    json.dump(_jsonable(doc), out, indent=1)
    out.write("\n")


def _csv_cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return v


def _emit_rows(rows, args, out):
    if args.format == "json":
        _emit_json(rows, out)
        return
    if not rows:
        return
    writer = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\r\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _csv_cell(v) for k, v in r.items()})


def _edges_str(edges) -> str:
    return " ".join(f"{a}-{b}" for a, b in edges) if edges else "-"


def _dense_of(model) -> DenseJoint:
    return to_dense(model) if isinstance(model, TreeModel) else model


# -- subcommands -------------------------------------------------------------


def cmd_learn(args, out):
    x = read_samples(args.samples)
    res = learn(x, args.alphabet)
    if args.out:
        write_model(res.model, args.out)
    doc = {
        "structure": [list(e) for e in res.structure.sorted()],
        "n": int(x.shape[0]),
        "mi": [{"pair": list(p), "mi": v} for p, v in sorted(res.mi_table.items())],
        "ties": [[list(p) for p in group] for group in res.ties],
        "model": args.out,
    }
    if args.format == "json":
        _emit_json(doc, out)
        return
    out.write(f"structure: {_edges_str(res.structure.sorted())}\n")
    out.write(f"samples: {x.shape[0]}\n")
    for p, v in sorted(res.mi_table.items()):
        out.write(f"mi {p[0]}-{p[1]}: {format_prob(v)}\n")
    for group in res.ties:
        out.write(f"tie: {_edges_str(group)}\n")
    if args.out:
        out.write(f"model written to {args.out}\n")


def cmd_exponent(args, out):
    model = read_model(args.model)
    cfg = _solver_cfg(args)
    rep = error_exponent(model, args.mode, cfg)
    cert = positivity_certificate(model) if _dense_of(model).strictly_positive else None
    doc = rep.as_dict()
    doc["evaluation_budget"] = evaluation_budget(rep.structure)
    if cert is not None:
        doc["positive"] = cert.positive
        doc["witness"] = None if cert.witness is None else [list(p) for p in cert.witness]
    if args.format == "json":
        _emit_json(doc, out)
        return
    out.write(f"mode: {rep.mode}\n")
    out.write(f"K_P: {_num(rep.k_p)}\n")
    out.write(f"dominant non-edge: {_edges_str([rep.dominant_nonedge] if rep.dominant_nonedge else [])}\n")
    out.write(f"replacement edge: {_edges_str([rep.replacement] if rep.replacement else [])}\n")
    out.write(f"dominant error tree: "
              f"{_edges_str(rep.dominant_error_tree.sorted() if rep.dominant_error_tree else [])}\n")
    out.write(f"evaluations: {rep.evaluations} (budget {doc['evaluation_budget']}, "
              f"bound {evaluation_bound(rep.structure):g})\n")
    if cert is not None and not cert.positive:
        e, f = cert.witness
        out.write(f"witness: I({e[0]}-{e[1]}) <= I({f[0]}-{f[1]})\n")
    out.write("edge,nonedge,rate,min\n")
    for (e, f), r in sorted(rep.pair_rates.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        mark = "*" if (f, e) == (rep.dominant_nonedge, rep.replacement) else ""
        out.write(f"{e[0]}-{e[1]},{f[0]}-{f[1]},{_csv_cell(float(r))},{mark}\n")


def cmd_crossover(args, out):
    cfg = _solver_cfg(args)
    if args.mode == "empirical":
        if not args.samples:
            raise UsageError("--samples is required in empirical mode")
        model = read_model(args.model)
        x = read_samples(args.samples)
        res = empirical_rate(x, args.edge, args.nonedge, cfg, _dense_of(model).alphabet)
        rate, extra = res.rate, {"constraint_residual": res.constraint_residual,
                                 "restarts": res.restarts_used, "spread": res.consensus_spread,
                                 "at_best": res.consensus_count}
    else:
        model = read_model(args.model)
        pj = PairJoint.from_dense(_dense_of(model), args.edge, args.nonedge)
        if args.mode == "exact":
            res = exact_rate(pj, cfg)
            rate, extra = res.rate, {"constraint_residual": res.constraint_residual,
                                     "restarts": res.restarts_used, "spread": res.consensus_spread,
                                     "at_best": res.consensus_count}
        else:
            rate, extra = approx_rate(pj, cfg), {}
    doc = {"mode": args.mode, "edge": list(args.edge), "nonedge": list(args.nonedge), "rate": rate, **extra}
    if args.format == "json":
        _emit_json(doc, out)
        return
    for k, v in doc.items():
        if isinstance(v, list):
            v = f"{v[0]}-{v[1]}"
        out.write(f"{k}: {_num(v)}\n")


def cmd_simulate(args, out):
    model = read_model(args.model)
    if args.runs < 1 or any(n < 1 for n in args.n):
        raise UsageError("--n and --runs must be positive")
    k_p = None
    if args.bound_mode != "none":
        k_p = (error_exponent(model, args.bound_mode, _solver_cfg(args)).k_p
               if isinstance(model, TreeModel)
               else generalized_exponent(model, args.bound_mode, _solver_cfg(args)).k_p)
    dense = _dense_of(model)
    rows = []
    for n in args.n:
        cfg = SimConfig(n, args.runs, args.seed, args.workers)
        if isinstance(model, TreeModel):
            res = estimate_error_probability(model, cfg)
        else:
            res = estimate_generalized_error_probability(model, cfg)
        row = {"n": n, "runs": args.runs, "errors": res.errors, "p_hat": res.p_hat,
               "simulated_rate": res.simulated_rate, "insufficient_runs": res.insufficient_runs}
        if k_p is not None:
            lb = finite_sample_bound(k_p, dense.num_vars, dense.alphabet, n)
            row.update({"k_p": k_p, "log_bound": lb,
                        "bound_ok": res.errors == 0 or math.log(res.p_hat) <= lb})
        rows.append(row)
    _emit_rows(rows, args, out)


def cmd_project(args, out):
    model = read_model(args.model)
    dense = _dense_of(model)
    proj = optimal_projections(dense)
    doc = {
        "pi_star": proj.pi_star,
        "max_weight": proj.max_weight,
        "structures": [[list(e) for e in s.sorted()] for s in proj.structures],
    }
    if args.exponent:
        doc["exponent"] = generalized_exponent(dense, args.mode, _solver_cfg(args), proj).as_dict()
    if args.format == "json":
        _emit_json(doc, out)
        return
    out.write(f"projection divergence: {format_prob(proj.pi_star)}\n")
    out.write(f"optimal structures: {len(proj.structures)}\n")
    for s in proj.structures:
        out.write(f"  {_edges_str(s.sorted())}\n")
    if args.exponent:
        e = doc["exponent"]
        out.write(f"generalized K ({args.mode}): {e['k_p']}\n")
        if e["dominant_nonedge"] is not None:
            out.write(f"dominant structure: {_edges_str(e['dominant_structure'])}\n")
            out.write(f"dominant non-edge: {_edges_str([e['dominant_nonedge']])}, "
                      f"replacement: {_edges_str([e['replacement']])}\n")
        for sw in e["excluded_swaps"]:
            out.write(f"excluded swap in {_edges_str(sw['structure'])}: "
                      f"{_edges_str([sw['edge']])} -> {_edges_str([sw['nonedge']])}\n")


def cmd_experiment(args, out):
    cfg = _solver_cfg(args)
    if args.name == "star4-rates":
        gammas = args.gamma_list or list(experiments.DEFAULT_GAMMAS)
        rows = [r.as_row() for r in experiments.star4_rates(gammas, cfg=cfg)]
    elif args.name == "star4-sim":
        ns = args.n_list or list(experiments.DEFAULT_SIM_NS)
        rows = experiments.star4_sim(args.gamma, ns, args.runs, args.seed, args.workers, cfg)
    else:
        ns = args.n_list or list(experiments.DEFAULT_EMPIRICAL_NS)
        rows = experiments.star4_empirical(args.gamma, ns, args.seeds, seed=args.seed, cfg=cfg,
                                           full=args.full)
    _emit_rows(rows, args, out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chowliu", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("learn", help="Chow-Liu tree from a sample file")
    p.add_argument("samples")
    p.add_argument("-o", "--out", help="write the learned tree model here")
    p.add_argument("--alphabet", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("exponent", help="error exponent of a tree model")
    p.add_argument("model")
    p.add_argument("--mode", choices=("exact", "approx"), default="exact")
    _add_common(p, solver=True)
    p.set_defaults(func=cmd_exponent)

    p = sub.add_parser("crossover", help="crossover rate of one (edge, non-edge) pair")
    p.add_argument("model")
    p.add_argument("--edge", type=_pair_arg, required=True)
    p.add_argument("--nonedge", type=_pair_arg, required=True)
    p.add_argument("--mode", choices=("exact", "approx", "empirical"), default="exact")
    p.add_argument("--samples", help="sample file for empirical mode")
    p.add_argument("--smoothing", action="store_true", help="add 1/(2n) to empty empirical cells")
    _add_common(p, solver=True)
    p.set_defaults(func=cmd_crossover)

    p = sub.add_parser("simulate", help="Monte Carlo error probability")
    p.add_argument("model")
    p.add_argument("--n", type=_int_list, required=True, help="sample sizes, comma-separated")
    p.add_argument("--runs", type=int, default=100_000)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--bound-mode", choices=("exact", "approx", "none"), default="exact",
                   help="exponent used for the finite-sample bound column")
    _add_common(p, solver=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("project", help="optimal tree projections of a dense model")
    p.add_argument("model")
    p.add_argument("--exponent", action="store_true", help="append the generalized exponent")
    p.add_argument("--mode", choices=("exact", "approx"), default="approx")
    _add_common(p, solver=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("experiment", help="four-node star sweeps as CSV")
    p.add_argument("name", choices=("star4-rates", "star4-sim", "star4-empirical"))
    p.add_argument("--gamma-list", type=_float_list, default=None)
    p.add_argument("--gamma", type=float, default=0.2)
    p.add_argument("--n-list", type=_int_list, default=None)
    p.add_argument("--runs", type=int, default=100_000)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--full", action="store_true", help="include the n = 8e6 empirical row")
    _add_common(p, solver=True)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.seed is None:
            args.seed = _default_seed()
        buf = io.StringIO()
        args.func(args, buf)
        out.write(buf.getvalue())
        return EXIT_OK
    except UsageError as exc:
        print(f"chowliu: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, OSError) as exc:
        print(f"chowliu: cannot read input: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SolverNonConvergenceError as exc:
        print(f"chowliu: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValidationError, ChowLiuError) as exc:
        print(f"chowliu: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
