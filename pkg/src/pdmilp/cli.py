"""Command-line entry point: ``pdmilp <command> [--key value ...]``.

Commands: gen, restrict, run, solve-central, check, compare.
Exit codes: 0 success, 1 usage or input error, 2 solver fault.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .agent import AlgoConfig, StepSchedule
from .analysis import (
    BATCH_COLUMNS,
    bound_report,
    check_feasibility,
    compare_methods,
    solve_master_central,
    solve_milp_central,
    solve_restricted_lp_central,
    _split,
)
from .hull import HullCapExceeded
from .lp import LpCyclingError
from .milp import EnumerationCapError, MilpNodeLimitError
from .model import (
    GeneratorParams,
    InstanceFormatError,
    generate_random,
    load_instance,
    save_instance,
    solution_from_dict,
    solution_to_dict,
    validate_instance,
)
from .network import max_consensus, parse_graph_spec, run_rounds, substream
from .restriction import restriction_report

log = logging.getLogger("pdmilp")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2

SOLVER_FAULTS = (LpCyclingError, MilpNodeLimitError, EnumerationCapError, HullCapExceeded, RuntimeError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _range(text: str):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    if lo > hi:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return lo, hi


def _vector(text: str):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def derived_seed(seed: int, name: str) -> int:
    """Integer seed of the named sub-stream of the master ``--seed``."""
    return int(substream(seed, name).integers(2**31 - 1))


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _finite(v):
    v = float(v)
    return v if np.isfinite(v) else None


# -- argument groups ----------------------------------------------------------


def _add_generator_flags(p, required=False):
    g = p.add_argument_group("generator")
    d = GeneratorParams()
    g.add_argument("--n", type=int, default=None if required else d.N, help="number of agents")
    g.add_argument("--s", type=int, default=d.S, help="number of coupling rows")
    g.add_argument("--b-range", type=_range, default=d.resource_range, help="resource entries lo:hi")
    g.add_argument("--lhs-range", type=_range, default=d.lhs_range, help="local matrix entries lo:hi")
    g.add_argument("--rhs-range", type=_range, default=d.rhs_range, help="local rhs entries lo:hi")
    g.add_argument("--cost-range", type=_range, default=d.cost_weight_range, help="cost weight entries lo:hi")
    g.add_argument("--coupling-range", type=_range, default=d.coupling_range, help="coupling entries lo:hi")
    g.add_argument("--local-rows", type=int, default=d.local_rows)
    g.add_argument("--local-cols", type=int, default=d.local_cols)
    g.add_argument("--box", type=float, default=d.box, help="box bound: -box <= x <= box")
    g.add_argument("--n-integer", type=int, default=d.n_integer, help="leading integer coordinates per agent")


def _generator_params(args, seed: int) -> GeneratorParams:
    return GeneratorParams(
        N=args.n, S=args.s, seed=seed, local_rows=args.local_rows, local_cols=args.local_cols,
        lhs_range=args.lhs_range, rhs_range=args.rhs_range, cost_weight_range=args.cost_range,
        coupling_range=args.coupling_range, resource_range=args.b_range, box=args.box, n_integer=args.n_integer,
    )


def _load(path):
    p = Path(path)
    if not p.exists():
        raise UsageError(f"file not found: {p}")
    try:
        return load_instance(p)
    except InstanceFormatError as exc:
        raise UsageError(f"{p}: {exc}") from None


def _instance_from_args(args):
    if getattr(args, "instance", None):
        return _load(args.instance)
    if args.n is None:
        raise UsageError("give --instance or generator flags (--n ...)")
    return generate_random(_generator_params(args, derived_seed(args.seed, "generator")))


# -- commands -----------------------------------------------------------------


def cmd_gen(args) -> int:
    params = _generator_params(args, derived_seed(args.seed, "generator"))
    inst = generate_random(params)
    problems = validate_instance(inst)
    if problems:
        raise RuntimeError("generated instance failed validation: " + "; ".join(problems))
    save_instance(inst, args.output)
    log.info("wrote %s (N=%d, S=%d)", args.output, inst.N, inst.S)
    print(json.dumps({"output": str(args.output), "N": inst.N, "S": inst.S, "generator_seed": params.seed}))
    return EXIT_OK


def cmd_restrict(args) -> int:
    inst = _load(args.instance)
    rep = restriction_report(inst, jobs=args.jobs)
    graph = parse_graph_spec(args.graph, inst.N, seed=derived_seed(args.seed, "graph"))
    rounds = graph.diameter()
    spread = max_consensus(rep.terms, graph, rounds)
    out = rep.to_dict()
    out["graph"] = graph.to_dict()
    out["max_consensus_rounds"] = rounds
    out["max_consensus_exact"] = bool(np.all(spread == rep.terms.max(initial=0.0)))
    _write_json(Path(args.output), out)
    print(json.dumps({"sigma_asy": rep.sigma_asy, "sigma_baseline": rep.sigma_baseline.tolist(),
                      "zero_case": rep.zero_case, "max_consensus_rounds": rounds}))
    return EXIT_OK


def _sigma_for(args, inst, rep):
    mode = args.sigma_mode or ("asy_plus_delta" if args.delta > 0 else "asy")
    if mode == "asy":
        return mode, np.full(inst.S, rep.sigma_asy)
    if mode == "asy_plus_delta":
        return mode, np.full(inst.S, rep.sigma_asy + args.delta)
    if mode == "baseline":
        return mode, rep.sigma_baseline.copy()
    if args.sigma is None:
        raise UsageError("--sigma-mode custom needs --sigma v1,v2,...")
    sig = np.asarray(args.sigma, dtype=float)
    if sig.size == 1:
        sig = np.full(inst.S, sig[0])
    if sig.size != inst.S or np.any(sig < 0):
        raise UsageError(f"--sigma needs {inst.S} nonnegative entries")
    return mode, sig


def cmd_run(args) -> int:
    if args.delta < 0:
        raise UsageError("--delta must be >= 0")
    inst = _instance_from_args(args)
    try:
        config = AlgoConfig(
            M=args.M, delta=args.delta, step=StepSchedule(args.alpha0, args.gamma), mode=args.mode,
            inner_iters=args.inner_iters, inner_step=args.inner_step, eps=args.eps,
            recovery_every=args.recovery_every,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    graph = parse_graph_spec(args.graph, inst.N, seed=derived_seed(args.seed, "graph"))
    rep = restriction_report(inst)
    mode, sigma = _sigma_for(args, inst, rep)
    t0 = time.perf_counter()
    trace = run_rounds(inst, graph, sigma, config, args.rounds, sigma_asy=rep.sigma_asy, jobs=args.jobs)
    log.info("%d rounds in %.2fs", args.rounds, time.perf_counter() - t0)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.csv").write_text(trace.to_csv())
    bounds = None
    if args.bounds:
        try:
            bounds = bound_report(inst, trace, rep.sigma_asy, args.delta, eps=args.eps,
                                  node_limit=args.node_limit).to_dict()
        except SOLVER_FAULTS as exc:
            log.warning("bound report skipped: %s", exc)
            bounds = {"error": str(exc)}
    last = trace.rows[-1]
    summary = {
        "feasible_from": trace.feasible_from(),
        "below_restriction_from": trace.below_restriction_from(),
        "final_feasible": last.feasible,
        "final_milp_cost": _finite(last.milp_cost),
        "final_lp_cost_sum": _finite(last.lp_cost_sum),
        "conservation_error": trace.conservation_error(),
    }
    doc = {
        "version": __version__,
        "argv": args.argv,
        "instance": str(args.instance) if args.instance else {"generator": inst.generator},
        "config": trace.config,
        "graph": trace.graph,
        "sigma_mode": mode,
        "sigma": sigma.tolist(),
        "restriction": rep.to_dict(),
        "summary": summary,
        "warnings": trace.warnings,
        "final_solution": None if trace.final is None else solution_to_dict(trace.final),
        "bounds": bounds,
    }
    _write_json(out / "run.json", doc)
    print(json.dumps(summary))
    return EXIT_OK


def cmd_solve_central(args) -> int:
    inst = _load(args.instance)
    sigma = 0.0 if args.sigma is None else np.asarray(args.sigma, dtype=float)
    ref = solve_milp_central(inst, node_limit=args.node_limit)
    lp = solve_restricted_lp_central(inst, sigma, check_uniqueness=True)
    doc = {
        "J_milp": _finite(ref.cost) if ref.optimal else None,
        "milp_status": ref.status,
        "milp_nodes": ref.node_count,
        "x_milp": None if not ref.optimal else [x.tolist() for x in _split(inst, ref.x)],
        "restricted_lp_status": lp.status,
        "restricted_lp_cost": _finite(lp.cost) if lp.feasible else None,
        "relaxed_hull": lp.relaxed_hull,
        "nonunique_flag": lp.nonunique,
        "sigma": lp.sigma.tolist(),
    }
    if lp.feasible:
        master = solve_master_central(inst, sigma)
        doc["y_master"] = [y.tolist() for y in master.y]
        doc["p_master"] = master.p.tolist()
        doc["z_lp"] = [z.tolist() for z in lp.z]
        doc["duals"] = lp.duals.tolist()
    _write_json(Path(args.output), doc)
    print(json.dumps({k: doc[k] for k in ("J_milp", "milp_status", "restricted_lp_status", "restricted_lp_cost")}))
    return EXIT_OK


def cmd_check(args) -> int:
    inst = _load(args.instance)
    p = Path(args.solution)
    if not p.exists():
        raise UsageError(f"file not found: {p}")
    try:
        sol = solution_from_dict(json.loads(p.read_text()))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{p}: malformed solution file ({exc})") from None
    try:
        verdict = check_feasibility(inst, sol, tol=args.tol)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    r = verdict.report
    print(json.dumps({
        "verdict": "feasible" if verdict.feasible else "infeasible",
        "cost": r.cost,
        "coupling_slack": r.coupling_slack.tolist(),
        "local_feasible": list(r.local_feasible),
        "integer_ok": list(r.integer_ok),
    }))
    return EXIT_OK


def cmd_compare(args) -> int:
    params = _generator_params(args, derived_seed(args.seed, "generator"))
    rows = compare_methods(params, args.count, jobs=args.jobs, node_limit=args.node_limit)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*BATCH_COLUMNS, "error"])
        for r in rows:
            w.writerow([_cell(v) for v in r.as_list()] + [r.error])
    n = len(rows)
    summary = {
        "instances": n,
        "ours_applicable": sum(bool(r.ours_applicable) for r in rows) / n if n else None,
        "baseline_applicable": sum(bool(r.baseline_applicable) for r in rows) / n if n else None,
        "gap_present": sum(bool(r.gap_present) for r in rows) / n if n else None,
        "faults": sum(bool(r.error) for r in rows),
    }
    print(json.dumps(summary))
    return EXIT_OK


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return "" if np.isnan(v) else repr(float(v))
    return v


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pdmilp", description="Distributed primal decomposition for coupled MILPs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed for every random component")
    common.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on it)")
    verb = common.add_mutually_exclusive_group()
    verb.add_argument("--quiet", action="store_true", help="only errors on stderr")
    verb.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    p = sub.add_parser("gen", parents=[common], help="generate a random instance")
    _add_generator_flags(p)
    p.add_argument("-o", "--output", required=True, type=Path)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("restrict", parents=[common], help="compute restrictions")
    p.add_argument("--instance", required=True)
    p.add_argument("--graph", default="complete", help="path|cycle|complete|erdos:<p> (max-consensus rounds)")
    p.add_argument("-o", "--output", default="restriction.json")
    p.set_defaults(func=cmd_restrict)

    p = sub.add_parser("run", parents=[common], help="simulate the distributed algorithm")
    p.add_argument("--instance", default=None)
    _add_generator_flags(p, required=True)
    p.add_argument("--graph", default="complete", help="path|cycle|complete|erdos:<p>")
    p.add_argument("--rounds", type=int, default=1000)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--sigma-mode", choices=("asy", "asy_plus_delta", "baseline", "custom"), default=None)
    p.add_argument("--sigma", type=_vector, default=None, help="custom restriction v1,v2,...")
    p.add_argument("--M", type=float, default=None, help="penalty weight (default 10 N max ||c_i||_1)")
    p.add_argument("--alpha0", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.8)
    p.add_argument("--mode", choices=("exact_hull", "inner_subgradient"), default="exact_hull")
    p.add_argument("--inner-iters", type=int, default=200)
    p.add_argument("--inner-step", type=float, default=None)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--recovery-every", type=int, default=1)
    p.add_argument("--bounds", action="store_true", help="evaluate suboptimality bounds (needs J^MILP)")
    p.add_argument("--node-limit", type=int, default=200_000)
    p.add_argument("-o", "--output", default="out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("solve-central", parents=[common], help="centralized reference costs")
    p.add_argument("--instance", required=True)
    p.add_argument("--sigma", type=_vector, default=None)
    p.add_argument("--node-limit", type=int, default=200_000)
    p.add_argument("-o", "--output", default="reference.json")
    p.set_defaults(func=cmd_solve_central)

    p = sub.add_parser("check", parents=[common], help="validate a solution file")
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("compare", parents=[common], help="batch comparison of restrictions")
    _add_generator_flags(p)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--node-limit", type=int, default=200_000)
    p.add_argument("-o", "--output", default="batch.csv")
    p.set_defaults(func=cmd_compare)
    return parser


_NEGATIVE_VALUE = re.compile(r"^-\d|^-\.\d")


def _join_negative_values(argv: list) -> list:
    """``--b-range -600:-500`` -> ``--b-range=-600:-500`` so argparse keeps it as a value."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) and _NEGATIVE_VALUE.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_join_negative_values(argv))
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        args.argv = argv
        level = logging.ERROR if args.quiet else logging.DEBUG if args.verbose else logging.INFO
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SOLVER_FAULTS as exc:
        print(f"solver fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"solver fault: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
