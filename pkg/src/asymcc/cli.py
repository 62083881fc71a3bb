"""Command-line driver.

Exit codes: 0 success, 1 a checked property failed, 2 usage or parameter
error, 3 input/output error. Every JSON report starts with a ``header``
holding the command, seed and parameters, and is written atomically.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

from . import __version__
from .analysis import (check_F_claims, check_phi_bound, check_pi_properties,
                       gap_report, random_interval_set, verify_cluster,
                       verify_decomposition, verify_local_guarantee)
from .errors import GuaranteeViolation, InstanceFormatError, InvalidParameter
from .instance import (atomic_write_text, dumps, gen_gap, gen_random, instance_to_dict, load,
                       save, save_clustering)
from .metrics import blob_metric, site_line_metric
from .params import MODES, PRACTICAL, STRICT, PartitionParams, beta_star
from .partition import cluster_instance, partition_metric
from .relaxation import FractionalSolution, SolverOptions, format_p, parse_p, solve_cp
from .rng import Xoshiro256

log = logging.getLogger("asymcc")

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


def _float_or_frac(s: str) -> float:
    if "/" in s:
        a, b = s.split("/", 1)
        return float(a) / float(b)
    return float(s)


def _float_list(s: str) -> list[float]:
    return [_float_or_frac(t) for t in s.split(",") if t.strip()]


def _p_list(s: str) -> list[float]:
    return [parse_p(t) for t in s.split(",") if t.strip()]


def _header(args, **extra) -> dict:
    h = {"command": args.cmd_path, "version": __version__}
    if getattr(args, "seed", None) is not None:
        h["seed"] = args.seed
    h.update(extra)
    return h


def _emit(args, doc: dict) -> None:
    text = dumps(doc)
    if getattr(args, "out", None):
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _check_paths(args) -> None:
    """Validate every path up front so no work is done for a doomed run."""
    for name in ("input", "x_in"):
        p = getattr(args, name, None)
        if p is not None and not Path(p).is_file():
            raise FileNotFoundError(f"input file not found: {p}")
    for name in ("out", "trace", "labels_out"):
        p = getattr(args, name, None)
        if p is not None:
            parent = Path(p).resolve().parent
            if not parent.is_dir() or not os.access(parent, os.W_OK):
                raise FileNotFoundError(f"output directory not writable: {parent}")


def _solver_opts(args) -> SolverOptions:
    return SolverOptions(max_iters=args.max_iters, step0=args.step0,
                         tol_residual=args.tol_residual, method=args.method)


def _params(args) -> PartitionParams:
    if args.beta is None:
        if args.mode == STRICT:
            return PartitionParams.from_beta(beta_star(args.q) / 2, args.R, args.q, STRICT)
        args.beta = 0.05
    return PartitionParams.from_beta(args.beta, args.R, args.q, args.mode)


def _space(args, params):
    if args.space == "sites":
        return site_line_metric(params, seed=args.metric_seed)
    return blob_metric(args.n, args.metric_seed)


# -- subcommands --------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.kind == "gap":
        _emit(args, instance_to_dict(gen_gap(args.alpha)))
        return EXIT_OK
    if not args.out:
        raise InvalidParameter("gen random writes two files and needs -o/--out")
    inst, planted = gen_random(args.n, args.alpha, args.k, args.flip, args.seed,
                               w_scale=args.w_scale)
    labels_out = args.labels_out or str(Path(args.out).with_suffix("")) + ".labels.json"
    save(inst, args.out)
    save_clustering(planted, labels_out)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = load(args.input)
    p = parse_p(args.p)
    sol = solve_cp(inst, p, _solver_opts(args))
    doc = {"header": _header(args, p=format_p(p), method=args.method), **sol.to_dict()}
    _emit(args, doc)
    return EXIT_OK


def _run_cluster(args):
    inst = load(args.input)
    x = None
    if args.x_in:
        x = FractionalSolution.from_dict(json.loads(Path(args.x_in).read_text())).x
    res = cluster_instance(inst, args.p, _solver_opts(args), mode=args.mode,
                           seed=args.seed, x=x,
                           trace=bool(getattr(args, "trace", None)))
    local = verify_local_guarantee(inst, res.solution.x, res.clustering, res.params)
    return inst, res, local


def cmd_cluster(args) -> int:
    inst, res, local = _run_cluster(args)
    doc = {
        "header": _header(args, p=format_p(parse_p(args.p)), mode=args.mode,
                          params=res.params.to_dict()),
        "labels": res.clustering.labels.tolist(),
        "n_clusters": res.clustering.n_clusters,
        "cp_objective": res.solution.objective,
        "disagreements": res.report.to_dict(),
        "local_checks": _local_summary(local),
    }
    if args.trace:
        atomic_write_text(args.trace, "".join(json.dumps(t) + "\n" for t in res.trace))
    _emit(args, doc)
    return EXIT_OK if local.passed else EXIT_VIOLATION


def _local_summary(local) -> dict:
    d = local.to_dict()
    d.pop("ratios")
    return d


def cmd_verify(args) -> int:
    return VERIFIERS[args.what](args)


def _verify_partitioner(args, fn) -> int:
    params = _params(args)
    view = _space(args, params)
    chk = fn(view, params, args.trials, args.seed, ratio_bound=args.ratio_bound)
    _emit(args, {"header": _header(args, params=params.to_dict(), space=args.space,
                                   n=view.size, metric_seed=args.metric_seed),
                 **chk.to_dict()})
    return EXIT_OK if chk.passed else EXIT_VIOLATION


def verify_cluster_cmd(args) -> int:
    return _verify_partitioner(args, verify_cluster)


def verify_decomposition_cmd(args) -> int:
    return _verify_partitioner(args, verify_decomposition)


def verify_claims_cmd(args) -> int:
    reports = []
    for b in _float_list(args.betas):
        params = PartitionParams.from_beta(b, args.R, args.q, PRACTICAL, check=False)
        reports.append(check_F_claims(params, args.grid, args.max_pairs, args.seed))
    ok = all(r.passed for r in reports)
    _emit(args, {"header": _header(args, q=args.q, R=args.R, grid=args.grid,
                                   max_pairs=args.max_pairs),
                 "passed": ok, "reports": [r.to_dict() for r in reports]})
    return EXIT_OK if ok else EXIT_VIOLATION


def verify_pi_cmd(args) -> int:
    rng = Xoshiro256(args.seed)
    total = None
    for i in range(args.sets):
        k = 1 + rng.randbelow(args.max_intervals)
        S = random_interval_set(rng, k, 0.0, 1.0)
        rep = check_pi_properties(S, args.samples, args.seed + 1 + i, domain=(0.0, 1.0))
        total = rep if total is None else total.merge(rep)
    _emit(args, {"header": _header(args, sets=args.sets, samples=args.samples,
                                   max_intervals=args.max_intervals),
                 **total.to_dict()})
    return EXIT_OK if total.passed else EXIT_VIOLATION


def verify_phi_cmd(args) -> int:
    """Strict-regime run: mu(S) >= R/2 and the growth bound at every light pivot."""
    params = _params(args)
    view = _space(args, params)
    light, failures, skipped, mu_min, mu_viol = 0, 0, 0, math.inf, 0
    for i in range(args.trials):
        sels = []
        try:
            partition_metric(view, params, Xoshiro256(args.seed + i), selections=sels)
        except GuaranteeViolation:
            mu_viol += 1
            continue
        for sel in sels:
            if sel.heavy:
                continue
            light += 1
            mu_min = min(mu_min, sel.mu_S)
            if sel.mu_S < params.R / 2:
                mu_viol += 1
            ph = check_phi_bound(view.restrict(sel.active), sel.pivot, params)
            skipped += ph.skipped
            failures += not ph.passed
    ok = failures == 0 and mu_viol == 0
    _emit(args, {"header": _header(args, params=params.to_dict(), n=view.size,
                                   metric_seed=args.metric_seed),
                 "passed": ok, "light_selections": light, "phi_failures": failures,
                 "phi_skipped": skipped, "mu_S_min": mu_min if light else None,
                 "mu_S_violations": mu_viol})
    return EXIT_OK if ok else EXIT_VIOLATION


def verify_local_cmd(args) -> int:
    inst, res, local = _run_cluster(args)
    _emit(args, {"header": _header(args, p=format_p(parse_p(args.p)), mode=args.mode,
                                   params=res.params.to_dict()),
                 **local.to_dict()})
    return EXIT_OK if local.passed else EXIT_VIOLATION


VERIFIERS = {
    "cluster": verify_cluster_cmd,
    "decomposition": verify_decomposition_cmd,
    "claims": verify_claims_cmd,
    "pi": verify_pi_cmd,
    "phi": verify_phi_cmd,
    "local": verify_local_cmd,
}


def cmd_gap(args) -> int:
    alphas = _float_list(args.alphas)
    for a in alphas:
        if not 0 < a <= 0.25:
            raise InvalidParameter(f"gap instances need alpha in (0, 1/4], got {a}")
    rep = gap_report(alphas, _p_list(args.ps), args.bruteforce_max_n)
    text = rep.to_csv()
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    if args.summary:
        atomic_write_text(args.summary, dumps({
            "header": _header(args, alphas=alphas, ps=args.ps),
            "slopes": rep.slopes, "expected": rep.expected,
            "max_feasibility_residual": rep.max_feasibility_residual}))
    return EXIT_OK


def cmd_bench(args) -> int:
    """Wall-clock per phase for one end-to-end run on a generated instance."""
    times = {}
    t0 = time.perf_counter()
    inst, _ = gen_random(args.n, args.alpha, args.k, args.flip, args.seed)
    times["generate"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    sol = solve_cp(inst, args.p, _solver_opts(args))
    times["solve"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    res = cluster_instance(inst, args.p, mode=args.mode, seed=args.seed, x=sol.x)
    times["partition"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    local = verify_local_guarantee(inst, sol.x, res.clustering, res.params)
    times["verify_local"] = time.perf_counter() - t0
    _emit(args, {"header": _header(args, n=args.n, alpha=args.alpha,
                                   p=format_p(parse_p(args.p)), mode=args.mode),
                 "seconds": times, "cp_objective": sol.objective,
                 "cost": res.report.norm(args.p), "local_passed": local.passed})
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _add_solver(p):
    p.add_argument("--method", choices=("conic", "subgradient"), default="conic")
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--step0", type=float, default=None)
    p.add_argument("--tol-residual", type=float, default=1e-6)


def _add_partition(p, trials=10_000, space="blobs", mode=PRACTICAL):
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--space", choices=("blobs", "sites"), default=space)
    p.add_argument("--metric-seed", type=int, default=0)
    p.add_argument("--beta", type=float, default=None,
                   help="r/R (default 0.05, or beta*(q)/2 in strict mode)")
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--R", type=_float_or_frac, default=1 / 3)
    p.add_argument("--mode", choices=MODES, default=mode)
    p.add_argument("--trials", type=int, default=trials)
    p.add_argument("--ratio-bound", type=float, default=100.0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="asymcc",
                                 description="l_p correlation clustering with asymmetric weights")
    ap.add_argument("--log-level", default="WARNING")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-o", "--out", default=None)

    g = sub.add_parser("gen", help="write an instance file")
    gsub = g.add_subparsers(dest="kind", required=True)
    gg = gsub.add_parser("gap", parents=[common])
    gg.add_argument("--alpha", type=_float_or_frac, required=True)
    gr = gsub.add_parser("random", parents=[common])
    gr.add_argument("--n", type=int, required=True)
    gr.add_argument("--alpha", type=_float_or_frac, required=True)
    gr.add_argument("--k", type=int, required=True)
    gr.add_argument("--flip", type=float, default=0.0)
    gr.add_argument("--w-scale", type=float, default=1.0)
    gr.add_argument("--labels-out", default=None)
    for p in (gg, gr):
        p.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", parents=[common], help="solve the convex relaxation")
    s.add_argument("-i", "--input", required=True)
    s.add_argument("-p", "--p", default="inf")
    _add_solver(s)
    s.set_defaults(func=cmd_solve)

    def add_cluster_args(p):
        p.add_argument("-i", "--input", required=True)
        p.add_argument("-p", "--p", default="inf")
        p.add_argument("--mode", choices=MODES, default=PRACTICAL)
        p.add_argument("--x-in", default=None, help="solution JSON to reuse instead of solving")
        _add_solver(p)

    c = sub.add_parser("cluster", parents=[common], help="solve and partition an instance")
    add_cluster_args(c)
    c.add_argument("--trace", default=None, help="write one JSON line per iteration")
    c.set_defaults(func=cmd_cluster)

    v = sub.add_parser("verify", help="property checks")
    vsub = v.add_subparsers(dest="what", required=True)
    for name in ("cluster", "decomposition"):
        vp = vsub.add_parser(name, parents=[common])
        _add_partition(vp)
    vc = vsub.add_parser("claims", parents=[common])
    vc.add_argument("--betas", default="0.2,0.1,0.05,0.01")
    vc.add_argument("--q", type=float, default=2.0)
    vc.add_argument("--R", type=_float_or_frac, default=1 / 3)
    vc.add_argument("--grid", type=int, default=2001)
    vc.add_argument("--max-pairs", type=int, default=None)
    vpi = vsub.add_parser("pi", parents=[common])
    vpi.add_argument("--sets", type=int, default=100)
    vpi.add_argument("--samples", type=int, default=1000)
    vpi.add_argument("--max-intervals", type=int, default=20)
    vphi = vsub.add_parser("phi", parents=[common])
    _add_partition(vphi, trials=20, space="sites", mode=STRICT)
    vl = vsub.add_parser("local", parents=[common])
    add_cluster_args(vl)
    for p in vsub.choices.values():
        p.set_defaults(func=cmd_verify)

    gp = sub.add_parser("gap", parents=[common], help="integrality-gap table (CSV)")
    gp.add_argument("--alphas", default="0.0625,0.015625,0.00390625,0.0009765625")
    gp.add_argument("--ps", default="1,2,inf")
    gp.add_argument("--bruteforce-max-n", type=int, default=10)
    gp.add_argument("--summary", default=None, help="also write slopes as JSON")
    gp.set_defaults(func=cmd_gap)

    b = sub.add_parser("bench", parents=[common], help="time each phase of one run")
    b.add_argument("--n", type=int, default=12)
    b.add_argument("--alpha", type=_float_or_frac, default=0.25)
    b.add_argument("--k", type=int, default=3)
    b.add_argument("--flip", type=float, default=0.1)
    b.add_argument("-p", "--p", default="inf")
    b.add_argument("--mode", choices=MODES, default=PRACTICAL)
    _add_solver(b)
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    args.cmd_path = " ".join(x for x in (args.cmd, getattr(args, "kind", None),
                                         getattr(args, "what", None)) if x)
    try:
        _check_paths(args)
        return args.func(args)
    except (InstanceFormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (InvalidParameter, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except GuaranteeViolation as e:
        print(f"guarantee violated: {e}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
