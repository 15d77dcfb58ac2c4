"""Command line front end.

Exit codes: 0 success, 2 invalid input, 3 matrix not scalable, 4 iteration cap.
"""

import argparse
import json
import sys
import warnings

import numpy as np

from .adversarial import (ConstructionError, ProvenanceError, SlowMatrixParams,
                          build_slow_matrix, build_block_slow_matrix, equality_class_report,
                          recover_layout, recover_params, sum_relation_residuals,
                          trace_key_entries, verify_key_recursions)
from .density import density_grid, density_profile
from .engine import NotScalableError, NotScalableWarning, Status, run, run_fixed
from .experiments import ExperimentKind, ExperimentSpec, run_experiment
from .matrix import InvalidMatrixError, deviation, read_matrix, write_matrix
from .permanent import (EstimatorInputError, PermanentEstimate, estimate_permanent,
                        permanent_is_zero)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_SCALABLE = 3
EXIT_CAP = 4

# numeric flag values are fixed by the command-line contract; descriptive
# names are accepted as aliases
CONSTRUCTIONS = {"4.1": "slow", "4.3": "block-slow", "slow": "slow",
                 "block-slow": "block-slow"}
CHECKS = {"lemma4.2": "equality_classes", "lemma4.4": "sum_relations",
          "condition4.5": "key_recursions", "equality-classes": "equality_classes",
          "sum-relations": "sum_relations", "key-recursions": "key_recursions"}


class InputError(Exception):
    pass


def _finite(obj):
    # strict JSON has no inf/nan; report them as null
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not np.isfinite(obj):
        return None
    return obj


def _emit(obj):
    json.dump(_finite(obj), sys.stdout, indent=2, default=_jsonable, allow_nan=False)
    sys.stdout.write("\n")


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON serializable: {type(v)}")


def _load(path):
    try:
        return read_matrix(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except InvalidMatrixError as exc:
        raise InputError(f"{path}: {exc}") from exc


def cmd_scale(args):
    A = _load(args.inp)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotScalableWarning)
        res = run(A, args.eps, norm=args.norm, max_iters=args.max_iters,
                  trace=bool(args.trace), trace_every=args.trace_every)
    if args.trace:
        res.trace.to_csv(args.trace)
    if args.out:
        write_matrix(res.final, args.out)
    dev = deviation(res.final)
    _emit({"status": res.status.value, "iterations": res.iterations, "error": res.error,
           "norm": res.norm, "eps": res.eps, "l1": dev.l1, "l2": dev.l2,
           "max_deviation": dev.max_deviation})
    if res.status == Status.NOT_SCALABLE:
        return EXIT_NOT_SCALABLE
    if res.status == Status.ITERATION_CAP:
        return EXIT_CAP
    return EXIT_OK


def cmd_density(args):
    A = _load(args.inp)
    if A.shape[0] != A.shape[1]:
        raise InputError("density needs a square matrix")
    if A.max() > 1.0:
        raise InputError("entries exceed 1; normalize the matrix first")
    if args.rho_grid:
        grid = density_grid(A)
        out = grid[0].to_dict()
        out["grid"] = [{"rho": p.rho, "gamma_max": p.gamma_max} for p in grid]
    else:
        if not 0.0 < args.rho <= 1.0:
            raise InputError("--rho must lie in (0, 1]")
        out = density_profile(A, args.rho).to_dict()
    _emit(out)
    return EXIT_OK


def cmd_construct(args):
    try:
        if CONSTRUCTIONS[args.theorem] == "slow":
            if args.n is None:
                raise InputError("--n is required for the basic construction")
            A = build_slow_matrix(SlowMatrixParams(args.n, args.gamma, args.eps))
        else:
            if args.m is None:
                raise InputError("--m is required for the block construction")
            A = build_block_slow_matrix(args.m, args.gamma, args.eps)
    except ConstructionError as exc:
        raise InputError(str(exc)) from exc
    write_matrix(A, args.out)
    _emit({"theorem": args.theorem, "order": A.shape[0], "out": args.out})
    return EXIT_OK


def cmd_verify(args):
    A = _load(args.inp)
    try:
        lay = recover_layout(A)
        params = recover_params(A) if args.eps is None else \
            SlowMatrixParams(lay.n, lay.c / lay.n, args.eps)
    except (ProvenanceError, ConstructionError) as exc:
        raise InputError(str(exc)) from exc
    if CHECKS[args.which] == "key_recursions":
        trace, _ = trace_key_entries(A, iters=args.iters + 1)
        rep = verify_key_recursions(trace, params, args.iters)
        out = {"which": args.which, "passed": rep.passed,
               "first_violation": rep.first_violation}
        out.update(rep.to_dict())
        _emit(out)
        return EXIT_OK
    first = None
    failed_items = set()

    def obs(k, cur, r, c):
        nonlocal first
        if CHECKS[args.which] == "equality_classes":
            rep = equality_class_report(cur, lay, args.tol)
            bad = [name for name, ok in rep.items() if not ok]
        else:
            res = sum_relation_residuals(cur, lay.n)
            names = ("middle_row_h", "middle_row_h1", "upper_rows", "lower_rows")
            bad = [name for name, v in zip(names, res) if v > args.tol]
        if bad:
            failed_items.update(bad)
            if first is None:
                first = k

    run_fixed(A, args.iters, trace=False, observer=obs)
    _emit({"which": args.which, "passed": first is None, "first_violation": first,
           "checked_iterates": args.iters + 1, "failed_items": sorted(failed_items),
           "tol": args.tol})
    return EXIT_OK


def cmd_perm_exact(args):
    A = _load(args.inp)
    if A.shape[0] != A.shape[1]:
        raise InputError("permanent needs a square matrix")
    if A.shape[0] > 30:
        raise InputError("exact permanent is limited to n <= 30")
    est = PermanentEstimate.exact(A)
    _emit({"permanent": est.estimate, "log_permanent": est.log_estimate,
           "is_zero": permanent_is_zero(A)})
    return EXIT_OK


def cmd_perm_estimate(args):
    A = _load(args.inp)
    try:
        est = estimate_permanent(A, args.eps, args.delta, args.seed)
    except EstimatorInputError as exc:
        _emit({"error": exc.reason, "message": str(exc)})
        return EXIT_NOT_SCALABLE if exc.reason == "zero_permanent" else EXIT_INVALID
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    d = est.to_dict()
    _emit({k: d[k] for k in ("estimate", "log_estimate", "samples", "rel_half_width",
                             "scaled_max_deviation")})
    return EXIT_OK


def cmd_experiment(args):
    try:
        with open(args.spec) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read spec {args.spec}: {exc}") from exc
    if args.kind:
        d["kind"] = args.kind
    if args.out:
        d["out_path"] = args.out
    try:
        spec = ExperimentSpec.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid spec: {exc}") from exc
    rows = run_experiment(spec)
    bad = sum(1 for r in rows if r["status"] not in ("converged", "ok"))
    _emit({"kind": spec.kind.value, "rows": len(rows), "non_ok_rows": bad,
           "out": spec.out_path or None})
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="sinkhorn-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("scale", help="scale a matrix to near doubly stochastic form")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--norm", choices=("l1", "l2"), default="l1")
    s.add_argument("--max-iters", type=int, default=10**7)
    s.add_argument("--trace", help="write the per-iterate trace CSV here")
    s.add_argument("--trace-every", type=int, default=1)
    s.add_argument("--out", help="write the scaled matrix here")
    s.set_defaults(func=cmd_scale)

    s = sub.add_parser("density", help="density profile of a [0,1] matrix")
    s.add_argument("--in", dest="inp", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--rho", type=float)
    g.add_argument("--rho-grid", action="store_true")
    s.set_defaults(func=cmd_density)

    s = sub.add_parser("construct", help="build a slow-convergence matrix")
    s.add_argument("--theorem", choices=tuple(CONSTRUCTIONS), required=True)
    s.add_argument("--n", type=int)
    s.add_argument("--m", type=int)
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_construct)

    s = sub.add_parser("verify", help="check structural identities along the iteration")
    s.add_argument("--which", choices=tuple(CHECKS), required=True)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--iters", type=int, required=True)
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--eps", type=float, help="construction eps (default: recovered)")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("perm-exact", help="exact permanent (n <= 30)")
    s.add_argument("--in", dest="inp", required=True)
    s.set_defaults(func=cmd_perm_exact)

    s = sub.add_parser("perm-estimate", help="estimate the permanent of a dense 0-1 matrix")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.set_defaults(func=cmd_perm_estimate)

    s = sub.add_parser("experiment", help="run a parameter sweep")
    s.add_argument("--kind", choices=[k.value for k in ExperimentKind])
    s.add_argument("--spec", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NotScalableError as exc:
        print(f"not scalable: {exc}", file=sys.stderr)
        return EXIT_NOT_SCALABLE
    except (InvalidMatrixError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
