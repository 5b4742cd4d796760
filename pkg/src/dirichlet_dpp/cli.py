"""Command-line interface: ``dirichlet-dpp {sample,project,integrate,variance,study}``."""

from __future__ import annotations

import argparse
import json
import sys
import tempfile
from pathlib import Path

from . import __version__
from .estimator import (
    Estimate,
    FourierTable,
    RectangleDomain,
    ci_clt,
    estimate_mean,
    estimate_rectangle,
    exact_variance_var1,
    exact_variance_var2,
    lift_table,
    sigma2_hat,
)
from .experiments import (
    PlanError,
    convergence_result,
    read_plan,
    run_projection_study,
    write_study,
)
from .kernel import FactorVector, SubsetSelector, balanced_factorization
from .sampler import (
    SamplerConfig,
    SamplerError,
    batch_sample,
    project_pattern,
    read_pattern,
    sample_pattern,
    write_pattern,
)
from .testfuncs import integrand, parse_spec


class CliError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _design(args) -> FactorVector:
    if args.factors is not None:
        if args.N is not None or args.d is not None:
            raise CliError("give either --factors or --N/--d, not both")
        return FactorVector(args.factors)
    if args.N is None or args.d is None:
        raise CliError("need --factors or both --N and --d")
    return balanced_factorization(args.N, args.d)


def _add_design(p: argparse.ArgumentParser) -> None:
    p.add_argument("--N", type=int, help="number of points (with --d)")
    p.add_argument("--d", type=int, help="dimension (with --N)")
    p.add_argument("--factors", type=_int_list, help="explicit factor vector, e.g. 5,5,2,2,1,1")


def cmd_sample(args) -> int:
    fv = _design(args)
    out = Path(args.output)
    if args.replications == 1:
        cfg = SamplerConfig(args.seed, args.max_rejections)
        pattern, _ = sample_pattern(fv, cfg)
        write_pattern(out, pattern)
        print(f"wrote {pattern.N} points in dimension {pattern.d} to {out}")
        return 0
    patterns = batch_sample(fv, args.seed, args.replications, threads=args.threads,
                            max_rejections_per_point=args.max_rejections)
    width = len(str(args.replications - 1))
    for r, p in enumerate(patterns):
        write_pattern(out.with_name(f"{out.stem}_{r:0{width}d}{out.suffix}"), p)
    print(f"wrote {len(patterns)} patterns of {fv.N} points to {out.parent}")
    return 0


def cmd_project(args) -> int:
    p = read_pattern(args.pattern)
    q = project_pattern(p, SubsetSelector(args.selector))
    write_pattern(args.output, q)
    print(f"wrote projection on {list(q.selector.indices)} to {args.output}")
    return 0


def _function(text: str, iota: int):
    has_dim = any(tok.split("=", 1)[0].strip() in ("d", "dim", "iota")
                  for tok in text.replace(",", " ").split())
    spec = parse_spec(text) if has_dim else parse_spec(text, dim=iota)
    if spec.dim != iota:
        raise CliError(f"function takes {spec.dim} coordinates but the estimate uses {iota}")
    return spec


def cmd_integrate(args) -> int:
    p = read_pattern(args.pattern)
    sel = SubsetSelector(args.selector) if args.selector else p.selector
    iota = sel.iota if sel is not None else p.d
    f = integrand(_function(args.function, iota))
    if (args.lower is None) != (args.upper is None):
        raise CliError("--lower and --upper go together")
    if args.lower is not None:
        est = estimate_rectangle(f, p, sel, RectangleDomain(args.lower, args.upper))
    else:
        est = estimate_mean(f, p, sel)
    if args.table:
        tbl = FourierTable.read_csv(args.table)
        if tbl.iota != iota:
            raise CliError(f"coefficient table has dimension {tbl.iota}, estimate uses {iota}")
        full = SubsetSelector(est.I)
        s2 = sigma2_hat(lift_table(tbl, full, p.d), p.factors)
        est = Estimate(est.value, est.N, est.d, est.I, s2, None, est.seed)
        est = ci_clt(est, args.level)
    text = est.to_json()
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_variance(args) -> int:
    fv = _design(args)
    tbl = FourierTable.read_csv(args.table)
    sel = SubsetSelector(args.selector) if args.selector else SubsetSelector.full(tbl.iota)
    if sel.iota != tbl.iota:
        raise CliError(f"selector has {sel.iota} coordinates, table has {tbl.iota}")
    sel.check(fv.d)
    lifted = lift_table(tbl, sel, fv.d)
    out = {
        "factors": list(fv.factors),
        "N": fv.N,
        "d": fv.d,
        "I": list(sel.indices),
        "var2": exact_variance_var2(lifted, fv),
        "sigma2_hat": sigma2_hat(lifted, fv),
    }
    if not args.skip_var1:
        out["var1"] = exact_variance_var1(lifted, fv)
    print(json.dumps(out, indent=2))
    return 0


def cmd_study(args) -> int:
    # validation happens entirely inside read_plan, before any sampling
    plan = read_plan(args.plan)
    if args.threads is not None:
        plan.threads = args.threads
    if plan.study == "projection":
        results = run_projection_study(plan)
    else:
        results = [convergence_result(plan)]
    csv_path, json_path = Path(args.out_csv), Path(args.out_json)
    # write both files to temporaries first so a failure leaves nothing behind
    tmp_csv = Path(tempfile.mkstemp(dir=csv_path.parent, suffix=".tmp")[1])
    tmp_json = Path(tempfile.mkstemp(dir=json_path.parent, suffix=".tmp")[1])
    try:
        write_study(results, plan, tmp_csv, tmp_json)
        tmp_csv.replace(csv_path)
        tmp_json.replace(json_path)
    finally:
        for t in (tmp_csv, tmp_json):
            t.unlink(missing_ok=True)
    for res in results:
        reg = res.regression
        lvl, lo, hi = reg.slope_ci
        flag = "pass" if reg.within_tolerance else "FAIL"
        print(f"iota={res.iota} slope={reg.slope:.6f} CI{lvl:.0%}=[{lo:.4f}, {hi:.4f}] "
              f"expected={reg.expected_slope:.4f} {flag}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dirichlet-dpp",
                                 description="Dirichlet DPP sampling and Monte Carlo integration")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a point pattern")
    _add_design(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("-o", "--output", default="pattern.csv")
    p.add_argument("--replications", type=int, default=1,
                   help="draw several patterns, written as <stem>_<r>.csv")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--max-rejections", type=int, default=None)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("project", help="keep a subset of coordinates")
    p.add_argument("pattern")
    p.add_argument("--selector", type=_int_list, required=True, help="1-based coordinates, e.g. 1,3")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("integrate", help="estimate an integral from a pattern")
    p.add_argument("pattern")
    p.add_argument("--function", required=True, help='e.g. "family=gamma_norm gamma=0.75"')
    p.add_argument("--selector", type=_int_list)
    p.add_argument("--lower", type=_float_list)
    p.add_argument("--upper", type=_float_list)
    p.add_argument("--table", help="coefficient CSV of the integrand, enables the interval")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("variance", help="exact finite-N variance from a coefficient table")
    _add_design(p)
    p.add_argument("--table", required=True)
    p.add_argument("--selector", type=_int_list)
    p.add_argument("--skip-var1", action="store_true", help="omit the quadratic-cost pair sum")
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("study", help="run a convergence or projection study from a plan file")
    p.add_argument("plan")
    p.add_argument("--out-csv", default="study.csv")
    p.add_argument("--out-json", default="study.json")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_study)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PlanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SamplerError as exc:
        print(f"sampler error: {exc}", file=sys.stderr)
        return 3
    except (CliError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
