"""Command-line front end.

Three subcommands: `run` executes the tasks of a problem document, `reproduce`
does the same for a named catalog example, and `verify` replays the soundness
suite of one surrogate-bound theorem on catalog or randomized instances.

Exit codes: 0 all expectations met, 1 an expectation failed, 2 the document
did not parse (or an example/theorem id is unknown), 3 a task raised during
evaluation.  JSON report to stdout or --out; CSV shell curves per rate
estimate to --curves-dir; rendered figures to --figures-dir.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import catalog, report as report_mod
from .bounds import (
    BoundReport,
    SUITE_IDS,
    composition_bound,
    perturbation_bound,
    sms_from_approx,
    sms_from_prederivative,
    smooth_kernel_check,
    soundness_suite,
)
from .certify import (
    Certificate,
    DEFAULT_TAU,
    certify_sms,
    isolated_calmness_via_inverse,
    sharp_min_check,
)
from .convexity import (
    MaxAffineFn,
    intrad_info,
    sharp_min_convex,
    sms_convex_scalarization,
    sms_frechet_scalarization,
)
from .geneq import (
    GenEqProblem,
    convex_scalarized_geneq_bound,
    isolated_calmness_bound,
    single_valued_field_bound,
    trace_solution_map,
)
from .mappings import Fan, LinearOp, PHMapping, alpha0_ph_info, alpha_fan_info, alpha_linear_info, beta_linear
from .problem import ProblemError, ProblemSpec, Task, parse_problem
from .rates import (
    DEFAULT_SCHEDULE,
    RateEstimate,
    SamplingSchedule,
    calmness_modulus_sv,
    descent_rate,
    displacement_rate,
    oracle_rate_grid,
)

__all__ = ["main", "run_document", "THEOREM_TOKENS"]

THEOREM_TOKENS = {
    "thm3.1": "composition-chain",
    "thm3.2": "calm-perturbation",
    "thm4.1": "ph-approximation",
    "thm4.2": "fan-prederivative",
    "cor4.1": "smooth-kernel",
}

_DEFAULT_RTOL = 0.05


@dataclass
class _RunContext:
    spec: ProblemSpec
    schedule: SamplingSchedule
    skip_eval_errors: bool = False
    assume_eps: Optional[float] = None

    @property
    def mappings(self) -> dict:
        return self.spec.mappings

    @property
    def anchors(self) -> dict:
        return self.spec.anchors


def _vector(args: dict, anchors: dict, key: str, required: bool = True) -> Optional[np.ndarray]:
    if key in args:
        return np.asarray(args[key], dtype=float)
    if key in anchors:
        return np.asarray(anchors[key], dtype=float)
    if required:
        raise ProblemError(f"no {key} given (declare it in [anchor] or on the task)")
    return None


def _mapping(ctx: _RunContext, args: dict, key: str = "mapping"):
    if key not in args:
        raise ProblemError(f"task needs a {key!r} reference")
    return ctx.mappings[args[key]]


def _target(ctx: _RunContext, args: dict, m, xbar: np.ndarray) -> np.ndarray:
    ybar = _vector(args, ctx.anchors, "ybar", required=False)
    if ybar is not None:
        return ybar
    if getattr(m, "single_valued", False):
        return np.atleast_1d(m.value(xbar))
    return np.zeros(m.dim_out)


def _geneq_problem(ctx: _RunContext, args: dict) -> GenEqProblem:
    kwargs = dict(
        base=_mapping(ctx, args, "base"),
        field_map=_mapping(ctx, args, "field"),
        param_dim=args.get("param_dim", 1),
        pbar=tuple(_vector(args, ctx.anchors, "pbar")),
        xbar=tuple(_vector(args, ctx.anchors, "xbar")),
    )
    if "fan" in args:
        kwargs["fan"] = ctx.mappings[args["fan"]]
    for key in ("delta", "zeta"):
        if key in args:
            kwargs[key] = args[key]
    if "components" in args:
        kwargs["base_components"] = [ctx.mappings[c] for c in args["components"]]
    if args.get("cone") is not None:
        kwargs["cone"] = args["cone"]
    return GenEqProblem(**kwargs)


def _components(ctx: _RunContext, args: dict) -> list:
    if "components" in args:
        comps = [ctx.mappings[c] for c in args["components"]]
    elif "mapping" in args:
        comps = [ctx.mappings[args["mapping"]]]
    else:
        raise ProblemError("task needs 'components' (or a single max-affine 'mapping')")
    for comp in comps:
        if not isinstance(comp, MaxAffineFn):
            raise ProblemError("scalarization components must be max-affine mappings")
    return comps


def _run_alpha(ctx: _RunContext, args: dict):
    m = _mapping(ctx, args)
    count = args.get("count", 10_000)
    if isinstance(m, LinearOp):
        return alpha_linear_info(m, count=count, seed=ctx.schedule.seed)
    if isinstance(m, Fan):
        return alpha_fan_info(m, count=count, seed=ctx.schedule.seed)
    if isinstance(m, PHMapping):
        return alpha0_ph_info(m, count=count, seed=ctx.schedule.seed)
    raise ProblemError("alpha applies to linear, fan, and positively homogeneous mappings")


def _run_beta(ctx: _RunContext, args: dict):
    m = _mapping(ctx, args)
    if not isinstance(m, LinearOp):
        raise ProblemError("beta applies to linear mappings")
    value = beta_linear(m, count=args.get("count", 10_000), seed=ctx.schedule.seed)
    return {"value": value, "evidence": "sampled", "samples": args.get("count", 10_000)}


def run_task(ctx: _RunContext, task: Task):
    """Dispatch one task; returns the raw result object."""
    args = task.args
    op = task.op
    sched = ctx.schedule
    tau = args.get("tau", DEFAULT_TAU)

    if op in ("certify-sms", "isolated-calmness", "displacement-rate"):
        m = _mapping(ctx, args)
        xbar = _vector(args, ctx.anchors, "xbar")
        ybar = _target(ctx, args, m, xbar)
        if op == "certify-sms":
            return certify_sms(m, xbar, ybar, sched, tau, ctx.skip_eval_errors)
        if op == "isolated-calmness":
            return isolated_calmness_via_inverse(m, xbar, ybar, sched, tau, ctx.skip_eval_errors)
        return displacement_rate(m, xbar, ybar, sched, ctx.skip_eval_errors)
    if op == "descent-rate":
        return descent_rate(_mapping(ctx, args), _vector(args, ctx.anchors, "xbar"), sched, ctx.skip_eval_errors)
    if op == "calmness":
        return calmness_modulus_sv(_mapping(ctx, args), _vector(args, ctx.anchors, "xbar"), sched, ctx.skip_eval_errors)
    if op == "oracle-rate":
        m = _mapping(ctx, args)
        xbar = _vector(args, ctx.anchors, "xbar")
        return oracle_rate_grid(m, xbar, _target(ctx, args, m, xbar),
                                args.get("radius", sched.r0), args.get("resolution", 257))
    if op == "sharp-min":
        return sharp_min_check(_mapping(ctx, args), _vector(args, ctx.anchors, "xbar"), sched, tau)
    if op == "sharp-min-convex":
        comps = _components(ctx, args)
        if len(comps) != 1:
            raise ProblemError("sharp-min-convex takes exactly one max-affine mapping")
        return sharp_min_convex(comps[0], _vector(args, ctx.anchors, "xbar"), schedule=sched)
    if op == "alpha":
        return _run_alpha(ctx, args)
    if op == "beta":
        return _run_beta(ctx, args)
    if op == "composition-bound":
        inner = _mapping(ctx, args, "inner")
        outer = _mapping(ctx, args, "outer")
        xbar = _vector(args, ctx.anchors, "xbar")
        ybar = _vector(args, ctx.anchors, "ybar", required=False)
        if ybar is None:
            ybar = np.zeros(outer.dim_out)
        return composition_bound(inner, outer, xbar, ybar, sched, tau)
    if op == "perturbation-bound":
        base = _mapping(ctx, args, "base")
        g = _mapping(ctx, args, "perturbation")
        xbar = _vector(args, ctx.anchors, "xbar")
        ybar = _vector(args, ctx.anchors, "ybar", required=False)
        if ybar is None:
            ybar = np.zeros(base.dim_out)
        return perturbation_bound(base, g, xbar, ybar, sched, tau)
    if op == "eps-approx":
        return sms_from_approx(_mapping(ctx, args), _mapping(ctx, args, "h"),
                               _vector(args, ctx.anchors, "xbar"), sched, tau,
                               assume_eps=ctx.assume_eps)
    if op == "prederivative":
        return sms_from_prederivative(_mapping(ctx, args), _mapping(ctx, args, "fan"),
                                      _vector(args, ctx.anchors, "xbar"), args.get("delta", 0.5),
                                      sched, tau, assume_eps=ctx.assume_eps)
    if op == "smooth-kernel":
        return smooth_kernel_check(_mapping(ctx, args), _vector(args, ctx.anchors, "xbar"),
                                   sched, tau, fd_step=args.get("step", 1e-5))
    if op == "intrad":
        return intrad_info(_components(ctx, args), _vector(args, ctx.anchors, "xbar"),
                           args.get("cone"), directions=args.get("directions"), seed=sched.seed)
    if op == "sms-convex-scalarization":
        return sms_convex_scalarization(_components(ctx, args), _vector(args, ctx.anchors, "xbar"),
                                        args.get("cone"), sched,
                                        directions=args.get("directions"), tau=tau)
    if op == "sms-frechet-scalarization":
        return sms_frechet_scalarization(_mapping(ctx, args), _vector(args, ctx.anchors, "xbar"),
                                         directions=args.get("directions", 64), schedule=sched, tau=tau)
    if op == "geneq-isolated-calmness":
        return isolated_calmness_bound(_geneq_problem(ctx, args), sched, tau)
    if op == "geneq-single-valued-field":
        return single_valued_field_bound(_geneq_problem(ctx, args), sched)
    if op == "geneq-convex-scalarization":
        return convex_scalarized_geneq_bound(_geneq_problem(ctx, args), sched,
                                             directions=args.get("directions"))
    if op == "trace-solutions":
        samples = trace_solution_map(_geneq_problem(ctx, args))
        return {"solutions": [s.to_json_dict() for s in samples]}
    raise ProblemError(f"unknown op {op!r} in task")


def _principal_value(result) -> Optional[float]:
    if isinstance(result, Certificate):
        return result.modulus
    if isinstance(result, BoundReport):
        return result.bound
    if isinstance(result, RateEstimate):
        return result.extrapolated
    if hasattr(result, "value"):
        return float(result.value)
    if isinstance(result, dict) and "value" in result:
        return float(result["value"])
    return None


def _final_shell_min(result) -> Optional[float]:
    est = None
    if isinstance(result, RateEstimate):
        est = result
    elif isinstance(result, Certificate):
        est = result.rate
    return None if est is None else est.shell_min[-1]


def _close(value: float, expected: float, rtol: float) -> bool:
    return abs(value - expected) <= rtol * max(abs(expected), 1e-12)


def evaluate_expectations(task: Task, result) -> list:
    """Failure descriptions; empty means the task met its declared outcome."""
    args = task.args
    rtol = args.get("rtol", _DEFAULT_RTOL)
    failures = []
    gates = []

    def gate(label, value, expected, check):
        if value is None:
            gates.append(f"{label}: result carries no such value")
        elif not check(value, expected):
            gates.append(f"{label}: got {value!r}, wanted {expected!r} (rtol {rtol})")

    if "expect_value" in args:
        gate("expect_value", _principal_value(result), args["expect_value"],
             lambda v, e: _close(v, e, rtol))
    if "expect_modulus" in args:
        v = result.modulus if isinstance(result, Certificate) else None
        gate("expect_modulus", v, args["expect_modulus"], lambda v, e: _close(v, e, rtol))
    if "expect_measured" in args:
        v = result.measured if isinstance(result, BoundReport) else None
        gate("expect_measured", v, args["expect_measured"], lambda v, e: _close(v, e, rtol))
    if "expect_final_min_le" in args:
        gate("expect_final_min_le", _final_shell_min(result), args["expect_final_min_le"],
             lambda v, e: v <= e)

    expect = args.get("expect", "pass")
    if isinstance(result, Certificate):
        certified = result.verdict == "certified-numerically"
        if expect == "pass":
            if not certified:
                failures.append(f"expected a certified verdict, got {result.verdict}")
            return failures + gates
        return ["expected a non-certified verdict, got certified-numerically"] if certified else []
    if isinstance(result, BoundReport):
        ok = result.holds is True
        if expect == "pass":
            if not ok:
                failures.append(f"expected the bound to hold (holds={result.holds}, "
                                f"hypothesis_ok={result.hypothesis_ok})")
            return failures + gates
        return ["expected the bound to fail, but it holds"] if ok else []
    # verdict-free results: the value gates carry the whole expectation
    if expect == "pass":
        return gates
    return [] if gates else ["expected a value gate to fail, but all held"]


def run_document(text: str, schedule_override=None, seed_override=None,
                 skip_eval_errors: bool = False, assume_eps: Optional[float] = None):
    """Execute a document; returns (report dict, curves, exit code)."""
    spec = parse_problem(text)
    schedule = spec.schedule
    if schedule_override is not None:
        schedule = replace(schedule_override, seed=schedule.seed)
    if seed_override is not None:
        schedule = replace(schedule, seed=seed_override)
    ctx = _RunContext(spec, schedule, skip_eval_errors, assume_eps)

    entries, curves, timings = [], [], {}
    t_start = time.perf_counter()
    any_error = any_failure = False
    for task in spec.tasks:
        t0 = time.perf_counter()
        entry = {"id": task.task_id, "op": task.op, "expected": task.args.get("expect", "pass")}
        try:
            result = run_task(ctx, task)
        except ProblemError:
            raise
        except Exception as err:  # noqa: BLE001 - reported per task, exit 3
            any_error = True
            entry.update(status="error", failures=[f"{type(err).__name__}: {err}"], result=None)
            entries.append(entry)
            timings[task.task_id] = time.perf_counter() - t0
            continue
        failures = evaluate_expectations(task, result)
        if failures:
            any_failure = True
        entry.update(status="ok" if not failures else "expectation-failed",
                     failures=failures, result=report_mod.result_payload(result))
        entries.append(entry)
        for suffix, est in report_mod.iter_rate_estimates(result):
            curves.append((task.task_id, suffix, est))
        timings[task.task_id] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_start

    rep = report_mod.build_report(text, schedule, entries, timings)
    code = 3 if any_error else (1 if any_failure else 0)
    return rep, curves, code


def _verify_report(token: str, source: str, count: int, schedule: SamplingSchedule):
    suite = THEOREM_TOKENS.get(token, token)
    if suite not in SUITE_IDS:
        known = sorted(THEOREM_TOKENS) + list(SUITE_IDS)
        raise ProblemError(f"unknown theorem id {token!r}; known: {', '.join(known)}")
    t0 = time.perf_counter()
    if source == "catalog":
        reports = [catalog.suite_catalog_instance(suite, schedule)]
    else:
        reports = soundness_suite(suite, count=count, seed=schedule.seed, schedule=schedule)
    entries, curves = [], []
    any_failure = False
    for i, rep in enumerate(reports):
        failures = [] if rep.holds is True else [
            f"bound does not hold (holds={rep.holds}, hypothesis_ok={rep.hypothesis_ok})"
        ]
        if failures:
            any_failure = True
        task_id = f"{suite}-{i:03d}"
        entries.append({"id": task_id, "op": "verify", "expected": "pass",
                        "status": "ok" if not failures else "expectation-failed",
                        "failures": failures, "result": report_mod.result_payload(rep)})
        for suffix, est in report_mod.iter_rate_estimates(rep):
            curves.append((task_id, suffix, est))
    doc = f"verify {suite} source={source} count={len(reports)}\n"
    timings = {"total": time.perf_counter() - t0}
    return report_mod.build_report(doc, schedule, entries, timings), curves, (1 if any_failure else 0)


def _parse_schedule_flag(text: str) -> SamplingSchedule:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("--schedule wants r0,decay,K,N")
    try:
        r0, decay = float(parts[0]), float(parts[1])
        shells, points = int(parts[2]), int(parts[3])
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from None
    return SamplingSchedule(r0=r0, decay=decay, shells=shells, points=points)


def _add_common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--out", help="write the JSON report here instead of stdout")
    sub.add_argument("--curves-dir", help="write one CSV shell curve per rate estimate")
    sub.add_argument("--figures-dir", help="render one PNG shell profile per rate estimate")
    sub.add_argument("--seed", type=int, help="override the sampling seed")
    sub.add_argument("--schedule", type=_parse_schedule_flag, metavar="r0,decay,K,N",
                     help="override the sampling schedule (seed kept)")
    sub.add_argument("--skip-eval-errors", action="store_true",
                     help="skip sample points whose evaluation raises, recording them on the estimate")
    sub.add_argument("--assume-eps", type=float, metavar="X",
                     help="declared approximation defect for surrogate bounds (marked as assumed)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="subreg",
        description="Certify, refute, or quantify strong metric subregularity and isolated calmness.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="execute the tasks of a problem document")
    p_run.add_argument("document", help="path to the problem document")
    _add_common_flags(p_run)

    p_rep = subs.add_parser("reproduce", help="run a named catalog example")
    p_rep.add_argument("example", help="catalog example id, e.g. ex-F1")
    _add_common_flags(p_rep)

    p_ver = subs.add_parser("verify", help="replay a theorem soundness suite")
    p_ver.add_argument("theorem", help="theorem id (thm3.1, thm3.2, thm4.1, thm4.2, cor4.1)")
    p_ver.add_argument("--source", choices=("catalog", "random"), default="catalog")
    p_ver.add_argument("--count", type=int, default=100, help="instances when --source random")
    _add_common_flags(p_ver)
    return parser


def _emit(rep: dict, curves: list, args) -> None:
    text = report_mod.dumps(rep)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.curves_dir:
        report_mod.write_curves(curves, args.curves_dir)
    if args.figures_dir:
        report_mod.write_figures(curves, args.figures_dir)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            try:
                with open(args.document, "r", encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as err:
                print(f"subreg: cannot read document: {err}", file=sys.stderr)
                return 2
            rep, curves, code = run_document(text, args.schedule, args.seed,
                                             args.skip_eval_errors, args.assume_eps)
        elif args.command == "reproduce":
            try:
                text = catalog.document(args.example)
            except KeyError as err:
                print(f"subreg: {err.args[0]}", file=sys.stderr)
                return 2
            rep, curves, code = run_document(text, args.schedule, args.seed,
                                             args.skip_eval_errors, args.assume_eps)
        else:
            schedule = args.schedule if args.schedule is not None else DEFAULT_SCHEDULE
            if args.seed is not None:
                schedule = replace(schedule, seed=args.seed)
            rep, curves, code = _verify_report(args.theorem, args.source, args.count, schedule)
    except ProblemError as err:
        print(f"subreg: {err}", file=sys.stderr)
        return 2
    _emit(rep, curves, args)
    return code


if __name__ == "__main__":
    sys.exit(main())
