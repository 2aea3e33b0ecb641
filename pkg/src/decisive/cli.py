"""Command-line front end.

Exit codes: 0 success, 1 internal error, 2 invalid model or flags,
3 system not cycle-reset, 4 refinement cap or quadrature budget exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

from decisive.errors import (
    CapExceeded, DecisiveError, FormulaSyntaxError, ModelError, NotCycleReset,
    QuadratureBudgetExceeded, QuantModeViolation,
)

EXIT_OK, EXIT_INTERNAL, EXIT_INVALID, EXIT_NOT_CYCLE_RESET, EXIT_CAP = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def _resolve_model(arg: str) -> Path:
    p = Path(arg)
    if p.exists():
        return p
    from decisive.models import model_path
    try:
        return model_path(arg)
    except FileNotFoundError:
        raise UsageError(f"model file {arg!r} not found (nor a bundled model)") from None


def _positive(kind):
    def parse(text: str):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decisive", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, target: bool = False, target_required: bool = False):
        p.add_argument("model", help="model file, or the name of a bundled model")
        p.add_argument("--json", metavar="PATH", help="also write the JSON report to PATH ('-' for stdout)")
        out = p.add_mutually_exclusive_group()
        out.add_argument("-q", "--quiet", action="store_true", help="no human-readable output")
        out.add_argument("-v", "--verbose", action="store_true", help="more detail")
        if target:
            p.add_argument("--target", required=target_required, help="target name from the model file")
        return p

    common(sub.add_parser("validate", help="check well-formedness"))
    common(sub.add_parser("info", help="summary and cycle-reset status"))
    p = common(sub.add_parser("abstract", help="build the finite abstraction"), target=True)
    p.add_argument("--max-iter", type=_positive(int), default=50)
    p.add_argument("--dot", metavar="PATH", help="write the block graph as DOT")
    p = common(sub.add_parser("check", help="decide P(F B) = 1 / = 0"), target=True, target_required=True)
    p.add_argument("--max-iter", type=_positive(int), default=50)
    p = common(sub.add_parser("approx", help="certified interval for P(F B)"), target=True, target_required=True)
    p.add_argument("--eps", type=_positive(float), default=1e-3)
    p.add_argument("--cap", type=_positive(int), default=10_000, help="maximal step bound n")
    p.add_argument("--max-iter", type=_positive(int), default=50)
    p = common(sub.add_parser("simulate", help="Monte Carlo estimate of P(F<=horizon B)"),
               target=True, target_required=True)
    p.add_argument("--horizon", type=_positive(int), default=1000)
    p.add_argument("--samples", type=_positive(int), default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-early-stop", action="store_true",
                   help="do not stop runs that entered the avoid set")
    return parser


def _base_report(command: str, path: Path | None) -> dict:
    digest = hashlib.sha256(path.read_bytes()).hexdigest() if path else None
    return {"command": command, "model_hash": digest, "verdict": None, "interval": None,
            "diagnostics": {}, "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}


def _emit(report: dict, args) -> None:
    if not getattr(args, "json", None):
        return
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.json == "-":
        sys.stdout.write(text)
    else:
        Path(args.json).write_text(text, encoding="utf-8")


def _say(args, *lines) -> None:
    if not args.quiet:
        for line in lines:
            print(line)


def _target_name(H, args) -> str | None:
    if getattr(args, "target", None):
        if args.target not in H.targets:
            raise UsageError(f"unknown target {args.target!r}; model defines {sorted(H.targets)}")
        return args.target
    return next(iter(H.targets), None)


def _require_valid(H, report: dict) -> None:
    from decisive.shs.validate import validate
    problems = validate(H)
    if problems:
        report["diagnostics"]["validation"] = [d.to_dict() for d in problems]
        raise ModelError("model is not well-formed:\n  " + "\n  ".join(str(d) for d in problems))


def _cycle_info(H) -> dict:
    from decisive.shs.validate import is_cycle_reset
    ok, witness = is_cycle_reset(H)
    return {"cycle_reset": ok, "witness_cycle": list(witness)}


def cmd_validate(H, args, report):
    from decisive.shs.validate import validate
    problems = validate(H)
    report["diagnostics"]["validation"] = [d.to_dict() for d in problems]
    report["verdict"] = "valid" if not problems else "invalid"
    if problems:
        _say(args, f"{H.name}: {len(problems)} problem(s)", *(str(d) for d in problems))
        return EXIT_INVALID
    _say(args, f"{H.name}: valid")
    return EXIT_OK


def cmd_info(H, args, report):
    from decisive.shs.validate import longest_non_strong_path
    cyc = _cycle_info(H)
    report["diagnostics"].update(cyc)
    locs = {l.name: {"delay": "auto", "exp_rate": str(l.delay.rate), "invariant": str(l.invariant)}
            for l in H.locations}
    info = {"variables": list(H.variables), "locations": len(H.locations), "edges": len(H.edges),
            "strong_edges": [e.name for e in H.edges if e.strong], "targets": sorted(H.targets),
            "delay_classes": locs}
    if cyc["cycle_reset"]:
        info["segment_bound"] = longest_non_strong_path(H)
    report["diagnostics"]["info"] = info
    lines = [f"model {H.name}: {len(H.variables)} variable(s) {', '.join(H.variables)}; "
             f"{len(H.locations)} location(s); {len(H.edges)} edge(s), strong: "
             f"{', '.join(info['strong_edges']) or 'none'}",
             "cycle-reset: " + ("yes" if cyc["cycle_reset"] else
                                "no, witness cycle " + " -> ".join(cyc["witness_cycle"]))]
    for name, d in locs.items():
        lines.append(f"  location {name}: inv {d['invariant']}; delay auto "
                     f"(uniform/discrete on bounded sets, exp({d['exp_rate']}) on unbounded)")
    lines.append("targets: " + (", ".join(info["targets"]) or "none"))
    _say(args, *lines)
    return EXIT_OK


def cmd_abstract(H, args, report):
    from decisive.abstraction import build_abstraction
    _require_valid(H, report)
    target = _target_name(H, args)
    report["diagnostics"].update(_cycle_info(H))
    report["diagnostics"]["target"] = target
    try:
        A = build_abstraction(H, target if target else {}, args.max_iter)
    except CapExceeded as exc:
        report["diagnostics"]["abstraction"] = {"blocks": len(exc.partition.blocks),
                                                "iterations": exc.max_iter, "trace": exc.trace,
                                                "block_list": [{"location": b.location, "formula": str(b.formula)}
                                                               for b in exc.partition.blocks]}
        raise
    report["diagnostics"]["abstraction"] = dict(A.to_dict(), blocks=len(A.blocks),
                                                block_list=A.to_dict()["blocks"])
    # stabilising is not enough for a verdict without cycle-reset
    status = "sound" if report["diagnostics"]["cycle_reset"] else "abstraction-only"
    report["verdict"] = "stable"
    report["diagnostics"]["status"] = status
    if args.dot:
        Path(args.dot).write_text(A.to_dot(), encoding="utf-8")
    lines = [f"stable after {A.iterations} iteration(s): {len(A.blocks)} block(s)"
             + ("" if status == "sound" else " (abstraction-only: system is not cycle-reset)")]
    for i, b in enumerate(A.blocks):
        marks = ("T" if b.target else " ") + ("I" if i in A.initial_support else " ")
        lines.append(f"  b{i} {marks} {b.location}: {b.formula}  -> "
                     + ", ".join(f"b{j}" for j in sorted(A.successors[i])))
    _say(args, *lines)
    return EXIT_OK


def cmd_check(H, args, report):
    from decisive.analysis.qualitative import decide_qualitative
    _require_valid(H, report)
    report["diagnostics"].update(_cycle_info(H))
    rep = decide_qualitative(H, args.target, args.max_iter)
    report["verdict"] = rep.verdict.value
    report["diagnostics"].update(rep.diagnostics)
    _say(args, f"{args.target}: {rep.verdict.value} "
               f"({rep.diagnostics['abstraction']['blocks']} blocks, "
               f"{rep.diagnostics['abstraction']['iterations']} refinement iteration(s))")
    return EXIT_OK


def cmd_approx(H, args, report):
    from decisive.analysis.qualitative import classify
    from decisive.analysis.quantitative import approx_quantitative
    from decisive.abstraction import build_abstraction
    _require_valid(H, report)
    report["diagnostics"].update(_cycle_info(H))
    if not report["diagnostics"]["cycle_reset"]:
        raise NotCycleReset(report["diagnostics"]["witness_cycle"])
    A = build_abstraction(H, args.target, args.max_iter)
    res = approx_quantitative(H, args.target, args.eps, args.cap, abstraction=A)
    iv = res.interval
    report["verdict"] = classify(A).value
    report["interval"] = {"lo": float(iv.lo), "hi": float(iv.hi), "eps": args.eps,
                          "converged": iv.converged, "steps": iv.steps_used}
    report["diagnostics"]["abstraction"] = {"blocks": res.abstraction_blocks,
                                            "iterations": res.abstraction_iterations}
    report["diagnostics"]["quadrature"] = {"terms": res.terms, "budget_used": res.budget_used}
    state = "converged" if iv.converged else "NOT converged (cap reached)"
    _say(args, f"{args.target}: P in [{float(iv.lo):.6f}, {float(iv.hi):.6f}] after n = {iv.steps_used} "
               f"steps, {state}; width {float(iv.hi - iv.lo):.2e} (eps {args.eps})")
    return EXIT_OK


def cmd_simulate(H, args, report):
    from decisive.analysis.simulate import simulate
    _require_valid(H, report)
    report["diagnostics"].update(_cycle_info(H))
    avoid = None
    if not args.no_early_stop and report["diagnostics"]["cycle_reset"]:
        from decisive.analysis.simulate import avoid_predicate
        avoid = avoid_predicate(H, args.target)
    res = simulate(H, args.target, args.horizon, args.samples, args.seed, avoid=avoid)
    report["verdict"] = "estimate"
    report["diagnostics"]["simulation"] = {"samples": res.samples, "hits": res.hits,
                                           "wilson": list(res.interval), "seed": res.seed,
                                           "horizon": res.horizon}
    lo, hi = res.interval
    _say(args, f"{args.target}: {res.hits}/{res.samples} runs hit within {res.horizon} steps; "
               f"estimate {res.estimate:.6f}, 95% interval [{lo:.6f}, {hi:.6f}] (seed {res.seed})")
    return EXIT_OK


_COMMANDS = {"validate": cmd_validate, "info": cmd_info, "abstract": cmd_abstract,
             "check": cmd_check, "approx": cmd_approx, "simulate": cmd_simulate}


def run(argv: list[str] | None = None) -> tuple[int, dict]:
    """Execute a command; returns the exit code and the JSON report."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return EXIT_OK, {"command": None}
        err = {"type": "UsageError", "message": "invalid arguments"}
        print(json.dumps({"error": err, "exit_code": EXIT_INVALID}, sort_keys=True), file=sys.stderr)
        return EXIT_INVALID, {"command": None, "error": err}
    path = None
    report = _base_report(args.command, None)
    code = EXIT_INTERNAL
    try:
        path = _resolve_model(args.model)
        report = _base_report(args.command, path)
        from decisive.shs.modelfile import load_model
        H = load_model(path)
        code = _COMMANDS[args.command](H, args, report)
    except NotCycleReset as exc:
        report["verdict"] = None
        report["diagnostics"].update({"cycle_reset": False, "witness_cycle": list(exc.witness)})
        code = _fail(report, exc, EXIT_NOT_CYCLE_RESET)
    except (CapExceeded, QuadratureBudgetExceeded) as exc:
        code = _fail(report, exc, EXIT_CAP)
    except (ModelError, FormulaSyntaxError, QuantModeViolation, UsageError, OSError) as exc:
        code = _fail(report, exc, EXIT_INVALID)
    except DecisiveError as exc:
        code = _fail(report, exc, EXIT_INTERNAL)
    except Exception as exc:  # noqa: BLE001 - last-resort error object
        code = _fail(report, exc, EXIT_INTERNAL)
    _emit(report, args)
    return code, report


def _fail(report: dict, exc: Exception, code: int) -> int:
    err = exc.to_dict() if isinstance(exc, DecisiveError) else {"type": type(exc).__name__,
                                                                 "message": str(exc)}
    report["error"] = err
    print(f"error: {err['message']}", file=sys.stderr)
    print(json.dumps({"error": err, "exit_code": code}, sort_keys=True), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
