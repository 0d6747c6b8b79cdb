"""keysim command line.

Exit status: 0 on success, 1 on usage errors, 2 on bad input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from keysim.bench import PairsFileError, run_bench
from keysim.compare import CompareParams, match_graphs
from keysim.ingest import BundleError, Function
from keysim.keyir import SCHEMA_VERSION
from keysim.lift import lift_function
from keysim.pipeline import ExecConfig, analyze, load_program
from keysim.simplify import ExprSyntaxError, canonical_text, parse_expr, simplify
from keysim.symexec import DEFAULT_RUNS, DEFAULT_SEED, DEFAULT_STEP_BUDGET

USAGE_ERROR = 1
INPUT_ERROR = 2


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _unit(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return value


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _exec_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--runs", type=_positive, default=DEFAULT_RUNS)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--budget", type=_positive, default=DEFAULT_STEP_BUDGET, help="micro-op step budget per run")


def _compare_flags(p: argparse.ArgumentParser) -> None:
    d = CompareParams()
    p.add_argument("--boundary", type=_non_negative, default=d.boundary)
    p.add_argument("--node-threshold", type=_unit, default=d.node_threshold)
    p.add_argument("--pair-threshold", type=_unit, default=d.pair_threshold)
    p.add_argument("--context-weight", type=_unit, default=d.context_weight)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="keysim", description="Cross-architecture binary function similarity.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("lift", help="print the micro-IR of a function")
    p.add_argument("bundle")
    p.add_argument("--func", required=True)
    p.add_argument("--dump")

    p = sub.add_parser("exec", help="symbolically execute a function")
    p.add_argument("bundle")
    p.add_argument("--func", required=True)
    _exec_flags(p)
    p.add_argument("--dump")

    p = sub.add_parser("keyir", help="build the Key IR graph of a function")
    p.add_argument("bundle")
    p.add_argument("--func", required=True)
    _exec_flags(p)
    p.add_argument("--dump")

    p = sub.add_parser("simplify", help="simplify an expression")
    p.add_argument("expr")
    p.add_argument("--width", type=int, choices=(8, 16, 32, 64))

    p = sub.add_parser("compare", help="compare two functions")
    p.add_argument("a", help="BUNDLE:FUNCTION")
    p.add_argument("b", help="BUNDLE:FUNCTION")
    _exec_flags(p)
    _compare_flags(p)
    p.add_argument("--report")

    p = sub.add_parser("bench", help="classify the labelled pairs of a TSV file")
    p.add_argument("pairs")
    _exec_flags(p)
    _compare_flags(p)
    p.add_argument("--report")
    return parser


def _emit(doc: dict, path: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _function(bundle: str, name: str) -> Function:
    try:
        program = load_program(bundle)
    except OSError as exc:
        raise InputError(f"cannot read {bundle}: {exc.strerror or exc}") from None
    except BundleError as exc:
        raise InputError(f"{bundle}: {exc}") from None
    try:
        return program.function(name)
    except KeyError:
        raise InputError(f"{bundle}: no function named {name!r}") from None


def _split_target(text: str) -> tuple[str, str]:
    bundle, sep, name = text.rpartition(":")
    if not sep or not bundle or not name:
        raise InputError(f"expected BUNDLE:FUNCTION, got {text!r}")
    return bundle, name


def _config(args) -> ExecConfig:
    return ExecConfig(args.runs, args.seed, args.budget)


def _params(args) -> CompareParams:
    return CompareParams(args.node_threshold, args.boundary, args.pair_threshold, args.context_weight)


def _report_diagnostics(diags) -> None:
    for d in diags:
        print(d, file=sys.stderr)


def cmd_lift(args) -> int:
    f = _function(args.bundle, args.func)
    lf = lift_function(f)
    _report_diagnostics(lf.diagnostics)
    doc = {"schema_version": SCHEMA_VERSION, "function": f.name, "arch": f.arch.value, "instructions": []}
    for insn in sorted(f.instructions(), key=lambda i: i.address):
        ops = [str(op) for op in lf.micro[insn.address]]
        doc["instructions"].append({"address": f"{insn.address:x}", "text": str(insn), "micro": ops})
        if not args.dump:
            print(f"{insn}")
            for op in ops:
                print(f"    {op}")
    if args.dump:
        _emit(doc, args.dump)
    return 0


def cmd_exec(args) -> int:
    f = _function(args.bundle, args.func)
    result = analyze(f, _config(args))
    _report_diagnostics(result.lifted.diagnostics + result.values.diagnostics)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "function": f.name,
        "runs": args.runs,
        "seed": args.seed,
        "values": result.values.to_json(),
    }
    _emit(doc, args.dump)
    return 0


def cmd_keyir(args) -> int:
    f = _function(args.bundle, args.func)
    result = analyze(f, _config(args))
    _report_diagnostics(result.values.diagnostics + result.graph.diagnostics)
    doc = result.graph.to_json()
    doc.update(function=f.name, runs=args.runs, seed=args.seed)
    _emit(doc, args.dump)
    return 0


def cmd_simplify(args) -> int:
    try:
        e = parse_expr(args.expr, width=args.width)
    except ExprSyntaxError as exc:
        raise InputError(f"cannot parse expression: {exc}") from None
    print(canonical_text(simplify(e)))
    return 0


def cmd_compare(args) -> int:
    config, params = _config(args), _params(args)
    fa = _function(*_split_target(args.a))
    fb = _function(*_split_target(args.b))
    ga, gb = analyze(fa, config).graph, analyze(fb, config).graph
    report = match_graphs(ga, gb, params)
    _report_diagnostics(report.diagnostics)
    doc = report.to_json(ga, gb)
    doc.update(a=args.a, b=args.b, runs=args.runs, seed=args.seed)
    if args.report:
        _emit(doc, args.report)
    print(f"aggregate {report.aggregate:.4f} -> {report.verdict}")
    return 0


def cmd_bench(args) -> int:
    config, params = _config(args), _params(args)
    start = time.perf_counter()
    try:
        result = run_bench(args.pairs, params, config)
    except OSError as exc:
        raise InputError(f"cannot read {exc.filename}: {exc.strerror}") from None
    except (PairsFileError, BundleError) as exc:
        raise InputError(str(exc)) from None
    except KeyError as exc:
        raise InputError(f"unknown function {exc.args[0]!r}") from None
    if args.report:
        _emit(result.to_json(params, config), args.report)
    c = result.confusion
    print(
        f"{len(result.rows)} pairs, accuracy {result.accuracy:.3f} "
        f"(tp {c['tp']}, tn {c['tn']}, fp {c['fp']}, fn {c['fn']})"
    )
    print(f"elapsed {time.perf_counter() - start:.2f}s", file=sys.stderr)
    return 0


COMMANDS = {
    "lift": cmd_lift,
    "exec": cmd_exec,
    "keyir": cmd_keyir,
    "simplify": cmd_simplify,
    "compare": cmd_compare,
    "bench": cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"keysim: {exc}", file=sys.stderr)
        return INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
