"""``sparktrace`` command line: trace, lift, replay, gen, campaign, report."""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

from . import IR_FORMAT_VERSION, TRACE_FORMAT_VERSION, __version__
from . import values as V
from .bytecode import CompileError, VerifyError, compile_program
from .concolic import generate
from .config import ConfigError, parse_alphabet, resolve
from .frontend import ParseError, SourceProgram, infer_param_types, list_exports, parse
from .harness import CORPUS_DIR, run_campaign
from .interpreter import ExecutionLimit
from .lifter import EvalError, IrParseError, LiftError, build_entry, dump_ir, eval_ir, lift, load_ir
from .testcase import STRING, dump_testcase, load_testcase, random_seeds
from .tracer import (
    TraceFormatError, TraceOverflow, baseline_trace, dump_trace, extract_function_instr,
    load_trace,
)

EXIT_OK, EXIT_FINDINGS, EXIT_USAGE, EXIT_PIPELINE = 0, 1, 2, 3

PIPELINE_ERRORS = (ParseError, CompileError, VerifyError, TraceOverflow, TraceFormatError,
                   ExecutionLimit, LiftError, EvalError, IrParseError, ConfigError)

log = logging.getLogger("sparktrace")


class UsageError(Exception):
    pass


def _load_program(path: str):
    ast = parse(SourceProgram.from_file(path))
    return ast, compile_program(ast)


def _check_function(ast, program, name: str):
    names = [fn.name for fn in program.functions]
    if name not in names:
        exports = ", ".join(n for n, _, _ in list_exports(ast)) or "(none)"
        raise UsageError(f"no function {name!r}; exports: {exports}")
    return program[name]


_INT_RE = re.compile(r"-?\d+")


def parse_arg(text: str, param_type: str):
    """``null``, ``true``/``false`` and integers for non-String params;
    otherwise a percent-encoded string."""
    if param_type != STRING:
        if text == "null":
            return None
        if text in ("true", "false"):
            return text == "true"
        if _INT_RE.fullmatch(text):
            return int(text)
    return V.unpct(text)


def _sym_list(text: str | None) -> tuple[int, ...]:
    if not text:
        return ()
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError:
        raise UsageError(f"--sym expects comma-separated indices, got {text!r}") from None


def _config(args):
    flags = dict(
        alphabet=parse_alphabet(args.alphabet) if args.alphabet else None,
        max_string_len=args.max_string_len, max_solve_len=args.max_solve_len,
        max_iterations=args.max_iterations, time_budget_ms=args.time_budget_ms,
        trace_op_cap=args.trace_op_cap, solver_budget=args.solver_budget,
        rng_seed=args.rng_seed, output_dir=args.out,
        symbolize_all_strings=False if args.single_symbolic_arg else None,
        deterministic=True if args.deterministic else None)
    return resolve(args.config, **flags)


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


# subcommands

def cmd_trace(args) -> int:
    ast, program = _load_program(args.file)
    fn = _check_function(ast, program, args.function)
    types = infer_param_types(ast).get(fn.name, ["Unknown"] * fn.param_count)
    if len(args.args) != fn.param_count:
        raise UsageError(f"{fn.name} takes {fn.param_count} argument(s), got {len(args.args)}")
    values = [parse_arg(a, t) for a, t in zip(args.args, types)]
    sym = _sym_list(args.sym)
    for i in sym:
        if not 0 <= i < fn.param_count:
            raise UsageError(f"--sym index {i} out of range")
    raw = baseline_trace(fn, values, set(sym), program, op_cap=args.trace_op_cap)
    extracted = extract_function_instr(raw)
    out = Path(args.output or f"{fn.name}.trace")
    raw_path = out.with_suffix(".raw.trace")
    _write(raw_path, dump_trace(raw))
    _write(out, dump_trace(extracted))
    print(f"raw: {raw_path} ({len(raw.ops)} ops)")
    print(f"extracted: {out} ({len(extracted.ops)} ops)")
    print(f"outcome: {raw.outcome.kind}")
    return EXIT_OK


def cmd_lift(args) -> int:
    trace = load_trace(Path(args.trace).read_text())
    module = build_entry(lift(trace))
    out = Path(args.output or Path(args.trace).with_suffix(".sir"))
    _write(out, dump_ir(module))
    print(f"module: {out} ({len(module.blocks)} blocks, {len(module.assertions)} assertions)")
    return EXIT_OK


def cmd_replay(args) -> int:
    module = load_ir(Path(args.module).read_text())
    case = load_testcase(Path(args.testcase).read_text())
    result = eval_ir(module, case.bindings)
    print(f"outcome: {result.kind}")
    for i, ok in enumerate(result.assertion_results):
        print(f"assert {i}: {'holds' if ok else 'FAILS'}")
    failed = [i for i, ok in enumerate(result.assertion_results) if not ok]
    if failed:
        print(f"first failed assertion: {failed[0]}")
        return EXIT_FINDINGS
    print("all assertions hold")
    return EXIT_OK


def cmd_gen(args) -> int:
    config = _config(args)
    ast, program = _load_program(args.file)
    fn = _check_function(ast, program, args.function)
    types = infer_param_types(ast).get(fn.name, ["Unknown"] * fn.param_count)
    if STRING not in types:
        raise UsageError(f"{fn.name} has no String parameter to make symbolic")
    sym = tuple(i for i, t in enumerate(types) if t == STRING)
    if not config.symbolize_all_strings:
        sym = sym[:1]
    seeds = random_seeds(types, 1, config.rng_seed, config.alphabet, config.max_string_len,
                         sym, fn.name)
    gen = generate(program, fn.name, config, types, seeds, keep_runs=args.keep_artifacts)
    out = Path(config.output_dir)
    for case in gen.test_cases:
        _write(out / "cases" / f"{case.id}.tc.json", dump_testcase(case))
    if args.keep_artifacts:
        for run in gen.runs:
            stem = out / "artifacts" / str(run.case.id)
            _write(stem.with_suffix(".raw.trace"), dump_trace(run.raw))
            _write(stem.with_suffix(".trace"), dump_trace(run.extracted))
            _write(stem.with_suffix(".sir"), dump_ir(run.module))
    report = gen.report(config.deterministic)
    _write(out / "report.json", json.dumps(report, indent=2) + "\n")
    print(f"{fn.name}: {report['iterations']} iterations, {report['testCases']} test cases, "
          f"{report['uniquePaths']} paths, {len(report['exceptions'])} exceptions")
    for exc in report["exceptions"]:
        print(f"  {exc['kind']}: {exc['message']} (test case {exc['testCaseId']})")
    if args.fail_on_findings and report["exceptions"]:
        return EXIT_FINDINGS
    return EXIT_OK


def cmd_campaign(args) -> int:
    config = _config(args)
    corpus = Path(args.corpus_dir) if args.corpus_dir else CORPUS_DIR
    if not (corpus / "manifest.json").exists():
        raise UsageError(f"{corpus} has no manifest.json")
    names = set(args.library) if args.library else None
    campaign = run_campaign(corpus, config, names, jobs=args.jobs)
    written = campaign.write(config.output_dir, figures=not args.no_figures)
    summary = campaign.summary()
    for lib in summary["libraries"]:
        status = lib["error"] or f"{lib['coveragePercent']:.2f}% coverage, {lib['findings']} findings"
        print(f"{lib['library']}: {status}")
    print(f"mean coverage {summary['meanCoveragePercent']:.2f}%, "
          f"{summary['findings']} findings; wrote {len(written)} files to {config.output_dir}")
    if summary["failures"]:
        return EXIT_PIPELINE
    if args.fail_on_findings and summary["findings"]:
        return EXIT_FINDINGS
    return EXIT_OK


def cmd_report(args) -> int:
    from .plots import render_summary
    out = Path(args.out_dir)
    try:
        summary = json.loads((out / "summary.json").read_text())
        report = json.loads((out / "report.json").read_text())
    except FileNotFoundError as exc:
        raise UsageError(f"{exc.filename} not found; run 'campaign' first") from None
    for path in render_summary(summary, report, out):
        print(path)
    return EXIT_OK


def _add_config_flags(p):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--alphabet", help="'printable', a range like 'a-d', or percent-encoded bytes")
    p.add_argument("--max-string-len", type=int)
    p.add_argument("--max-solve-len", type=int)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--time-budget-ms", type=int)
    p.add_argument("--trace-op-cap", type=int)
    p.add_argument("--solver-budget", type=int)
    p.add_argument("--rng-seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--single-symbolic-arg", action="store_true",
                   help="make only the first String argument symbolic")
    p.add_argument("--deterministic", action="store_true",
                   help="zero wall-clock fields and ignore the time budget")
    p.add_argument("--fail-on-findings", action="store_true",
                   help="exit 1 when any exception is found")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparktrace", description=__doc__)
    parser.add_argument("--version", action="version",
                        version=f"sparktrace {__version__} (TRACE v{TRACE_FORMAT_VERSION}, "
                                f"MODULE v{IR_FORMAT_VERSION})")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trace", help="trace one call; writes raw and extracted traces")
    p.add_argument("file")
    p.add_argument("function")
    p.add_argument("--args", nargs="*", default=[], help="argument values (percent-encoded)")
    p.add_argument("--sym", help="comma-separated symbolic parameter indices")
    p.add_argument("-o", "--output", help="extracted trace path (default <fn>.trace)")
    p.add_argument("--trace-op-cap", type=int, default=1_000_000)
    p.set_defaults(run=cmd_trace)

    p = sub.add_parser("lift", help="lift an extracted trace into an IR module")
    p.add_argument("trace")
    p.add_argument("-o", "--output")
    p.set_defaults(run=cmd_lift)

    p = sub.add_parser("replay", help="evaluate an IR module on a test case")
    p.add_argument("module")
    p.add_argument("testcase")
    p.set_defaults(run=cmd_replay)

    p = sub.add_parser("gen", help="concolic test generation for one function")
    p.add_argument("file")
    p.add_argument("function")
    p.add_argument("--keep-artifacts", action="store_true",
                   help="also write every trace and IR module")
    _add_config_flags(p)
    p.set_defaults(run=cmd_gen)

    p = sub.add_parser("campaign", help="run the harness over a corpus")
    p.add_argument("corpus_dir", nargs="?", help="directory with manifest.json "
                                                 "(default: the bundled corpus)")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--library", action="append", help="restrict to this library (repeatable)")
    p.add_argument("--no-figures", action="store_true")
    _add_config_flags(p)
    p.set_defaults(run=cmd_campaign)

    p = sub.add_parser("report", help="re-render figures from a campaign output directory")
    p.add_argument("out_dir")
    p.set_defaults(run=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.run(args)
    except UsageError as exc:
        print(f"sparktrace: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"sparktrace: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PIPELINE_ERRORS as exc:
        print(f"sparktrace: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
