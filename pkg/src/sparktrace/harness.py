"""Library test harness: statement coverage, bug findings and campaigns.

Coverage is counted on source statement spans. A case is replayed through
the reference interpreter and every dispatch whose statement span differs
from the previous dispatch's counts as one hit on that statement.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .bytecode import BytecodeProgram, compile_program
from .concolic import generate
from .config import Config
from .frontend import SourceProgram, infer_param_types, list_exports, parse
from .interpreter import UNHANDLED, ExecutionLimit, interpret
from .testcase import STRING, TestCase, random_seeds

log = logging.getLogger(__name__)

CORPUS_DIR = Path(__file__).parent / "corpus"
MANIFEST = "manifest.json"


@dataclass
class CoverageReport:
    per_statement: dict[tuple, int]
    statements_total: int
    statements_covered: int

    @property
    def percent(self) -> float:
        if not self.statements_total:
            return 0.0
        return 100.0 * self.statements_covered / self.statements_total

    def merge(self, other: "CoverageReport") -> "CoverageReport":
        hits = dict(self.per_statement)
        for span, n in other.per_statement.items():
            hits[span] = hits.get(span, 0) + n
        return CoverageReport(hits, self.statements_total,
                              sum(1 for n in hits.values() if n))


@dataclass(frozen=True)
class BugFinding:
    function: str
    kind: str
    message: str
    span: tuple | None
    witness: int

    def key(self) -> tuple:
        return (self.span, self.message, self.kind)

    def to_json(self) -> dict:
        return {"function": self.function, "kind": self.kind, "message": self.message,
                "span": list(self.span) if self.span else None, "witness": self.witness}


@dataclass
class Library:
    name: str
    source_path: Path
    loc: int
    notes: str = ""
    bug: dict | None = None
    program: BytecodeProgram = field(default=None, repr=False)
    exports: list = field(default_factory=list)
    types: dict = field(default_factory=dict)

    @classmethod
    def load(cls, entry: dict, base: Path) -> "Library":
        path = base / entry["sourcePath"]
        if not path.exists():
            raise FileNotFoundError(f"{entry['name']}: {path} does not exist")
        if int(entry.get("loc", 0)) <= 0:
            raise ValueError(f"{entry['name']}: loc must be positive")
        ast = parse(SourceProgram.from_file(path))
        return cls(entry["name"], path, int(entry["loc"]), entry.get("notes", ""),
                   entry.get("bug"), compile_program(ast), list_exports(ast),
                   infer_param_types(ast))

    @classmethod
    def from_source(cls, name: str, text: str) -> "Library":
        ast = parse(text)
        return cls(name, Path(f"<{name}>"), text.count("\n") + 1, "", None,
                   compile_program(ast), list_exports(ast), infer_param_types(ast))

    def string_functions(self) -> list[tuple[str, list[str]]]:
        """Exported functions taking at least one String argument."""
        return [(name, types) for name, _, types in self.exports if STRING in types]


def load_manifest(corpus_dir: str | Path = CORPUS_DIR) -> list[dict]:
    corpus_dir = Path(corpus_dir)
    data = json.loads((corpus_dir / MANIFEST).read_text())
    return data["libraries"]


def load_corpus(corpus_dir: str | Path = CORPUS_DIR, names=None) -> list[Library]:
    corpus_dir = Path(corpus_dir)
    return [Library.load(e, corpus_dir) for e in load_manifest(corpus_dir)
            if names is None or e["name"] in names]


# coverage

def statement_index(program: BytecodeProgram, functions=None):
    """Per-function pc-to-span maps and the set of counted statements."""
    maps = {}
    spans = set()
    for fn in program.functions:
        maps[fn.index] = fn.statement_map
        if functions is None or fn.name in functions:
            spans.update(fn.statement_map.values())
    return maps, spans


def reachable(program: BytecodeProgram, root: str) -> set[str]:
    """Functions reachable from ``root`` through direct calls."""
    seen = {root}
    todo = [root]
    while todo:
        fn = program[todo.pop()]
        for bc in fn.code:
            if bc.op == "CallFunc":
                callee = program.functions[bc.operands[0]].name
                if callee not in seen:
                    seen.add(callee)
                    todo.append(callee)
    return seen


def instrument_and_run(program: BytecodeProgram, fn_name: str, cases, functions=None
                       ) -> tuple[CoverageReport, list[BugFinding]]:
    """Replay ``cases`` through the interpreter counting statement hits.

    ``functions`` limits which functions' statements form the denominator
    (default: every function in the program).
    """
    fn = program[fn_name]
    maps, spans = statement_index(program, functions)
    hits = {span: 0 for span in spans}
    findings: dict[tuple, BugFinding] = {}
    for case in cases:
        if len(case.args) != fn.param_count:
            raise ValueError(f"case {case.id} has {len(case.args)} args, "
                             f"{fn_name} takes {fn.param_count}")
        try:
            outcome = interpret(fn, list(case.args), program)
        except ExecutionLimit as exc:
            log.warning("case %s skipped: %s", case.id, exc)
            continue
        prev = None
        for fi, pc, _ in outcome.dispatch_log:
            span = maps[fi].get(pc)
            if span is not None and span != prev and span in hits:
                hits[span] += 1
            prev = span
        found = [("HandledException", msg, span) for msg, span in outcome.handled]
        if outcome.kind == UNHANDLED:
            found.append(("UnhandledException", outcome.message, outcome.span))
        for kind, msg, span in found:
            f = BugFinding(fn_name, kind, msg, span, case.id)
            findings.setdefault(f.key(), f)
    report = CoverageReport(hits, len(spans), sum(1 for n in hits.values() if n))
    return report, list(findings.values())


def exhaustive_cases(param_types, alphabet: bytes, max_len: int, function: str = ""):
    """Every assignment of strings over ``alphabet`` up to ``max_len`` to String params."""
    strings = [bytes(t) for n in range(max_len + 1)
               for t in itertools.product(alphabet, repeat=n)]
    pools = [strings if t == STRING else [None] for t in param_types]
    for i, args in enumerate(itertools.product(*pools)):
        yield TestCase(i, tuple(args), (), ("RandomSeed",), 0, function)


def oracle_coverage(library: Library, alphabet: bytes = b"abcd", max_len: int = 3) -> float:
    """Library coverage reached by brute force over all small inputs."""
    total = None
    for name, types in library.string_functions():
        cov, _ = instrument_and_run(library.program, name,
                                    exhaustive_cases(types, alphabet, max_len, name))
        total = cov if total is None else total.merge(cov)
    return total.percent if total else 0.0


# campaigns

@dataclass
class FunctionResult:
    library: str
    function: str
    coverage: CoverageReport
    iterations: int
    iteration_ms: list[float]
    findings: list[BugFinding]
    cases: list[TestCase]
    failures: list[dict]

    def entry(self, deterministic: bool) -> dict:
        mean = sum(self.iteration_ms) / len(self.iteration_ms) if self.iteration_ms else 0.0
        return {"library": self.library, "function": self.function,
                "coveragePercent": round(self.coverage.percent, 2),
                "iterations": self.iterations,
                "meanIterationMs": 0.0 if deterministic else round(mean, 3),
                "findings": [f.to_json() for f in self.findings]}


def seed_for(config: Config, library: str, function: str) -> str:
    return f"{config.rng_seed}:{library}:{function}"


def run_function(library: Library, fn_name: str, config: Config) -> FunctionResult:
    types = dict((n, t) for n, t in library.string_functions())[fn_name]
    sym = tuple(i for i, t in enumerate(types) if t == STRING)
    if not config.symbolize_all_strings:
        sym = sym[:1]
    seeds = random_seeds(types, 1, seed_for(config, library.name, fn_name), config.alphabet,
                         config.max_string_len, sym, fn_name)
    gen = generate(library.program, fn_name, config, types, seeds, keep_runs=False)
    scope = reachable(library.program, fn_name)
    coverage, findings = instrument_and_run(library.program, fn_name, gen.test_cases, scope)
    return FunctionResult(library.name, fn_name, coverage, gen.iterations, gen.iteration_ms,
                          findings, gen.test_cases, gen.failures + gen.divergences)


@dataclass
class LibraryResult:
    library: str
    functions: list[FunctionResult]
    coverage: CoverageReport | None
    error: str | None = None

    def summary(self) -> dict:
        return {"library": self.library,
                "coveragePercent": round(self.coverage.percent, 2) if self.coverage else 0.0,
                "statementsTotal": self.coverage.statements_total if self.coverage else 0,
                "statementsCovered": self.coverage.statements_covered if self.coverage else 0,
                "functions": len(self.functions),
                "findings": sum(len(f.findings) for f in self.functions),
                "error": self.error}


def run_library(library: Library, config: Config) -> LibraryResult:
    results = [run_function(library, name, config) for name, _ in library.string_functions()]
    # library coverage: every generated case replayed against the whole library
    total = None
    for r in results:
        cov, _ = instrument_and_run(library.program, r.function, r.cases)
        total = cov if total is None else total.merge(cov)
    if total is None:
        _, spans = statement_index(library.program)
        total = CoverageReport({s: 0 for s in spans}, len(spans), 0)
    return LibraryResult(library.name, results, total)


def _library_job(args) -> LibraryResult:
    corpus_dir, entry, config = args
    try:
        return run_library(Library.load(entry, Path(corpus_dir)), config)
    except Exception as exc:  # isolate per-library failures
        return LibraryResult(entry["name"], [], None, f"{type(exc).__name__}: {exc}")


@dataclass
class Campaign:
    libraries: list[LibraryResult]
    config: Config

    @property
    def functions(self) -> list[FunctionResult]:
        return [f for lib in self.libraries for f in lib.functions]

    @property
    def findings(self) -> list[BugFinding]:
        return [b for f in self.functions for b in f.findings]

    def report(self) -> list[dict]:
        return [f.entry(self.config.deterministic) for f in self.functions]

    def summary(self) -> dict:
        libs = [lib.summary() for lib in self.libraries]
        ok = [lib for lib in libs if lib["error"] is None]
        mean = sum(lib["coveragePercent"] for lib in ok) / len(ok) if ok else 0.0
        return {"libraries": libs, "meanCoveragePercent": round(mean, 2),
                "findings": len(self.findings),
                "failures": [{"library": lib["library"], "error": lib["error"]}
                             for lib in libs if lib["error"]]}

    def coverage_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["library", "coveragePercent"])
        for lib in self.libraries:
            if lib.coverage is not None:
                writer.writerow([lib.library, f"{lib.coverage.percent:.2f}"])
        return out.getvalue()

    def write(self, out_dir: str | Path, figures: bool = True) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in (("report.json", json.dumps(self.report(), indent=2) + "\n"),
                           ("summary.json", json.dumps(self.summary(), indent=2) + "\n"),
                           ("coverage.csv", self.coverage_csv())):
            path = out_dir / name
            path.write_text(text)
            written.append(path)
        if figures:
            from .plots import render_campaign
            written += render_campaign(self, out_dir)
        return written


def run_campaign(corpus_dir: str | Path = CORPUS_DIR, config: Config | None = None,
                 names=None, jobs: int = 1) -> Campaign:
    """Run the harness over every library in the manifest."""
    config = config or Config()
    entries = [e for e in load_manifest(corpus_dir) if names is None or e["name"] in names]
    work = [(str(corpus_dir), e, config) for e in entries]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_library_job, work))
    else:
        results = [_library_job(w) for w in work]
    return Campaign(results, config)
