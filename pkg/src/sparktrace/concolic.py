"""Concolic exploration over lifted IR.

:class:`ShadowEvaluator` runs a module concretely while pairing every
input-dependent value with a symbolic expression; each path assertion adds
an entry to the :class:`PathCondition`. :func:`generate` drives the seed
loop: trace a test case, lift it, replay it symbolically, negate branch
conditions in generational order and turn solver models into new cases.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field

from . import symbolic as S
from .bytecode import BytecodeProgram
from .config import Config
from .interpreter import ExecutionLimit
from .lifter import IrEvaluator, IrModule, IrResult, LiftError, StrVal, build_entry, lift
from .testcase import STRING, TestCase, random_seeds
from .tracer import (
    MicroTrace, TraceOverflow, baseline_trace, branch_signature, extract_function_instr,
)


MAX_RETRIES = 2


class DivergenceError(Exception):
    """A binding drove the concrete run off the lifted path."""

    def __init__(self, index: int, origin_pc: int):
        super().__init__(f"path assertion {index} (pc {origin_pc}) does not hold")
        self.index = index
        self.origin_pc = origin_pc


class Sym:
    """A concrete value shadowed by a symbolic expression."""

    __slots__ = ("c", "e")

    def __init__(self, c, e):
        self.c = c
        self.e = e

    def __repr__(self):
        return f"Sym({self.c!r}, {S.render(self.e)})"


def _c(v):
    return v.c if type(v) is Sym else v


def _e(v):
    return v.e if type(v) is Sym else S.const(v)


@dataclass(frozen=True)
class PathEntry:
    expr: tuple
    observed: bool
    expected: bool
    origin_pc: int
    target_pc: int

    @property
    def taken(self) -> bool:
        """Whether the recorded path was followed at this branch."""
        return self.observed == self.expected


@dataclass
class PathCondition:
    entries: list[PathEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __iter__(self):
        return iter(self.entries)

    def constraints(self, upto: int | None = None) -> list[tuple]:
        """Entries ``[0, upto)`` as boolean facts matching their observed values."""
        entries = self.entries if upto is None else self.entries[:upto]
        return [e.expr if e.observed else S.not_(e.expr) for e in entries]

    def signature(self) -> tuple:
        return tuple((e.origin_pc, e.observed) for e in self.entries)


_OPS = {"Add": "add", "Sub": "sub", "Mul": "mul", "Div": "div", "Mod": "mod",
        "CmpEq": "eq", "CmpLt": "lt", "CmpLe": "le", "And": "and", "Or": "or"}


class ShadowEvaluator(IrEvaluator):
    def __init__(self, module: IrModule, bindings: dict[int, bytes], strict: bool = False):
        super().__init__(module, bindings)
        self.strict = strict
        self.path = PathCondition()

    def make_symbolic(self, sid: int) -> StrVal:
        v = super().make_symbolic(sid)
        cells = self.cells[v.base]
        for off in range(v.cap):
            cells[off] = Sym(cells[off], S.byte(sid, off))
        return v

    def sym_length(self, sid: int, length: int):
        return Sym(length, S.length(sid))

    def concrete(self, v):
        return _c(v)

    def _lift2(self, kind, a, b, concrete):
        if type(a) is not Sym and type(b) is not Sym:
            return concrete
        e = S.mk(_OPS[kind], _e(a), _e(b))
        return concrete if e[0] == "c" else Sym(concrete, e)

    def arith(self, kind, a, b):
        return self._lift2(kind, a, b, super().arith(kind, _c(a), _c(b)))

    def compare(self, kind, a, b):
        return self._lift2(kind, a, b, super().compare(kind, _c(a), _c(b)))

    def logic(self, kind, a, b):
        return self._lift2(kind, a, b, super().logic(kind, _c(a), _c(b)))

    def logic_not(self, a):
        if type(a) is not Sym:
            return not a
        return Sym(not a.c, S.not_(a.e))

    def select(self, c, a, b):
        if type(c) is not Sym:
            return a if c else b
        chosen = a if c.c else b
        if type(a) is not Sym and type(b) is not Sym and a == b:
            return a
        return Sym(_c(chosen), S.mk("ite", c.e, _e(a), _e(b)))

    def truth(self, c) -> bool:
        return bool(_c(c))

    def on_assert(self, cond, expected, pc, target):
        observed = bool(_c(cond))
        self.path.entries.append(PathEntry(_e(cond), observed, expected, pc, target))
        self.assertions.append(observed == expected)
        if self.strict and observed != expected:
            raise DivergenceError(len(self.path.entries) - 1, pc)


def symbolic_replay(module: IrModule, bindings, strict: bool = False
                    ) -> tuple[IrResult, PathCondition]:
    """Replay ``module`` with shadow expressions; returns the outcome and path condition."""
    if isinstance(bindings, TestCase):
        bindings = bindings.bindings
    ev = ShadowEvaluator(module, bindings, strict)
    return ev.run(), ev.path


def negate_and_solve(pc: PathCondition, k: int, decls=None, solver: S.BoundedSolver | None = None,
                     parent: TestCase | None = None, new_id: int = 0):
    """Keep branches ``[0, k)`` as observed and flip branch ``k``.

    Returns a :class:`TestCase` (or a bare model dict when no ``parent`` is
    given), ``symbolic.Unsat`` or ``symbolic.Unknown``.
    """
    if not 0 <= k < len(pc):
        raise IndexError(f"branch index {k} outside path of length {len(pc)}")
    solver = solver or S.BoundedSolver()
    entry = pc[k]
    flipped = S.not_(entry.expr) if entry.observed else entry.expr
    constraints = pc.constraints(k) + [flipped]
    symbols = set(decls or ())
    hint = parent.bindings if parent is not None else {}
    result = solver.solve(constraints, symbols, hint)
    if not isinstance(result, S.Sat):
        return result
    if parent is None:
        return result.model
    return parent.with_bindings(result.model, id=new_id,
                                provenance=("NegatedBranch", parent.id, k),
                                generation=parent.generation + 1, bound=k + 1)


# the seed loop

@dataclass
class Run:
    """Everything produced by executing one test case through the pipeline."""
    case: TestCase
    raw: MicroTrace
    extracted: MicroTrace
    module: IrModule
    outcome: IrResult
    path: PathCondition
    signature: tuple
    elapsed_ms: float = 0.0


@dataclass
class Generation:
    function: str
    test_cases: list[TestCase]
    runs: list[Run]
    iterations: int
    iteration_ms: list[float]
    failures: list[dict]
    divergences: list[dict]
    solver_calls: int
    unknown: int
    wall_ms: float

    def report(self, deterministic: bool = False) -> dict:
        exceptions = []
        seen = set()
        for run in self.runs:
            o = run.raw.outcome
            found = []
            if o.kind == "UnhandledException":
                found.append(("UnhandledException", o.message, o.span))
            found += [("HandledException", msg, span) for msg, span in o.handled]
            for kind, msg, span in found:
                key = (kind, msg, span)
                if key in seen:
                    continue
                seen.add(key)
                exceptions.append({"kind": kind, "message": msg,
                                   "span": list(span) if span else None,
                                   "testCaseId": run.case.id})
        return {"function": self.function, "iterations": self.iterations,
                "testCases": len(self.test_cases),
                "uniquePaths": len({r.signature for r in self.runs}),
                "exceptions": exceptions,
                "wallTimeMs": 0 if deterministic else round(self.wall_ms, 3)}


def execute(program: BytecodeProgram, case: TestCase, op_cap: int) -> Run:
    """Trace, extract, lift and symbolically replay one test case."""
    fn = program[case.function]
    raw = baseline_trace(fn, list(case.args), set(case.symbolic), program, op_cap=op_cap)
    extracted = extract_function_instr(raw)
    module = build_entry(lift(extracted))
    outcome, path = symbolic_replay(module, case.bindings, strict=True)
    return Run(case, raw, extracted, module, outcome, path, branch_signature(extracted))


def symbolic_params(param_types, config: Config) -> tuple[int, ...]:
    strings = tuple(i for i, t in enumerate(param_types) if t == STRING)
    return strings if config.symbolize_all_strings else strings[:1]


def generate(program: BytecodeProgram, fn_name: str, config: Config | None = None,
             param_types=None, seeds: list[TestCase] | None = None,
             keep_runs: bool = True) -> Generation:
    """Generational concolic search from random (or given) seeds."""
    config = config or Config()
    fn = program[fn_name]
    if param_types is None:
        param_types = [STRING] * fn.param_count
    sym = symbolic_params(param_types, config)
    if seeds is None:
        seeds = random_seeds(param_types, 1, config.rng_seed, config.alphabet,
                             config.max_string_len, sym, fn_name)
    solver = S.BoundedSolver(config.alphabet, config.max_solve_len, config.solver_budget)
    queue = deque(seeds)
    next_id = 1 + max(tc.id for tc in seeds)
    seen_paths: set = set()
    tried: set = set()
    expected_prefix: dict[int, tuple] = {}
    retries: dict[tuple, int] = {}
    accepted: list[TestCase] = []
    runs: list[Run] = []
    times: list[float] = []
    failures: list[dict] = []
    divergences: list[dict] = []
    calls = unknown = 0
    start = time.perf_counter()
    deadline = (start + config.time_budget_ms / 1000
                if config.time_budget_ms and not config.deterministic else None)
    iterations = 0
    while queue and iterations < config.max_iterations:
        if deadline is not None and time.perf_counter() > deadline:
            break
        case = queue.popleft()
        iterations += 1
        t0 = time.perf_counter()
        try:
            run = execute(program, case, config.trace_op_cap)
        except (TraceOverflow, ExecutionLimit, LiftError, DivergenceError) as exc:
            failures.append({"testCaseId": case.id, "error": type(exc).__name__,
                             "detail": str(exc)})
            times.append((time.perf_counter() - t0) * 1000)
            continue
        want = expected_prefix.pop(case.id, None)
        sig = run.signature
        start_k = case.bound
        diverged = want is not None and sig[:len(want)] != want
        if diverged:
            # the model steered elsewhere (usually bytes the parent trace never
            # inspected); re-open the intended target and expand from the miss
            divergences.append({"testCaseId": case.id, "parentId": case.provenance[1],
                                "branchIndex": case.provenance[2]})
            retries[want] = retries.get(want, 0) + 1
            if retries[want] <= MAX_RETRIES:
                tried.discard(want)
            start_k = next((i for i, (a, b) in enumerate(zip(sig, want)) if a != b),
                           min(len(sig), len(want) - 1))
        if run.signature in seen_paths and not diverged:
            times.append((time.perf_counter() - t0) * 1000)
            continue
        if run.signature not in seen_paths:
            seen_paths.add(run.signature)
            accepted.append(case)
            runs.append(run if keep_runs else Run(case, run.raw, run.extracted, None,
                                                  run.outcome, run.path, run.signature))
        for k in range(start_k, len(run.path)):
            entry = run.path[k]
            if entry.expr[0] == "c":
                continue
            fn_index, pc, taken = sig[k]
            target = sig[:k] + ((fn_index, pc, not taken),)
            if target in tried:
                continue
            tried.add(target)
            calls += 1
            child = negate_and_solve(run.path, k, sym and range(len(sym)), solver, case, next_id)
            if isinstance(child, S.Unknown):
                unknown += 1
            if isinstance(child, TestCase):
                expected_prefix[child.id] = target
                queue.append(child)
                next_id += 1
        times.append((time.perf_counter() - t0) * 1000)
    wall = (time.perf_counter() - start) * 1000
    return Generation(fn_name, accepted, runs, iterations, times, failures, divergences,
                      calls, unknown, wall)
