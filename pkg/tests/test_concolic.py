import random

import pytest

from sparktrace import symbolic as S
from sparktrace.concolic import execute, generate, symbolic_replay
from sparktrace.config import Config
from sparktrace.harness import instrument_and_run, reachable
from sparktrace.interpreter import interpret
from sparktrace.lifter import build_entry, lift
from sparktrace.testcase import TestCase
from sparktrace.tracer import baseline_trace, extract_function_instr

from conftest import compile_src, random_args

EMPTY_THROW = 'function f(s){if(s.length==0){throw "e";} return 0;}'


def module_for(src, args, sym=(0,), name="f"):
    prog = compile_src(src)
    raw = baseline_trace(prog[name], list(args), set(sym), prog)
    return build_entry(lift(extract_function_instr(raw)))


def test_length_check_path_condition():
    module = module_for("function f(s){if(s.length==0){return 0;} return 1;}", [b"a"])
    outcome, pc = symbolic_replay(module, {0: b"a"})
    assert outcome.kind == "Returned"
    (e,) = pc.entries
    assert e.expr is S.mk("eq", S.length(0), S.ZERO)
    assert e.observed is False and e.taken


def test_no_symbols_gives_constant_path():
    module = module_for("function f(s){if(s.length==0){return 0;} return 1;}", [b"a"], ())
    _, pc = symbolic_replay(module, {})
    assert all(S.is_const(e.expr) for e in pc.entries)


def test_original_bindings_take_every_branch(corpus_functions):
    rng = random.Random(2)
    for lib, name, types in corpus_functions:
        for _ in range(5):
            args = tuple(random_args(types, rng))
            sym = tuple(i for i, a in enumerate(args) if isinstance(a, bytes))
            run = execute(lib.program, TestCase(0, args, sym, function=name), 1_000_000)
            assert len(run.path) == len(run.module.assertions)
            assert all(e.taken for e in run.path)
            for e in run.path:
                assert S.evaluate(e.expr, run.case.bindings) == e.observed


def test_branch_free_function_single_case():
    gen = generate(compile_src("function f(s){return 0;}"), "f", Config(deterministic=True))
    assert len(gen.test_cases) == 1
    assert gen.report(True)["iterations"] == 1


def test_empty_string_boundary_found_from_x():
    seed = TestCase(0, (b"x",), (0,), function="f")
    gen = generate(compile_src(EMPTY_THROW), "f", Config(deterministic=True), seeds=[seed])
    assert [tc.args for tc in gen.test_cases] == [(b"x",), (b"",)]
    child = gen.test_cases[1]
    assert child.provenance == ("NegatedBranch", 0, 0) and child.generation == 1
    assert [e["kind"] for e in gen.report()["exceptions"]] == ["UnhandledException"]


def test_validator_covers_recognized_and_mishandled_branches(corpus):
    (lib,) = [lib for lib in corpus if lib.name == "validator-mini"]
    gen = generate(lib.program, "isVAT", Config(deterministic=True), ["String", "String"])
    cov, findings = instrument_and_run(lib.program, "isVAT", gen.test_cases,
                                       reachable(lib.program, "isVAT"))
    assert cov.percent == 100.0
    assert any("Mishandled country code" in f.message for f in findings)


def test_generation_is_deterministic():
    prog = compile_src("function f(s, t){if(s.indexOf(t) > 1){return 1;} return 0;}")
    a = generate(prog, "f", Config(deterministic=True))
    b = generate(prog, "f", Config(deterministic=True))
    assert a.test_cases == b.test_cases
    assert a.report(True) == b.report(True)


def test_iteration_cap():
    prog = compile_src("function f(s){var n=0; for(var i=0;i<s.length;i=i+1){"
                       "if(s.charAt(i)==\"a\"){n=n+1;}} return n;}")
    gen = generate(prog, "f", Config(max_iterations=5, deterministic=True))
    assert gen.iterations == 5


def test_report_fields():
    gen = generate(compile_src(EMPTY_THROW), "f", Config(deterministic=True))
    report = gen.report(deterministic=True)
    assert set(report) == {"function", "iterations", "testCases", "uniquePaths",
                           "exceptions", "wallTimeMs"}
    assert report["wallTimeMs"] == 0


@pytest.mark.parametrize("seed", range(3))
def test_every_return_reached_from_any_seed(seed):
    prog = compile_src("function f(s){if(s.charAt(0)==\"b\"){if(s.length>3){return 2;}"
                       "return 1;} return 0;}")
    gen = generate(prog, "f", Config(rng_seed=seed, deterministic=True, alphabet=b"abc"))
    returned = {interpret(prog["f"], list(tc.args), prog).value for tc in gen.test_cases}
    assert returned == {0, 1, 2}
