import random

import pytest

from sparktrace.frontend import SourceProgram, parse
from sparktrace.interpreter import HANDLED, RETURNED, UNHANDLED, ExecutionLimit, interpret

from ast_oracle import AstEvaluator, StepLimit
from conftest import compile_src, random_args


def run(src, *args, name="f"):
    prog = compile_src(src)
    return interpret(prog[name], list(args), prog)


def test_length():
    out = run("function f(s){return s.length;}", b"abc")
    assert (out.kind, out.value) == (RETURNED, 3)


def test_char_at_out_of_range_is_empty():
    out = run("function f(s){return s.charAt(0);}", b"")
    assert (out.kind, out.value) == (RETURNED, b"")


def test_null_member_access_is_a_type_error():
    out = run("function f(x){return x.length;}", None)
    assert out.kind == UNHANDLED
    assert out.message.startswith("TypeError: ")


def test_caught_exception_is_recorded_as_handled():
    out = run('function f(s){try{throw "boom";}catch(e){return e;}}', b"")
    assert out.kind == RETURNED and out.value == b"boom"
    assert [m for m, _ in out.handled] == ["boom"]
    assert HANDLED == "HandledException"


def test_exceptions_cross_call_frames():
    src = 'function g(s){throw s;} function f(s){try{g(s);}catch(e){return 1;} return 0;}'
    assert run(src, b"x").value == 1


def test_division_by_zero_throws():
    out = run("function f(s){return s.length / 0;}", b"a")
    assert out.kind == UNHANDLED and "Division by zero" in out.message


def test_division_truncates_toward_zero():
    assert run("function f(s){return (0 - 7) / 2;}", b"").value == -3
    assert run("function f(s){return (0 - 7) % 2;}", b"").value == -1


def test_mixed_equality_does_not_coerce():
    assert run('function f(s){return s == 1;}', b"1").value is False


def test_integer_wraparound():
    out = run("function f(s){return 9223372036854775807 + 1;}", b"")
    assert out.value == -(1 << 63)


def test_step_limit():
    with pytest.raises(ExecutionLimit):
        prog = compile_src("function f(s){while(true){} return 0;}")
        interpret(prog["f"], [b""], prog, max_steps=1000)


def test_deep_recursion_is_a_range_error():
    out = run("function f(s){return f(s);}", b"")
    assert out.kind == UNHANDLED and out.message.startswith("RangeError")


def test_dispatch_log_names_function_and_pc():
    out = run("function g(){return 1;} function f(s){return g();}", b"")
    fns = {fi for fi, _, _ in out.dispatch_log}
    assert fns == {0, 1}


def test_interpreter_agrees_with_ast_oracle(corpus):
    rng = random.Random(7)
    checked = 0
    for lib in corpus:
        ast = parse(SourceProgram.from_file(lib.source_path))
        for name, _, types in lib.exports:
            for _ in range(40):
                args = random_args(types, rng)
                out = interpret(lib.program[name], list(args), lib.program)
                oracle = AstEvaluator(ast)
                try:
                    kind, value, message = oracle.run(name, args)
                except StepLimit:
                    continue
                assert (out.kind, out.value) == (kind, value), (lib.name, name, args)
                assert out.message == message
                assert [m for m, _ in out.handled] == oracle.handled
                checked += 1
    assert checked > 1000
