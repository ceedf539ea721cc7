from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from sparktrace import symbolic as S
from sparktrace import values as V
from sparktrace.harness import load_corpus
from sparktrace.interpreter import interpret
from sparktrace.lifter import build_entry, eval_ir, lift, original_bindings
from sparktrace.testcase import TestCase, load_testcase, dump_testcase
from sparktrace.tracer import baseline_trace, dispatch_sites, dump_trace, extract_function_instr, load_trace

CORPUS = load_corpus()
FUNCTIONS = [(lib, name, types) for lib in CORPUS for name, _, types in lib.exports]
SMALL = st.binary(max_size=10) | st.text(alphabet="abcd.,=&-_ 019", max_size=10).map(str.encode)
VALUE = SMALL | st.none() | st.integers(-5, 5) | st.booleans()

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@st.composite
def call(draw):
    lib, name, types = draw(st.sampled_from(FUNCTIONS))
    args = [draw(SMALL) if t == "String" else draw(VALUE) for t in types]
    return lib, name, args


@given(call())
def test_tracer_mirrors_interpreter(c):
    lib, name, args = c
    fn = lib.program[name]
    trace = baseline_trace(fn, list(args), set(range(len(args))), lib.program)
    ref = interpret(fn, list(args), lib.program)
    assert dispatch_sites(trace) == [(fi, pc) for fi, pc, _ in ref.dispatch_log]
    assert (trace.outcome.kind, trace.outcome.value, trace.outcome.message) == \
        (ref.kind, ref.value, ref.message)


@given(call())
def test_lifted_replay_reproduces_outcome(c):
    lib, name, args = c
    sym = {i for i, a in enumerate(args) if isinstance(a, bytes)}
    raw = baseline_trace(lib.program[name], list(args), sym, lib.program)
    assert load_trace(dump_trace(raw)) == raw
    module = build_entry(lift(extract_function_instr(raw)))
    result = eval_ir(module, original_bindings(module, raw))
    assert (result.kind, result.value) == (raw.outcome.kind, raw.outcome.value)
    assert all(result.assertion_results)


@given(st.lists(VALUE, max_size=4), st.integers(0, 3), st.text(max_size=8))
def test_testcase_round_trip(args, gen, fn):
    sym = tuple(i for i, a in enumerate(args) if isinstance(a, bytes))
    tc = TestCase(3, tuple(args), sym, ("RandomSeed",), gen, fn)
    assert load_testcase(dump_testcase(tc)) == tc


@given(st.binary(max_size=12))
def test_field_encoding_round_trip(data):
    text = V.pct_field(data)
    assert text not in ("-", "") and " " not in text
    assert (b"" if text == "%" else V.unpct(text)) == data


@given(st.binary(min_size=0, max_size=3), st.integers(0, 3), st.integers(32, 126))
def test_solver_witness_satisfies(seed, k, c):
    facts = [S.mk("eq", S.byte(0, k), S.const(c)), S.mk("le", S.length(0), S.const(k + 1))]
    r = S.BoundedSolver(S.PRINTABLE, 4).solve(facts, {0}, {0: seed})
    assert isinstance(r, S.Sat)
    assert S.holds(facts, r.model)
    assert len(r.model[0]) == k + 1
