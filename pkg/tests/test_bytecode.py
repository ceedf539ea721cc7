import pytest

from sparktrace.bytecode import (
    Bytecode, BytecodeFunction, CompileError, VerifyError, assemble, compile, disassemble, verify,
)
from sparktrace.frontend import parse

from conftest import compile_src


def ops(fn):
    return [(bc.op, bc.operands) for bc in fn.code]


def test_accumulator_lowering_of_addition():
    (fn,) = compile(parse("function f(){return 1+2;}"))
    assert ops(fn) == [("LdaConst", (0,)), ("Star", (0,)), ("LdaConst", (1,)),
                       ("Add", (0,)), ("Return", ())]
    assert fn.constants == [1, 2]


def test_if_throw_has_one_jump_past_the_throw():
    fn = compile_src('function f(s){if(s.length==0){throw "e";} return s;}')["f"]
    jumps = [(pc, bc) for pc, bc in enumerate(fn.code) if bc.op == "JumpIfFalse"]
    assert len(jumps) == 1
    pc, bc = jumps[0]
    throw_pc = next(i for i, b in enumerate(fn.code) if b.op == "Throw")
    assert bc.operands[0] == throw_pc + 1 and pc < throw_pc


def test_undeclared_call_is_a_compile_error():
    with pytest.raises(CompileError):
        compile(parse("function f(){return g();}"))


def test_corpus_output_verifies(corpus):
    for lib in corpus:
        for fn in lib.program.functions:
            verify(fn, lib.program)


def test_jump_past_end_rejected():
    fn = BytecodeFunction("f", 0, 1, code=[Bytecode("Jump", (6,))])
    with pytest.raises(VerifyError):
        verify(fn)


def test_register_outside_frame_rejected():
    fn = BytecodeFunction("f", 0, 4, code=[Bytecode("Star", (9,)), Bytecode("Return", ())])
    with pytest.raises(VerifyError):
        verify(fn)


def test_single_return_disassembly():
    fn = BytecodeFunction("f", 0, 0, code=[Bytecode("Return", ())])
    assert disassemble(fn, header=False).strip() == "0: Return"


def test_addition_disassembles_to_five_lines():
    (fn,) = compile(parse("function f(){return 1+2;}"))
    lines = disassemble(fn, header=False).strip().splitlines()
    assert [line.split(":")[0] for line in lines] == ["0", "1", "2", "3", "4"]
    assert [line.split()[1] for line in lines] == ["LdaConst", "Star", "LdaConst", "Add", "Return"]


def test_disassembly_round_trips(corpus):
    for lib in corpus:
        for fn in lib.program.functions:
            again = assemble(disassemble(fn))
            assert disassemble(again) == disassemble(fn)
            assert again.code == fn.code and again.constants == fn.constants
            assert again.statement_map == fn.statement_map


def test_every_conditional_jump_comes_from_a_branching_construct(corpus):
    for lib in corpus:
        ast = parse(lib.source_path.read_text())
        branching = sum(1 for n in ast.walk()
                        if n.kind in ("If", "While", "For")
                        or (n.kind == "BinaryOp" and n.value in ("&&", "||")))
        jumps = sum(1 for fn in lib.program.functions for bc in fn.code
                    if bc.op in ("JumpIfFalse", "JumpIfTrue"))
        assert jumps == branching, lib.name
