"""Reference bytecode interpreter.

Defines the semantics the baseline tracer mirrors: same frames, same
register writes, same dispatch order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import values as V
from .bytecode import BytecodeFunction, BytecodeProgram

MAX_CALL_DEPTH = 200
MAX_STEPS = 1_000_000

RETURNED = "Returned"
HANDLED = "HandledException"
UNHANDLED = "UnhandledException"


class ExecutionLimit(Exception):
    """The run exceeded its dispatch budget (usually a non-terminating loop)."""


@dataclass
class Frame:
    function: BytecodeFunction
    registers: list
    params: list
    accumulator: object = None
    pc: int = 0
    handlers: list[int] = field(default_factory=list)


@dataclass
class ExecOutcome:
    kind: str
    value: object = None
    message: str | None = None
    span: tuple[int, int, int] | None = None
    handled: list[tuple[str, tuple[int, int, int] | None]] = field(default_factory=list)
    dispatch_log: list[tuple[int, int, str]] = field(default_factory=list)

    def summary(self) -> tuple:
        """Everything but the dispatch log, for outcome comparisons."""
        return (self.kind, V.tag_of(self.value), self.value, self.message, self.span,
                tuple(self.handled))


def program_of(fn: BytecodeFunction, env: BytecodeProgram | None) -> BytecodeProgram:
    return env if env is not None else BytecodeProgram([fn])


def find_handler(stack: list[Frame]):
    """Unwind ``stack`` to the innermost frame with an active try handler."""
    while stack:
        frame = stack[-1]
        if frame.handlers:
            return frame, frame.handlers.pop()
        stack.pop()
    return None, None


def interpret(fn: BytecodeFunction, args: list, env: BytecodeProgram | None = None,
              max_steps: int = MAX_STEPS, snapshots: list | None = None) -> ExecOutcome:
    """Run ``fn`` on ``args``; runtime errors become exception outcomes.

    When ``snapshots`` is a list, a ``(depth, pc, registers, accumulator)``
    tuple is appended before every dispatch.
    """
    program = program_of(fn, env)
    if len(args) != fn.param_count:
        raise ValueError(f"{fn.name} expects {fn.param_count} arguments, got {len(args)}")
    stack = [Frame(fn, [None] * fn.frame_size, list(args))]
    log: list[tuple[int, int, str]] = []
    handled: list = []
    steps = 0
    while True:
        frame = stack[-1]
        pc = frame.pc
        code = frame.function.code
        bc = code[pc]
        op, ops = bc.op, bc.operands
        log.append((frame.function.index, pc, op))
        if snapshots is not None:
            snapshots.append((len(stack) - 1, pc, tuple(frame.registers), frame.accumulator))
        steps += 1
        if steps > max_steps:
            raise ExecutionLimit(f"{fn.name}: more than {max_steps} dispatches")
        regs = frame.registers
        next_pc = pc + 1
        try:
            if op == "LdaConst":
                frame.accumulator = frame.function.constants[ops[0]]
            elif op == "LdaParam":
                frame.accumulator = frame.params[ops[0]]
            elif op == "Ldar":
                frame.accumulator = regs[ops[0]]
            elif op == "Star":
                regs[ops[0]] = frame.accumulator
            elif op in ("Add", "Sub", "Mul", "Div", "Mod", "TestEqual", "TestLess", "TestLessEq"):
                frame.accumulator = V.binary(op, regs[ops[0]], frame.accumulator)
            elif op == "Neg":
                frame.accumulator = V.negate(frame.accumulator)
            elif op == "Not":
                frame.accumulator = not V.truthy(frame.accumulator)
            elif op == "Jump":
                next_pc = ops[0]
            elif op == "JumpIfFalse":
                if not V.truthy(frame.accumulator):
                    next_pc = ops[0]
            elif op == "JumpIfTrue":
                if V.truthy(frame.accumulator):
                    next_pc = ops[0]
            elif op == "StrLen":
                frame.accumulator = len(V.require_string(frame.accumulator, "length"))
            elif op == "StrCharAt":
                s = V.require_string(regs[ops[0]], "charAt")
                frame.accumulator = V.char_at(s, V.require_int_arg(frame.accumulator, "charAt"))
            elif op == "StrCharCode":
                s = V.require_string(regs[ops[0]], "charCodeAt")
                frame.accumulator = V.char_code_at(
                    s, V.require_int_arg(frame.accumulator, "charCodeAt"))
            elif op == "StrIndexOf":
                s = V.require_string(regs[ops[0]], "indexOf")
                frame.accumulator = V.index_of(s, V.require_str_arg(frame.accumulator, "indexOf"))
            elif op == "StrSubstring":
                s = V.require_string(regs[ops[0]], "substring")
                a = V.require_int_arg(regs[ops[1]], "substring")
                b = V.require_int_arg(frame.accumulator, "substring")
                lo, hi = V.substring_bounds(len(s), a, b)
                frame.accumulator = s[lo:hi]
            elif op == "StrConcat":
                s = V.require_string(regs[ops[0]], "concat")
                frame.accumulator = V.concat(s, V.require_str_arg(frame.accumulator, "concat"))
            elif op == "CallFunc":
                if len(stack) >= MAX_CALL_DEPTH:
                    raise V.range_error("Maximum call stack size exceeded")
                callee = program.functions[ops[0]]
                first, argc = ops[1], ops[2]
                frame.pc = next_pc
                stack.append(Frame(callee, [None] * callee.frame_size,
                                   regs[first:first + argc], None, 0))
                continue
            elif op == "Return":
                result = frame.accumulator
                stack.pop()
                if not stack:
                    return ExecOutcome(RETURNED, result, handled=handled, dispatch_log=log)
                stack[-1].accumulator = result
                continue
            elif op == "Throw":
                raise V.ScriptError(frame.accumulator)
            elif op == "EnterTry":
                frame.handlers.append(ops[0])
            elif op == "LeaveTry":
                frame.handlers.pop()
            elif op == "PinSymbolic":
                pass
            else:
                raise ValueError(f"unknown bytecode {op}")
        except V.ScriptError as exc:
            message = V.message_of(exc.value)
            throw_span = frame.function.statement_map.get(pc)
            target, handler_pc = find_handler(stack)
            if target is None:
                return ExecOutcome(UNHANDLED, exc.value, message, throw_span, handled, log)
            handled.append((message, target.function.catch_spans.get(handler_pc)))
            target.accumulator = exc.value
            target.pc = handler_pc
            continue
        frame.pc = next_pc
