"""Baseline tracer: per-bytecode handlers that execute and emit micro-ops.

One loop walks the bytecode and dispatches to a handler per op. Before
every handler the tracer emits the frame-size and feedback-vector checks
(tagged ``Verification``); the handlers themselves emit ``ControlFlow``
micro-ops. String bytes live in a flat :class:`TraceMemory` so string
handlers can expose their byte-level reads and writes.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace

from . import values as V
from .bytecode import BytecodeFunction, BytecodeProgram
from .interpreter import (
    MAX_CALL_DEPTH, RETURNED, UNHANDLED, ExecOutcome, Frame, find_handler, program_of,
)

CONTROL_FLOW = "ControlFlow"
VERIFICATION = "Verification"

MICRO_KINDS = {
    "LoadReg", "StoreReg", "LoadConst", "LoadImm", "ArithAdd", "ArithSub", "ArithMul",
    "ArithDiv", "ArithMod", "ArithNeg", "LogicNot", "CmpEq", "CmpLt", "CmpLe", "Jump",
    "BranchTaken", "BranchNotTaken", "MemRead8", "MemWrite8", "StrOpBegin", "StrOpEnd",
    "CallBegin", "CallEnd", "Ret", "ThrowOp", "TryPush", "TryPop", "SymbolicPin",
    "VerifyFrameSize", "VerifyFeedbackVector",
}
VERIFICATION_KINDS = {"VerifyFrameSize", "VerifyFeedbackVector"}

# StrOpBegin codes
STR_LEN, STR_CHARAT, STR_CHARCODE, STR_INDEXOF, STR_SUBSTRING, STR_CONCAT, STR_EQ = range(7)
STR_OP_NAMES = ("len", "charAt", "charCodeAt", "indexOf", "substring", "concat", "eq")

# register banks addressed by LoadReg/StoreReg
BANK_REG, BANK_PARAM = 0, 1
# sense operand of branch micro-ops
SENSE_IF_FALSE, SENSE_IF_TRUE = 0, 1

DEFAULT_OP_CAP = 1_000_000
MEMORY_BASE = 0x1000


class TraceOverflow(Exception):
    pass


class TraceFormatError(Exception):
    pass


@dataclass(frozen=True)
class MicroOp:
    kind: str
    operands: tuple[int, ...]
    origin_pc: int
    tag: str = CONTROL_FLOW


@dataclass(frozen=True)
class Region:
    base: int
    length: int
    cls: str  # StringData | Scratch
    init: bytes | None = None


@dataclass
class TraceMemory:
    regions: list[Region] = field(default_factory=list)
    next_base: int = MEMORY_BASE

    def alloc(self, length: int, cls: str, init: bytes | None = None) -> int:
        base = self.next_base
        self.regions.append(Region(base, length, cls, init))
        # one spare byte keeps bases of empty strings distinct
        self.next_base = base + length + 1
        return base

    def region_at(self, addr: int) -> Region | None:
        i = bisect.bisect_right([r.base for r in self.regions], addr) - 1
        if i >= 0:
            r = self.regions[i]
            if r.base <= addr < r.base + r.length:
                return r
        return None

    def region(self, base: int) -> Region:
        for r in self.regions:
            if r.base == base:
                return r
        raise KeyError(base)


class MemStr(bytes):
    """A string value together with the base address of its bytes."""

    base: int


@dataclass
class MicroTrace:
    ops: list[MicroOp]
    function_name: str
    input_snapshot: list
    symbol_table: dict[int, tuple[str, int, int]]
    outcome: ExecOutcome
    memory: TraceMemory = field(default_factory=TraceMemory)

    @property
    def has_verification(self) -> bool:
        return any(op.tag == VERIFICATION for op in self.ops)


def plain(v):
    return bytes(v) if isinstance(v, bytes) else v


class BaselineTracer:
    def __init__(self, program: BytecodeProgram, op_cap: int = DEFAULT_OP_CAP):
        self.program = program
        self.op_cap = op_cap
        self.handlers = {
            "LdaConst": self.h_lda_const, "LdaParam": self.h_lda_param, "Ldar": self.h_ldar,
            "Star": self.h_star, "Add": self.h_arith, "Sub": self.h_arith, "Mul": self.h_arith,
            "Div": self.h_arith, "Mod": self.h_arith, "Neg": self.h_neg, "Not": self.h_not,
            "TestEqual": self.h_test_equal, "TestLess": self.h_compare,
            "TestLessEq": self.h_compare, "Jump": self.h_jump, "JumpIfFalse": self.h_branch,
            "JumpIfTrue": self.h_branch, "StrLen": self.h_strlen, "StrCharAt": self.h_char_at,
            "StrCharCode": self.h_char_code, "StrIndexOf": self.h_index_of,
            "StrSubstring": self.h_substring, "StrConcat": self.h_concat,
            "CallFunc": self.h_call, "Return": self.h_return, "Throw": self.h_throw,
            "EnterTry": self.h_enter_try, "LeaveTry": self.h_leave_try,
            "PinSymbolic": self.h_pin,
        }

    # emission and memory
    def emit(self, kind: str, *operands: int, tag: str = CONTROL_FLOW):
        self.ops.append(MicroOp(kind, operands, self.pc, tag))
        if len(self.ops) > self.op_cap:
            raise TraceOverflow(f"trace exceeds {self.op_cap} micro-ops")

    def materialize(self, data: bytes, cls: str = "StringData") -> MemStr:
        s = MemStr(data)
        s.base = self.memory.alloc(len(data), cls, bytes(data) if cls == "StringData" else None)
        return s

    def scratch(self, data: bytes) -> MemStr:
        return self.materialize(data, "Scratch")

    def const_string(self, fn: BytecodeFunction, idx: int) -> MemStr:
        key = (fn.index, idx)
        if key not in self.const_cache:
            self.const_cache[key] = self.materialize(fn.constants[idx])
        return self.const_cache[key]

    def run(self, fn: BytecodeFunction, args: list, symbolic_params=(),
            snapshots: list | None = None) -> MicroTrace:
        if len(args) != fn.param_count:
            raise ValueError(f"{fn.name} expects {fn.param_count} arguments, got {len(args)}")
        self.ops: list[MicroOp] = []
        self.memory = TraceMemory()
        self.const_cache: dict = {}
        self.error_cache: dict = {}
        self.symbols: dict[int, tuple[str, int, int]] = {}
        self.pc = 0
        params = [self.materialize(a) if V.tag_of(a) == V.TAG_STR else a for a in args]
        self.sym_ids = {p: i for i, p in enumerate(sorted(set(symbolic_params)))}
        self.stack = [Frame(fn, [None] * fn.frame_size, params)]
        self.handled: list = []
        outcome = None
        while outcome is None:
            frame = self.stack[-1]
            self.pc = pc = frame.pc
            if snapshots is not None:
                snapshots.append((len(self.stack) - 1, pc, tuple(frame.registers),
                                  frame.accumulator))
            bc = frame.function.code[pc]
            self.emit("VerifyFrameSize", frame.function.frame_size, tag=VERIFICATION)
            self.emit("VerifyFeedbackVector", frame.function.index, tag=VERIFICATION)
            try:
                outcome = self.handlers[bc.op](frame, bc.operands)
            except V.ScriptError as exc:
                outcome = self.unwind(frame, exc, bc.op == "Throw")
        return MicroTrace(self.ops, fn.name, [plain(a) for a in args], dict(self.symbols),
                          outcome, self.memory)

    def unwind(self, frame: Frame, exc: V.ScriptError, user_throw: bool):
        value = exc.value
        if not user_throw:
            key = bytes(value)
            if key not in self.error_cache:
                self.error_cache[key] = self.materialize(key)
            value = self.error_cache[key]
            self.emit("LoadImm", V.TAG_STR, value.base, len(value))
        message = V.message_of(value)
        throw_span = frame.function.statement_map.get(self.pc)
        depth = len(self.stack)
        target, handler_pc = find_handler(self.stack)
        if target is None:
            self.emit("ThrowOp", 0, depth, -1)
            return ExecOutcome(UNHANDLED, plain(value), message, throw_span, self.handled)
        self.emit("ThrowOp", 1, depth - len(self.stack), handler_pc)
        self.handled.append((message, target.function.catch_spans.get(handler_pc)))
        target.accumulator = value
        target.pc = handler_pc
        return None

    # handlers: each returns None to continue or an ExecOutcome to stop
    def h_lda_const(self, frame, ops):
        fn = frame.function
        value = fn.constants[ops[0]]
        tag = V.tag_of(value)
        if tag == V.TAG_STR:
            value = self.const_string(fn, ops[0])
            self.emit("LoadConst", tag, value.base, len(value))
        elif tag == V.TAG_NULL:
            self.emit("LoadConst", tag)
        else:
            self.emit("LoadConst", tag, int(value))
        frame.accumulator = value
        frame.pc += 1

    def h_lda_param(self, frame, ops):
        i = ops[0]
        value = frame.params[i]
        self.emit("LoadReg", BANK_PARAM, i)
        frame.accumulator = value
        if len(self.stack) == 1 and i in self.sym_ids and V.tag_of(value) == V.TAG_STR:
            self.pin(self.sym_ids[i], value, -1, frame.function.param_names[i]
                     if i < len(frame.function.param_names) else f"arg{i}")
        frame.pc += 1

    def pin(self, sym: int, value: MemStr, target: int, name: str):
        """The PIN_SYMBOLIC handler: record the symbolic input in the trace."""
        self.symbols[sym] = (name, value.base, len(value))
        self.emit("SymbolicPin", sym, value.base, len(value), target)

    def h_pin(self, frame, ops):
        reg, sym = ops
        value = frame.registers[reg]
        if V.tag_of(value) == V.TAG_STR:
            self.pin(sym, value, reg, f"r{reg}")
        frame.pc += 1

    def h_ldar(self, frame, ops):
        self.emit("LoadReg", BANK_REG, ops[0])
        frame.accumulator = frame.registers[ops[0]]
        frame.pc += 1

    def h_star(self, frame, ops):
        self.emit("StoreReg", BANK_REG, ops[0])
        frame.registers[ops[0]] = frame.accumulator
        frame.pc += 1

    def h_arith(self, frame, ops):
        op = frame.function.code[frame.pc].op
        left, right = frame.registers[ops[0]], frame.accumulator
        if op == "Add" and V.tag_of(left) == V.TAG_STR and V.tag_of(right) == V.TAG_STR:
            frame.accumulator = self.concat(ops[0], left, right)
        else:
            frame.accumulator = V.binary(op, left, right)
            self.emit("Arith" + op, ops[0])
        frame.pc += 1

    def h_neg(self, frame, ops):
        frame.accumulator = V.negate(frame.accumulator)
        self.emit("ArithNeg")
        frame.pc += 1

    def h_not(self, frame, ops):
        self.emit("LogicNot", V.tag_of(frame.accumulator))
        frame.accumulator = not V.truthy(frame.accumulator)
        frame.pc += 1

    def h_test_equal(self, frame, ops):
        left, right = frame.registers[ops[0]], frame.accumulator
        lt, rt = V.tag_of(left), V.tag_of(right)
        if lt == V.TAG_STR and rt == V.TAG_STR:
            self.emit("StrOpBegin", STR_EQ, ops[0], -1, -1)
            for k in range(min(len(left), len(right))):
                self.emit("MemRead8", left.base + k)
                self.emit("MemRead8", right.base + k)
            self.emit("StrOpEnd", STR_EQ)
        else:
            self.emit("CmpEq", ops[0], lt, rt)
        frame.accumulator = V.strict_equal(left, right)
        frame.pc += 1

    def h_compare(self, frame, ops):
        op = frame.function.code[frame.pc].op
        frame.accumulator = V.binary(op, frame.registers[ops[0]], frame.accumulator)
        self.emit("CmpLt" if op == "TestLess" else "CmpLe", ops[0])
        frame.pc += 1

    def h_jump(self, frame, ops):
        self.emit("Jump", frame.pc, ops[0])
        frame.pc = ops[0]

    def h_branch(self, frame, ops):
        op = frame.function.code[frame.pc].op
        truth = V.truthy(frame.accumulator)
        sense = SENSE_IF_TRUE if op == "JumpIfTrue" else SENSE_IF_FALSE
        taken = truth if sense == SENSE_IF_TRUE else not truth
        self.emit("BranchTaken" if taken else "BranchNotTaken", frame.pc, ops[0], sense,
                  V.tag_of(frame.accumulator), frame.function.index)
        frame.pc = ops[0] if taken else frame.pc + 1

    def h_strlen(self, frame, ops):
        s = V.require_string(frame.accumulator, "length")
        self.emit("StrOpBegin", STR_LEN, -1, -1, -1)
        self.emit("StrOpEnd", STR_LEN)
        frame.accumulator = len(s)
        frame.pc += 1

    def h_char_at(self, frame, ops):
        s = V.require_string(frame.registers[ops[0]], "charAt")
        i = V.require_int_arg(frame.accumulator, "charAt")
        result = self.scratch(V.char_at(s, i))
        self.emit("StrOpBegin", STR_CHARAT, ops[0], -1, result.base)
        if result:
            self.emit("MemRead8", s.base + i)
            self.emit("MemWrite8", result.base)
        self.emit("StrOpEnd", STR_CHARAT)
        frame.accumulator = result
        frame.pc += 1

    def h_char_code(self, frame, ops):
        s = V.require_string(frame.registers[ops[0]], "charCodeAt")
        i = V.require_int_arg(frame.accumulator, "charCodeAt")
        self.emit("StrOpBegin", STR_CHARCODE, ops[0], -1, -1)
        if 0 <= i < len(s):
            self.emit("MemRead8", s.base + i)
        self.emit("StrOpEnd", STR_CHARCODE)
        frame.accumulator = V.char_code_at(s, i)
        frame.pc += 1

    def h_index_of(self, frame, ops):
        s = V.require_string(frame.registers[ops[0]], "indexOf")
        t = V.require_str_arg(frame.accumulator, "indexOf")
        result = V.index_of(s, t)
        self.emit("StrOpBegin", STR_INDEXOF, ops[0], -1, -1)
        if t:
            for k in range(len(t)):
                self.emit("MemRead8", t.base + k)
            last = result if result >= 0 else len(s) - len(t)
            for p in range(last + 1):
                for k in range(len(t)):
                    self.emit("MemRead8", s.base + p + k)
        self.emit("StrOpEnd", STR_INDEXOF)
        frame.accumulator = result
        frame.pc += 1

    def h_substring(self, frame, ops):
        s = V.require_string(frame.registers[ops[0]], "substring")
        a = V.require_int_arg(frame.registers[ops[1]], "substring")
        b = V.require_int_arg(frame.accumulator, "substring")
        lo, hi = V.substring_bounds(len(s), a, b)
        result = self.scratch(s[lo:hi])
        self.emit("StrOpBegin", STR_SUBSTRING, ops[0], ops[1], result.base)
        for k in range(lo, hi):
            self.emit("MemRead8", s.base + k)
            self.emit("MemWrite8", result.base + k - lo)
        self.emit("StrOpEnd", STR_SUBSTRING)
        frame.accumulator = result
        frame.pc += 1

    def h_concat(self, frame, ops):
        s = V.require_string(frame.registers[ops[0]], "concat")
        t = V.require_str_arg(frame.accumulator, "concat")
        frame.accumulator = self.concat(ops[0], s, t)
        frame.pc += 1

    def concat(self, reg: int, s: MemStr, t: MemStr) -> MemStr:
        result = self.scratch(V.concat(s, t))
        self.emit("StrOpBegin", STR_CONCAT, reg, -1, result.base)
        for k in range(len(s)):
            self.emit("MemRead8", s.base + k)
            self.emit("MemWrite8", result.base + k)
        for k in range(len(t)):
            self.emit("MemRead8", t.base + k)
            self.emit("MemWrite8", result.base + len(s) + k)
        self.emit("StrOpEnd", STR_CONCAT)
        return result

    def h_call(self, frame, ops):
        if len(self.stack) >= MAX_CALL_DEPTH:
            raise V.range_error("Maximum call stack size exceeded")
        f, first, argc = ops
        callee = self.program.functions[f]
        self.emit("CallBegin", f, first, argc)
        frame.pc += 1
        self.stack.append(Frame(callee, [None] * callee.frame_size,
                                frame.registers[first:first + argc]))

    def h_return(self, frame, ops):
        self.emit("Ret")
        result = frame.accumulator
        self.stack.pop()
        if not self.stack:
            return ExecOutcome(RETURNED, plain(result), handled=self.handled)
        self.emit("CallEnd")
        self.stack[-1].accumulator = result

    def h_throw(self, frame, ops):
        raise V.ScriptError(frame.accumulator)

    def h_enter_try(self, frame, ops):
        self.emit("TryPush", ops[0])
        frame.handlers.append(ops[0])
        frame.pc += 1

    def h_leave_try(self, frame, ops):
        self.emit("TryPop")
        frame.handlers.pop()
        frame.pc += 1


def baseline_trace(fn: BytecodeFunction, args: list, symbolic_params=(),
                   env: BytecodeProgram | None = None, op_cap: int = DEFAULT_OP_CAP,
                   snapshots: list | None = None) -> MicroTrace:
    """Execute ``fn`` on concrete ``args`` and return the emitted micro-op trace."""
    return BaselineTracer(program_of(fn, env), op_cap).run(fn, args, symbolic_params, snapshots)


def extract_function_instr(trace: MicroTrace) -> MicroTrace:
    """Drop the frame/feedback verification ops, keeping control-flow ops in order."""
    return replace(trace, ops=[op for op in trace.ops if op.tag == CONTROL_FLOW])


def dispatch_pcs(trace: MicroTrace) -> list[int]:
    """Bytecode pcs in dispatch order, read off a raw (unextracted) trace."""
    return [op.origin_pc for op in trace.ops if op.kind == "VerifyFrameSize"]


def dispatch_sites(trace: MicroTrace) -> list[tuple[int, int]]:
    """(function index, pc) per dispatch, read off a raw trace."""
    return [(op.operands[0], op.origin_pc) for op in trace.ops
            if op.kind == "VerifyFeedbackVector"]


def op_groups(trace: MicroTrace) -> list[list[MicroOp]]:
    """Split ops into per-dispatch groups.

    Raw traces split at each VerifyFrameSize; extracted traces split where
    the origin pc changes.
    """
    raw = trace.has_verification
    groups: list[list[MicroOp]] = []
    for op in trace.ops:
        if raw:
            new = op.kind == "VerifyFrameSize"
        else:
            new = not groups or groups[-1][-1].origin_pc != op.origin_pc
        if new or not groups:
            groups.append([])
        groups[-1].append(op)
    return groups


def branch_signature(trace: MicroTrace) -> tuple:
    """(function, pc, taken) for every conditional branch: the path identity."""
    return tuple((op.operands[4], op.operands[0], op.kind == "BranchTaken")
                 for op in trace.ops if op.kind in ("BranchTaken", "BranchNotTaken"))


# text format

def _span_text(span) -> str:
    return "-" if span is None else f"{span[0]}:{span[1]}+{span[2]}"


def _span_parse(text: str):
    if text == "-":
        return None
    line, rest = text.split(":")
    col, length = rest.split("+")
    return (int(line), int(col), int(length))


def _msg_text(message) -> str:
    return "-" if message is None else V.pct_field(message.encode("latin-1"))


def _msg_parse(text: str):
    if text == "-":
        return None
    return "" if text == "%" else V.unpct(text).decode("latin-1")


def dump_trace(trace: MicroTrace) -> str:
    lines = ["TRACE v1", f"func {trace.function_name}"]
    for i, arg in enumerate(trace.input_snapshot):
        lines.append("arg {} {} {}".format(i, *V.encode_value(arg)))
    for sid, (name, base, length) in sorted(trace.symbol_table.items()):
        lines.append(f"sym {sid} {base} {length} {name}")
    for r in trace.memory.regions:
        init = "-" if r.init is None else V.pct_field(r.init)
        lines.append(f"mem {r.base} {r.length} {r.cls} {init}")
    out = trace.outcome
    lines.append("outcome {} {} {} {} {}".format(out.kind, *V.encode_value(out.value),
                                                 _msg_text(out.message), _span_text(out.span)))
    for message, span in out.handled:
        lines.append(f"handled {_msg_text(message)} {_span_text(span)}")
    for seq, op in enumerate(trace.ops):
        lines.append(" ".join([str(seq), op.tag, str(op.origin_pc), op.kind,
                               *map(str, op.operands)]))
    return "\n".join(lines) + "\n"


def load_trace(text: str) -> MicroTrace:
    lines = text.splitlines()
    if not lines or lines[0] != "TRACE v1":
        raise TraceFormatError("missing 'TRACE v1' header")
    name = None
    args, symbols, handled, ops = [], {}, [], []
    memory = TraceMemory()
    outcome = None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        head = parts[0]
        try:
            if head == "func":
                name = parts[1]
            elif head == "arg":
                args.append(V.decode_value(parts[2], parts[3]))
            elif head == "sym":
                symbols[int(parts[1])] = (parts[4], int(parts[2]), int(parts[3]))
            elif head == "mem":
                base, length, cls, init = int(parts[1]), int(parts[2]), parts[3], parts[4]
                data = None if init == "-" else (b"" if init == "%" else V.unpct(init))
                memory.regions.append(Region(base, length, cls, data))
                memory.next_base = base + length + 1
            elif head == "outcome":
                outcome = ExecOutcome(parts[1], V.decode_value(parts[2], parts[3]),
                                      _msg_parse(parts[4]), _span_parse(parts[5]))
            elif head == "handled":
                handled.append((_msg_parse(parts[1]), _span_parse(parts[2])))
            elif head.isdigit():
                if int(head) != len(ops):
                    raise TraceFormatError(f"line {lineno}: sequence number out of order")
                kind = parts[3]
                if kind not in MICRO_KINDS:
                    raise TraceFormatError(f"line {lineno}: unknown micro-op {kind}")
                ops.append(MicroOp(kind, tuple(int(x) for x in parts[4:]), int(parts[2]),
                                   parts[1]))
            else:
                raise TraceFormatError(f"line {lineno}: unknown record {head!r}")
        except (IndexError, ValueError) as exc:
            raise TraceFormatError(f"line {lineno}: {exc}") from exc
    if name is None or outcome is None:
        raise TraceFormatError("trace lacks func or outcome header")
    outcome.handled = handled
    return MicroTrace(ops, name, args, symbols, outcome, memory)
