"""Lift extracted micro-op traces into a self-contained SSA IR module.

The IR is straight-line along the traced path: every conditional branch
becomes an ``AssertPathTaken`` over the recomputed condition, string
handlers become byte-level ``ReadMem8``/``WriteMem8`` sequences, and the
memory, symbolic-input and error intrinsics stay abstract until an
evaluator gives them meaning.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace

from . import values as V
from .tracer import (
    BANK_PARAM, BANK_REG, CONTROL_FLOW, SENSE_IF_TRUE, STR_CHARAT, STR_CHARCODE, STR_CONCAT,
    STR_EQ, STR_INDEXOF, STR_LEN, STR_SUBSTRING, MicroOp, MicroTrace, Region,
)

# operand signature per IR kind: v = value reference, i = immediate
IR_SIGNATURES: dict[str, str] = {
    "Const": "ii",
    "MkStr": "iiv",
    "StrLen": "v",
    "Add": "vv", "Sub": "vv", "Mul": "vv", "Div": "vv", "Mod": "vv",
    "CmpEq": "vv", "CmpLt": "vv", "CmpLe": "vv",
    "Not": "v", "And": "vv", "Or": "vv",
    "Select": "vvv",
    "ReadMem8": "i",
    "WriteMem8": "iv",
    "MakeSymbolic": "i",
    "InstallMem": "",
    "LoadReg": "iii",
    "StoreReg": "iiiv",
    "AssertPathTaken": "viii",
    "LogError": "vi",
}
NO_RESULT = {"WriteMem8", "InstallMem", "StoreReg", "AssertPathTaken", "LogError"}
ENTRY_LABEL = "main"


class LiftError(Exception):
    def __init__(self, seq: int, reason: str):
        super().__init__(f"micro-op {seq}: {reason}")
        self.seq = seq
        self.reason = reason


class EvalError(Exception):
    pass


class IrParseError(Exception):
    pass


@dataclass(frozen=True)
class IrInstr:
    result: int | None
    kind: str
    operands: tuple[int, ...]


@dataclass(frozen=True)
class PathAssertion:
    value_id: int
    expected: bool
    origin_pc: int
    target_pc: int


@dataclass
class IrBlock:
    label: str
    instrs: list[IrInstr] = field(default_factory=list)
    terminator: tuple = ("HALT", "Returned", None)  # ("GOTO", label) | ("HALT", kind, value)


@dataclass
class IrModule:
    blocks: list[IrBlock] = field(default_factory=list)
    entry: str | None = None
    symbol_decls: dict[int, tuple[int, int, str]] = field(default_factory=dict)
    memory_image: list[Region] = field(default_factory=list)

    @property
    def assertions(self) -> list[PathAssertion]:
        return [PathAssertion(ins.operands[0], bool(ins.operands[1]), ins.operands[2],
                              ins.operands[3])
                for block in self.blocks for ins in block.instrs
                if ins.kind == "AssertPathTaken"]

    def block(self, label: str) -> IrBlock:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)


# lifting

_INT, _STR, _BOOL, _NULL = V.TAG_INT, V.TAG_STR, V.TAG_BOOL, V.TAG_NULL


class _Lifter:
    def __init__(self, trace: MicroTrace):
        self.trace = trace
        self.regions = sorted(trace.memory.regions, key=lambda r: r.base)
        self.bases = [r.base for r in self.regions]
        self.blocks: list[IrBlock] = []
        self.instrs: list[IrInstr] = []
        self.next_id = 0
        self.meta: dict[int, tuple] = {}  # value id -> (tag, base, cap)
        self.slots: dict[tuple[int, int, int], tuple] = {}
        self.depth = 0
        self.acc: int | None = None
        self.seq = -1

    def fail(self, reason: str):
        raise LiftError(self.seq, reason)

    def emit(self, kind: str, *operands: int, meta: tuple | None = None) -> int | None:
        if kind in NO_RESULT:
            self.instrs.append(IrInstr(None, kind, operands))
            return None
        vid = self.next_id
        self.next_id += 1
        self.instrs.append(IrInstr(vid, kind, operands))
        if meta is not None:
            self.meta[vid] = meta
        return vid

    def const(self, tag: int, payload: int = 0) -> int:
        return self.emit("Const", tag, payload, meta=(tag,))

    def cut(self):
        label = f"b{len(self.blocks)}"
        self.blocks.append(IrBlock(label, self.instrs, ("GOTO", f"b{len(self.blocks) + 1}")))
        self.instrs = []

    def region(self, base: int, length: int | None = None) -> Region:
        i = bisect.bisect_right(self.bases, base) - 1
        if i < 0 or self.regions[i].base != base:
            self.fail(f"address {base} is not the base of a mapped region")
        r = self.regions[i]
        if length is not None and r.length != length:
            self.fail(f"region at {base} has length {r.length}, op says {length}")
        return r

    def string(self, base: int, length: int, length_id: int | None = None) -> int:
        self.region(base, length)
        if length_id is None:
            length_id = self.const(_INT, length)
        return self.emit("MkStr", base, length, length_id, meta=(_STR, base, length))

    def tag(self, vid: int) -> int:
        return self.meta[vid][0]

    def need_str(self, vid: int) -> tuple[int, int]:
        m = self.meta.get(vid)
        if m is None or m[0] != _STR:
            self.fail("string operation on a non-string value")
        return m[1], m[2]

    def load(self, bank: int, idx: int) -> int:
        key = (self.depth, bank, idx)
        if key not in self.slots:
            # never written on this path: registers start out null
            return self.const(_NULL)
        return self.emit("LoadReg", *key, meta=self.slots[key])

    def store(self, bank: int, idx: int, vid: int, depth: int | None = None):
        key = (self.depth if depth is None else depth, bank, idx)
        self.emit("StoreReg", *key, vid)
        self.slots[key] = self.meta[vid]

    def drop_frames_above(self, depth: int):
        self.slots = {k: v for k, v in self.slots.items() if k[0] <= depth}

    def truthy(self, vid: int, tag: int) -> int:
        if self.tag(vid) != tag:
            self.fail(f"branch tag {tag} disagrees with lifted value tag {self.tag(vid)}")
        if tag == _BOOL:
            return vid
        if tag == _NULL:
            return self.const(_BOOL, 0)
        zero = self.const(_INT, 0)
        if tag == _INT:
            eq = self.emit("CmpEq", vid, zero, meta=(_BOOL,))
            return self.emit("Not", eq, meta=(_BOOL,))
        length = self.emit("StrLen", vid, meta=(_INT,))
        return self.emit("CmpLt", zero, length, meta=(_BOOL,))

    def lift(self) -> IrModule:
        trace = self.trace
        for i, arg in enumerate(trace.input_snapshot):
            tag = V.tag_of(arg)
            if tag == _STR:
                region = self._arg_region(i)
                vid = self.string(region.base, region.length)
            elif tag == _NULL:
                vid = self.const(_NULL)
            else:
                vid = self.const(tag, int(arg))
            self.store(BANK_PARAM, i, vid)
        ops = trace.ops
        n = len(ops)
        halted = False
        k = 0
        while k < n:
            op = ops[k]
            self.seq = k
            if op.tag != CONTROL_FLOW:
                self.fail(f"verification op {op.kind} in trace; run extract_function_instr first")
            if halted:
                self.fail("micro-ops after the function halted")
            if op.kind == "StrOpBegin":
                end = k + 1
                while end < n and ops[end].kind in ("MemRead8", "MemWrite8"):
                    end += 1
                if end >= n or ops[end].kind != "StrOpEnd" or ops[end].operands[0] != op.operands[0]:
                    self.fail("unterminated string operation")
                self.string_op(op, ops[k + 1:end])
                k = end + 1
                continue
            halted = self.step(op)
            k += 1
        if not halted:
            self.seq = n
            self.fail("trace ends without a return or unhandled throw")
        return IrModule(self.blocks, None,
                        {sid: (base, length, name)
                         for sid, (name, base, length) in sorted(trace.symbol_table.items())},
                        list(self.regions))

    def _arg_region(self, i: int) -> Region:
        # arguments are materialized first, in order
        strings = [r for r in self.regions if r.cls == "StringData"]
        idx = sum(1 for a in self.trace.input_snapshot[:i] if V.tag_of(a) == _STR)
        if idx >= len(strings) or strings[idx].init != self.trace.input_snapshot[i]:
            self.fail(f"argument {i} has no matching memory region")
        return strings[idx]

    def finish(self, kind: str, vid: int):
        self.blocks.append(IrBlock(f"b{len(self.blocks)}", self.instrs, ("HALT", kind, vid)))
        self.instrs = []

    def step(self, op: MicroOp) -> bool:
        kind, a = op.kind, op.operands
        if kind == "LoadReg":
            self.acc = self.load(a[0], a[1])
        elif kind == "StoreReg":
            self.store(a[0], a[1], self.acc)
        elif kind in ("LoadConst", "LoadImm"):
            tag = a[0]
            if tag == _STR:
                self.acc = self.string(a[1], a[2])
            elif tag == _NULL:
                self.acc = self.const(_NULL)
            else:
                self.acc = self.const(tag, a[1])
        elif kind == "SymbolicPin":
            sid, base, length, target = a
            if self.trace.symbol_table.get(sid, (None, base, length))[1:] != (base, length):
                self.fail(f"symbol {sid} does not match the symbol table")
            self.region(base, length)
            vid = self.emit("MakeSymbolic", sid, meta=(_STR, base, length))
            if target < 0:
                self.acc = vid
            else:
                self.store(BANK_REG, target, vid)
        elif kind in ("ArithAdd", "ArithSub", "ArithMul", "ArithDiv", "ArithMod"):
            lhs = self.load(BANK_REG, a[0])
            self.acc = self.emit(kind[5:], lhs, self.acc, meta=(_INT,))
        elif kind == "ArithNeg":
            self.acc = self.emit("Sub", self.const(_INT, 0), self.acc, meta=(_INT,))
        elif kind == "LogicNot":
            self.acc = self.emit("Not", self.truthy(self.acc, a[0]), meta=(_BOOL,))
        elif kind == "CmpEq":
            lhs = self.load(BANK_REG, a[0])
            if a[1] != a[2]:
                self.acc = self.const(_BOOL, 0)
            elif a[1] == _NULL:
                self.acc = self.const(_BOOL, 1)
            else:
                self.acc = self.emit("CmpEq", lhs, self.acc, meta=(_BOOL,))
        elif kind in ("CmpLt", "CmpLe"):
            lhs = self.load(BANK_REG, a[0])
            self.acc = self.emit(kind, lhs, self.acc, meta=(_BOOL,))
        elif kind in ("BranchTaken", "BranchNotTaken"):
            pc, target, sense, tag = a[:4]
            cond = self.truthy(self.acc, tag)
            taken = kind == "BranchTaken"
            expected = taken if sense == SENSE_IF_TRUE else not taken
            self.emit("AssertPathTaken", cond, int(expected), pc, target)
            self.cut()
        elif kind == "CallBegin":
            self.cut()
            _, first, argc = a
            args = [self.load(BANK_REG, first + i) for i in range(argc)]
            self.drop_frames_above(self.depth)
            for i, vid in enumerate(args):
                self.store(BANK_PARAM, i, vid, depth=self.depth + 1)
            self.depth += 1
        elif kind == "Ret":
            if self.depth == 0:
                self.finish("Returned", self.acc)
                return True
        elif kind == "CallEnd":
            if self.depth == 0:
                self.fail("CallEnd without a matching CallBegin")
            self.depth -= 1
            self.drop_frames_above(self.depth)
            self.cut()
        elif kind == "ThrowOp":
            handled, popped, _ = a
            self.emit("LogError", self.acc, handled)
            if not handled:
                self.finish("UnhandledException", self.acc)
                return True
            self.depth -= popped
            if self.depth < 0:
                self.fail("throw unwinds past the entry frame")
            self.drop_frames_above(self.depth)
        elif kind in ("Jump", "TryPush", "TryPop"):
            pass
        elif kind in ("MemRead8", "MemWrite8", "StrOpEnd"):
            self.fail(f"{kind} outside a string operation")
        else:
            self.fail(f"unknown micro-op {kind}")
        return False

    # string operations

    def string_op(self, begin: MicroOp, body: list[MicroOp]):
        code, ra, rb, dst = begin.operands
        reads = [op.operands[0] for op in body if op.kind == "MemRead8"]
        writes = [op.operands[0] for op in body if op.kind == "MemWrite8"]
        if code == STR_LEN:
            self.need_str(self.acc)
            self.expect_body(body, [])
            self.acc = self.emit("StrLen", self.acc, meta=(_INT,))
            return
        s = self.load(BANK_REG, ra)
        s_base, s_cap = self.need_str(s)
        s_len = self.emit("StrLen", s, meta=(_INT,))
        zero = self.const(_INT, 0)
        if code in (STR_CHARAT, STR_CHARCODE):
            i = self.acc
            in_range = self.emit("And", self.emit("CmpLe", zero, i, meta=(_BOOL,)),
                                 self.emit("CmpLt", i, s_len, meta=(_BOOL,)), meta=(_BOOL,))
            byte = None
            if reads:
                addr = reads[0]
                self.check_in(addr, s_base, s_cap)
                pattern = [("MemRead8", addr)] + ([("MemWrite8", dst)] if code == STR_CHARAT else [])
                self.expect_body(body, pattern)
                byte = self.emit("ReadMem8", addr, meta=(_INT,))
            else:
                self.expect_body(body, [])
            if code == STR_CHARAT:
                cap = self.region(dst).length
                if byte is not None:
                    self.emit("WriteMem8", dst, byte)
                length = self.emit("Select", in_range, self.const(_INT, 1), zero, meta=(_INT,))
                self.acc = self.string(dst, cap, length)
            else:
                # with no byte on this path, 0 stands in for the unseen in-range byte
                hit = byte if byte is not None else zero
                self.acc = self.emit("Select", in_range, hit, self.const(_INT, -1), meta=(_INT,))
            return
        if code == STR_INDEXOF:
            t = self.acc
            t_base, t_cap = self.need_str(t)
            t_len = self.emit("StrLen", t, meta=(_INT,))
            minus1 = self.const(_INT, -1)
            if t_cap == 0:
                self.expect_body(body, [])
                empty = self.emit("CmpEq", t_len, zero, meta=(_BOOL,))
                self.acc = self.emit("Select", empty, zero, minus1, meta=(_INT,))
                return
            if writes or (len(reads) - t_cap) % t_cap or len(reads) < t_cap:
                self.fail("malformed indexOf byte sequence")
            t_bytes = []
            for j in range(t_cap):
                self.check_at(reads[j], t_base + j)
                t_bytes.append(self.emit("ReadMem8", reads[j], meta=(_INT,)))
            positions = (len(reads) - t_cap) // t_cap
            matches = []
            for p in range(positions):
                fits = self.emit("CmpLe", self.emit("Add", self.const(_INT, p), t_len, meta=(_INT,)),
                                 s_len, meta=(_BOOL,))
                cond = fits
                for j in range(t_cap):
                    addr = reads[t_cap + p * t_cap + j]
                    self.check_at(addr, s_base + p + j)
                    sb = self.emit("ReadMem8", addr, meta=(_INT,))
                    same = self.emit("CmpEq", sb, t_bytes[j], meta=(_BOOL,))
                    beyond = self.emit("CmpLe", t_len, self.const(_INT, j), meta=(_BOOL,))
                    cond = self.emit("And", cond, self.emit("Or", beyond, same, meta=(_BOOL,)),
                                     meta=(_BOOL,))
                matches.append(cond)
            result = minus1
            if positions == 0:
                # the trace inspected no position at all; guess a hit at 0
                # whenever the needle could fit so the solver can grow the
                # haystack, and let re-tracing settle the bytes
                fits = self.emit("CmpLe", t_len, s_len, meta=(_BOOL,))
                result = self.emit("Select", fits, zero, minus1, meta=(_INT,))
            for p in reversed(range(positions)):
                result = self.emit("Select", matches[p], self.const(_INT, p), result, meta=(_INT,))
            self.acc = result
            return
        if code == STR_SUBSTRING:
            a = self.load(BANK_REG, rb)
            b = self.acc

            def clamp(x):
                below = self.emit("CmpLt", x, zero, meta=(_BOOL,))
                above = self.emit("CmpLt", s_len, x, meta=(_BOOL,))
                upper = self.emit("Select", above, s_len, x, meta=(_INT,))
                return self.emit("Select", below, zero, upper, meta=(_INT,))

            ca, cb = clamp(a), clamp(b)
            ordered = self.emit("CmpLe", ca, cb, meta=(_BOOL,))
            lo = self.emit("Select", ordered, ca, cb, meta=(_INT,))
            hi = self.emit("Select", ordered, cb, ca, meta=(_INT,))
            length = self.emit("Sub", hi, lo, meta=(_INT,))
            cap = self.region(dst).length
            self.copy_pairs(body, s_base, s_cap, dst, cap, 0, len(writes))
            self.acc = self.string(dst, cap, length)
            return
        if code == STR_CONCAT:
            t = self.acc
            t_base, t_cap = self.need_str(t)
            t_len = self.emit("StrLen", t, meta=(_INT,))
            cap = self.region(dst).length
            if cap != s_cap + t_cap:
                self.fail("concat destination has the wrong size")
            self.copy_pairs(body[:2 * s_cap], s_base, s_cap, dst, cap, 0, s_cap, contiguous=True)
            self.copy_pairs(body[2 * s_cap:], t_base, t_cap, dst + s_cap, t_cap, 0, t_cap,
                            contiguous=True)
            length = self.emit("Add", s_len, t_len, meta=(_INT,))
            self.acc = self.string(dst, cap, length)
            return
        if code == STR_EQ:
            t = self.acc
            t_base, t_cap = self.need_str(t)
            t_len = self.emit("StrLen", t, meta=(_INT,))
            common = min(s_cap, t_cap)
            self.expect_body(body, [(kind, addr) for k in range(common)
                                    for kind, addr in (("MemRead8", s_base + k),
                                                       ("MemRead8", t_base + k))])
            eq = self.emit("CmpEq", s_len, t_len, meta=(_BOOL,))
            for k in range(common):
                sb = self.emit("ReadMem8", s_base + k, meta=(_INT,))
                tb = self.emit("ReadMem8", t_base + k, meta=(_INT,))
                beyond = self.emit("CmpLe", s_len, self.const(_INT, k), meta=(_BOOL,))
                same = self.emit("CmpEq", sb, tb, meta=(_BOOL,))
                eq = self.emit("And", eq, self.emit("Or", beyond, same, meta=(_BOOL,)),
                               meta=(_BOOL,))
            self.acc = eq
            return
        self.fail(f"unknown string operation code {code}")

    def copy_pairs(self, body, src_base, src_cap, dst, dst_cap, _start, count, contiguous=False):
        """Lower alternating read/write pairs copying bytes into ``dst``."""
        if len(body) != 2 * count:
            self.fail("string copy has the wrong number of byte accesses")
        first_src = None
        for k in range(count):
            rd, wr = body[2 * k], body[2 * k + 1]
            if rd.kind != "MemRead8" or wr.kind != "MemWrite8":
                self.fail("string copy must alternate reads and writes")
            addr = rd.operands[0]
            self.check_in(addr, src_base, src_cap)
            if first_src is None:
                first_src = addr
            if addr != first_src + k or (contiguous and addr != src_base + k):
                self.fail("string copy reads are not contiguous")
            self.check_at(wr.operands[0], dst + k)
            byte = self.emit("ReadMem8", addr, meta=(_INT,))
            self.emit("WriteMem8", wr.operands[0], byte)

    def check_in(self, addr: int, base: int, cap: int):
        if not base <= addr < base + cap:
            self.fail(f"address {addr} outside string at {base} of length {cap}")

    def check_at(self, addr: int, expected: int):
        if addr != expected:
            self.fail(f"byte access at {addr}, expected {expected}")

    def expect_body(self, body: list[MicroOp], pattern: list[tuple[str, int]]):
        got = [(op.kind, op.operands[0]) for op in body]
        if got != pattern:
            self.fail(f"unexpected byte accesses {got[:4]}...")


def lift(extracted: MicroTrace) -> IrModule:
    """Translate an extracted trace into IR in a single pass."""
    return _Lifter(extracted).lift()


def build_entry(module: IrModule) -> IrModule:
    """Add the synthetic ``main`` block: install memory, mark symbols, chain blocks."""
    if module.entry is not None:
        return module
    if not module.blocks:
        raise ValueError("cannot build an entry for a module without blocks")
    next_id = 1 + max((ins.result for b in module.blocks for ins in b.instrs
                       if ins.result is not None), default=-1)
    instrs = [IrInstr(None, "InstallMem", ())]
    for sid in sorted(module.symbol_decls):
        instrs.append(IrInstr(next_id, "MakeSymbolic", (sid,)))
        next_id += 1
    entry = IrBlock(ENTRY_LABEL, instrs, ("GOTO", module.blocks[0].label))
    return replace(module, blocks=[entry] + list(module.blocks), entry=ENTRY_LABEL)


def entry_chain(module: IrModule) -> list[str]:
    """Labels visited from the entry block following GOTO terminators."""
    labels = []
    block = module.block(module.entry)
    while block.terminator[0] == "GOTO":
        block = module.block(block.terminator[1])
        labels.append(block.label)
    return labels


# evaluation

@dataclass
class StrVal:
    base: int
    length: object  # domain integer
    cap: int


@dataclass
class IrResult:
    kind: str
    value: object
    message: str | None
    handled: list[str]
    assertion_results: list[bool]

    def __iter__(self):
        # unpacks as (outcomeKind, assertionResults)
        return iter((self.kind, self.assertion_results))


class IrEvaluator:
    """Concrete IR evaluator; subclasses override the value-domain hooks."""

    def __init__(self, module: IrModule, bindings: dict[int, bytes]):
        if module.entry is None:
            module = build_entry(module)
        missing = set(module.symbol_decls) - set(bindings)
        if missing:
            raise EvalError(f"no binding for symbols {sorted(missing)}")
        self.module = module
        self.bindings = {sid: bytes(b) for sid, b in bindings.items()}
        self.regions = sorted(module.memory_image, key=lambda r: r.base)
        self.bases = [r.base for r in self.regions]
        self.cells: dict[int, list] = {}
        self.symbolic_regions: dict[int, int] = {}  # base -> symbol id
        self.values: dict[int, object] = {}
        self.slots: dict[tuple, object] = {}
        self.assertions: list[bool] = []
        self.handled: list[str] = []

    # memory
    def locate(self, addr: int) -> tuple[Region, int]:
        i = bisect.bisect_right(self.bases, addr) - 1
        if i >= 0:
            r = self.regions[i]
            if r.base <= addr < r.base + r.length:
                return r, addr - r.base
        raise EvalError(f"memory access at {addr} outside every region")

    def install(self):
        for r in self.regions:
            data = r.init if r.init is not None else bytes(r.length)
            self.cells[r.base] = list(data) + [0] * (r.length - len(data))

    def read8(self, addr: int):
        r, off = self.locate(addr)
        return self.cells[r.base][off]

    def write8(self, addr: int, value):
        r, off = self.locate(addr)
        self.cells[r.base][off] = value

    def make_symbolic(self, sid: int) -> StrVal:
        base, cap, _ = self.module.symbol_decls[sid]
        data = self.bindings[sid]
        cells = self.cells.setdefault(base, [0] * cap)
        for off in range(cap):
            cells[off] = data[off] if off < len(data) else 0
        self.symbolic_regions[base] = sid
        return StrVal(base, self.sym_length(sid, len(data)), cap)

    def sym_length(self, sid: int, length: int):
        return length

    # value domain
    def concrete(self, v):
        return v

    def arith(self, kind: str, a, b):
        if kind == "Add":
            return V.wrap64(a + b)
        if kind == "Sub":
            return V.wrap64(a - b)
        if kind == "Mul":
            return V.wrap64(a * b)
        if b == 0:
            return 0  # total on every path; the traced path never divides by zero
        q = V.div_trunc(a, b)
        return V.wrap64(q) if kind == "Div" else V.wrap64(a - b * q)

    def compare(self, kind: str, a, b):
        if kind == "CmpEq":
            return a == b
        if kind == "CmpLt":
            return a < b
        return a <= b

    def logic_not(self, a):
        return not a

    def logic(self, kind: str, a, b):
        return (a and b) if kind == "And" else (a or b)

    def select(self, c, a, b):
        return a if c else b

    def truth(self, c) -> bool:
        return bool(c)

    def run(self) -> IrResult:
        values = self.values
        block = self.module.block(self.module.entry)
        visited = 0
        while True:
            visited += 1
            if visited > len(self.module.blocks) + 1:
                raise EvalError("block chain does not terminate")
            for ins in block.instrs:
                values_ = self.execute(ins, values)
                if ins.result is not None:
                    values[ins.result] = values_
            term = block.terminator
            if term[0] == "GOTO":
                block = self.module.block(term[1])
                continue
            kind, vid = term[1], term[2]
            value = self.decode(values[vid]) if vid is not None else None
            message = V.message_of(value) if kind != "Returned" else None
            return IrResult(kind, value, message, self.handled, self.assertions)

    def decode(self, v):
        if isinstance(v, StrVal):
            n = min(self.concrete(v.length), v.cap)
            cells = self.cells[v.base]
            return bytes(self.concrete(cells[k]) for k in range(max(n, 0)))
        v = self.concrete(v)
        return v

    def execute(self, ins: IrInstr, values: dict):
        k, o = ins.kind, ins.operands
        if k == "Const":
            tag, payload = o
            if tag == V.TAG_NULL:
                return None
            return bool(payload) if tag == V.TAG_BOOL else payload
        if k == "MkStr":
            return StrVal(o[0], values[o[2]], o[1])
        if k == "StrLen":
            return values[o[0]].length
        if k in ("Add", "Sub", "Mul", "Div", "Mod"):
            return self.arith(k, values[o[0]], values[o[1]])
        if k in ("CmpEq", "CmpLt", "CmpLe"):
            return self.compare(k, values[o[0]], values[o[1]])
        if k == "Not":
            return self.logic_not(values[o[0]])
        if k in ("And", "Or"):
            return self.logic(k, values[o[0]], values[o[1]])
        if k == "Select":
            return self.select(values[o[0]], values[o[1]], values[o[2]])
        if k == "ReadMem8":
            return self.read8(o[0])
        if k == "WriteMem8":
            return self.write8(o[0], values[o[1]])
        if k == "MakeSymbolic":
            return self.make_symbolic(o[0])
        if k == "InstallMem":
            return self.install()
        if k == "LoadReg":
            return self.slots.get(o, None)
        if k == "StoreReg":
            self.slots[o[:3]] = values[o[3]]
            return None
        if k == "AssertPathTaken":
            self.on_assert(values[o[0]], bool(o[1]), o[2], o[3])
            return None
        if k == "LogError":
            if o[1]:
                self.handled.append(V.message_of(self.decode(values[o[0]])))
            return None
        raise EvalError(f"unknown IR instruction {k}")

    def on_assert(self, cond, expected: bool, pc: int, target: int):
        self.assertions.append(self.truth(cond) == expected)


def eval_ir(module: IrModule, bindings: dict[int, bytes]) -> IrResult:
    """Concretely run ``module`` with symbol ``bindings``."""
    return IrEvaluator(module, bindings).run()


def original_bindings(module: IrModule, trace: MicroTrace) -> dict[int, bytes]:
    """Bindings reproducing the traced run: each symbol's initial bytes."""
    out = {}
    for sid, (base, length, _) in module.symbol_decls.items():
        region = next(r for r in module.memory_image if r.base == base)
        out[sid] = region.init
    return out


# text format

def _ref(v: int) -> str:
    return f"%{v}"


def dump_ir(module: IrModule) -> str:
    lines = ["MODULE v1"]
    if module.entry is not None:
        lines.append(f"ENTRY {module.entry}")
    for sid, (base, length, name) in sorted(module.symbol_decls.items()):
        lines.append(f"SYM {sid} {base} {length} {name}")
    for r in module.memory_image:
        data = r.init if r.init is not None else None
        hexed = "-" if data is None else (data.hex() or "=")
        lines.append(f"MEM {r.base} {r.length} {r.cls} {hexed}")
    for block in module.blocks:
        lines.append(f"BLOCK {block.label}")
        for ins in block.instrs:
            ops = [(_ref(x) if kind == "v" else str(x))
                   for kind, x in zip(IR_SIGNATURES[ins.kind], ins.operands)]
            body = " ".join([ins.kind, *ops])
            lines.append(body if ins.result is None else f"{_ref(ins.result)} = {body}")
        term = block.terminator
        if term[0] == "GOTO":
            lines.append(f"GOTO {term[1]}")
        else:
            lines.append(f"HALT {term[1]}" + ("" if term[2] is None else f" {_ref(term[2])}"))
    return "\n".join(lines) + "\n"


def _operand(text: str, kind: str, lineno: int) -> int:
    try:
        if kind == "v":
            if not text.startswith("%"):
                raise ValueError
            return int(text[1:])
        return int(text)
    except ValueError:
        raise IrParseError(f"line {lineno}: bad operand {text!r}") from None


def load_ir(text: str) -> IrModule:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "MODULE v1":
        raise IrParseError("missing 'MODULE v1' header")
    module = IrModule()
    block = None
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        head = parts[0]
        try:
            if head == "ENTRY":
                module.entry = parts[1]
            elif head == "SYM":
                module.symbol_decls[int(parts[1])] = (int(parts[2]), int(parts[3]), parts[4])
            elif head == "MEM":
                data = parts[4]
                init = None if data == "-" else (b"" if data == "=" else bytes.fromhex(data))
                module.memory_image.append(Region(int(parts[1]), int(parts[2]), parts[3], init))
            elif head == "BLOCK":
                block = IrBlock(parts[1], [], None)
                module.blocks.append(block)
            elif head == "GOTO":
                block.terminator = ("GOTO", parts[1])
                block = None
            elif head == "HALT":
                block.terminator = ("HALT", parts[1],
                                    _operand(parts[2], "v", lineno) if len(parts) > 2 else None)
                block = None
            else:
                if block is None:
                    raise IrParseError(f"line {lineno}: instruction outside a block")
                result = None
                if len(parts) > 2 and parts[1] == "=":
                    result = _operand(parts[0], "v", lineno)
                    parts = parts[2:]
                kind = parts[0]
                sig = IR_SIGNATURES.get(kind)
                if sig is None:
                    raise IrParseError(f"line {lineno}: unknown instruction {kind!r}")
                if len(parts) - 1 != len(sig):
                    raise IrParseError(f"line {lineno}: {kind} takes {len(sig)} operands")
                if (result is None) != (kind in NO_RESULT):
                    raise IrParseError(f"line {lineno}: result mismatch for {kind}")
                block.instrs.append(IrInstr(result, kind, tuple(
                    _operand(t, s, lineno) for t, s in zip(parts[1:], sig))))
        except (IndexError, ValueError, AttributeError) as exc:
            raise IrParseError(f"line {lineno}: {exc}") from exc
    for b in module.blocks:
        if b.terminator is None:
            raise IrParseError(f"block {b.label} has no terminator")
    return module
