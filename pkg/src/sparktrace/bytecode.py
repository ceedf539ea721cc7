"""Accumulator-plus-registers bytecode, its compiler, verifier and text form."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from urllib.parse import quote_from_bytes, unquote_to_bytes

from .frontend import AstNode, functions, param_names

# operand kinds: r = register, c = constant index, j = jump target,
# f = function index, i = plain integer
OPERANDS: dict[str, str] = {
    "LdaConst": "c",
    "LdaParam": "i",
    "Ldar": "r",
    "Star": "r",
    "Add": "r",
    "Sub": "r",
    "Mul": "r",
    "Div": "r",
    "Mod": "r",
    "Neg": "",
    "Not": "",
    "TestEqual": "r",
    "TestLess": "r",
    "TestLessEq": "r",
    "Jump": "j",
    "JumpIfFalse": "j",
    "JumpIfTrue": "j",
    "StrLen": "",
    "StrCharAt": "r",
    "StrCharCode": "r",
    "StrIndexOf": "r",
    "StrSubstring": "rr",
    "StrConcat": "r",
    "CallFunc": "fri",
    "Return": "",
    "Throw": "",
    "EnterTry": "j",
    "LeaveTry": "",
    "PinSymbolic": "ri",
}

JUMPS = {"Jump", "JumpIfFalse", "JumpIfTrue"}
CONDITIONAL_JUMPS = {"JumpIfFalse", "JumpIfTrue"}
TERMINATORS = {"Jump", "Return", "Throw"}

INT_MIN = -(1 << 63)
INT_MAX = (1 << 63) - 1


class CompileError(Exception):
    pass


class VerifyError(Exception):
    def __init__(self, index: int, reason: str):
        super().__init__(f"bytecode {index}: {reason}")
        self.index = index
        self.reason = reason


@dataclass(frozen=True)
class Bytecode:
    op: str
    operands: tuple[int, ...] = ()

    def __repr__(self) -> str:
        return " ".join([self.op, *map(str, self.operands)])


@dataclass(eq=True)
class BytecodeFunction:
    name: str
    param_count: int
    frame_size: int
    constants: list = field(default_factory=list)
    code: list[Bytecode] = field(default_factory=list)
    statement_map: dict[int, tuple[int, int, int]] = field(default_factory=dict)
    catch_spans: dict[int, tuple[int, int, int]] = field(default_factory=dict)
    index: int = 0
    param_names: list[str] = field(default_factory=list)

    @property
    def statements(self) -> set[tuple[int, int, int]]:
        return set(self.statement_map.values())


@dataclass
class BytecodeProgram:
    """All compiled functions of one source program, indexable by name."""

    functions: list[BytecodeFunction]
    exports: tuple[str, ...] = ()

    def __post_init__(self):
        self.by_name = {fn.name: fn for fn in self.functions}

    def __getitem__(self, name: str) -> BytecodeFunction:
        return self.by_name[name]

    def __contains__(self, name: str) -> bool:
        return name in self.by_name

    @property
    def statements(self) -> set[tuple[str, tuple[int, int, int]]]:
        return {(fn.name, span) for fn in self.functions for span in fn.statements}


def const_key(value) -> tuple:
    return (type(value).__name__, value)


class _FunctionCompiler:
    def __init__(self, fn: AstNode, index: int, signatures: dict[str, tuple[int, int]]):
        self.ast = fn
        self.signatures = signatures
        self.out = BytecodeFunction(fn.value, len(param_names(fn)), 0, index=index,
                                    param_names=param_names(fn))
        self.const_index: dict[tuple, int] = {}
        self.locals: dict[str, int] = {}
        self.next_reg = 0
        self.span: tuple[int, int, int] | None = None

    # register management
    def declare(self, name: str) -> int:
        if name not in self.locals:
            self.locals[name] = self.alloc()
        return self.locals[name]

    def alloc(self) -> int:
        reg = self.next_reg
        self.next_reg += 1
        self.out.frame_size = max(self.out.frame_size, self.next_reg)
        return reg

    def free(self, reg: int):
        assert reg == self.next_reg - 1, "temporaries are freed in stack order"
        self.next_reg -= 1

    def emit(self, op: str, *operands: int) -> int:
        pc = len(self.out.code)
        self.out.code.append(Bytecode(op, tuple(operands)))
        if self.span is not None:
            self.out.statement_map[pc] = self.span
        return pc

    def patch(self, pc: int, target: int):
        old = self.out.code[pc]
        self.out.code[pc] = Bytecode(old.op, (target,) + old.operands[1:])

    def here(self) -> int:
        return len(self.out.code)

    def constant(self, value) -> int:
        if isinstance(value, int) and not isinstance(value, bool) and not INT_MIN <= value <= INT_MAX:
            raise CompileError(f"integer literal {value} out of 64-bit range")
        key = const_key(value)
        if key not in self.const_index:
            self.const_index[key] = len(self.out.constants)
            self.out.constants.append(value)
        return self.const_index[key]

    def compile(self) -> BytecodeFunction:
        params = param_names(self.ast)
        if len(set(params)) != len(params):
            raise CompileError(f"duplicate parameter in {self.ast.value}")
        for p in params:
            self.declare(p)
        # var declarations and catch bindings are function scoped
        for node in self.ast.children[-1].walk():
            if node.kind in ("VarDecl", "TryCatch"):
                self.declare(node.value)
        for i in range(len(params)):
            self.emit("LdaParam", i)
            self.emit("Star", i)
        self.statement(self.ast.children[-1])
        self.span = None
        end = self.here()
        code = self.out.code
        reachable = not code or code[-1].op not in TERMINATORS or any(
            bc.op in JUMPS and bc.operands[0] == end for bc in code)
        if reachable:
            self.emit("LdaConst", self.constant(None))
            self.emit("Return")
        return self.out

    # statements
    def statement(self, node: AstNode):
        if node.kind == "Block":
            for child in node.children:
                self.statement(child)
            return
        outer = self.span
        self.span = node.span
        getattr(self, "stmt_" + node.kind)(node)
        self.span = outer

    def stmt_VarDecl(self, node):
        if node.children:
            self.expr(node.children[0])
        else:
            self.emit("LdaConst", self.constant(None))
        self.emit("Star", self.locals[node.value])

    def stmt_ExprStmt(self, node):
        self.expr(node.children[0])

    def stmt_Return(self, node):
        if node.children:
            self.expr(node.children[0])
        else:
            self.emit("LdaConst", self.constant(None))
        self.emit("Return")

    def stmt_Throw(self, node):
        self.expr(node.children[0])
        self.emit("Throw")

    def stmt_If(self, node):
        self.expr(node.children[0])
        skip = self.emit("JumpIfFalse", 0)
        self.statement(node.children[1])
        if len(node.children) == 3:
            self.span = node.span
            end = self.emit("Jump", 0)
            self.patch(skip, self.here())
            self.statement(node.children[2])
            self.patch(end, self.here())
        else:
            self.patch(skip, self.here())

    def stmt_While(self, node):
        top = self.here()
        self.expr(node.children[0])
        exit_ = self.emit("JumpIfFalse", 0)
        self.statement(node.children[1])
        self.span = node.span
        self.emit("Jump", top)
        self.patch(exit_, self.here())

    def stmt_For(self, node):
        init, test, update, body = node.children
        if init.kind == "Block":
            pass
        elif init.kind == "VarDecl":
            self.stmt_VarDecl(init)
        else:
            self.expr(init.children[0])
        top = self.here()
        self.expr(test)
        exit_ = self.emit("JumpIfFalse", 0)
        self.statement(body)
        self.span = node.span
        if update.kind != "Block":
            self.expr(update.children[0])
        self.emit("Jump", top)
        self.patch(exit_, self.here())

    def stmt_TryCatch(self, node):
        body, handler = node.children
        enter = self.emit("EnterTry", 0)
        self.statement(body)
        self.span = node.span
        self.emit("LeaveTry")
        end = self.emit("Jump", 0)
        self.patch(enter, self.here())
        self.out.catch_spans[self.here()] = handler.span
        self.emit("Star", self.locals[node.value])
        self.statement(handler)
        self.patch(end, self.here())

    # expressions: result left in the accumulator
    def expr(self, node: AstNode):
        getattr(self, "expr_" + node.kind)(node)

    def expr_Literal(self, node):
        self.emit("LdaConst", self.constant(node.value))

    def expr_Identifier(self, node):
        if node.value not in self.locals:
            raise CompileError(f"undeclared identifier {node.value!r} in {self.ast.value}")
        self.emit("Ldar", self.locals[node.value])

    def expr_Assign(self, node):
        if node.value not in self.locals:
            raise CompileError(f"assignment to undeclared {node.value!r} in {self.ast.value}")
        self.expr(node.children[0])
        self.emit("Star", self.locals[node.value])

    def binary_into(self, op: str, left: AstNode, right: AstNode):
        self.expr(left)
        tmp = self.alloc()
        self.emit("Star", tmp)
        self.expr(right)
        self.emit(op, tmp)
        self.free(tmp)

    def expr_BinaryOp(self, node):
        op = node.value
        left, right = node.children
        simple = {"+": "Add", "-": "Sub", "*": "Mul", "/": "Div", "%": "Mod",
                  "==": "TestEqual", "<": "TestLess", "<=": "TestLessEq"}
        if op in simple:
            self.binary_into(simple[op], left, right)
        elif op == "!=":
            self.binary_into("TestEqual", left, right)
            self.emit("Not")
        elif op in (">", ">="):
            # a > b  ==  b < a, keeping left-to-right evaluation
            self.expr(left)
            t1 = self.alloc()
            self.emit("Star", t1)
            self.expr(right)
            t2 = self.alloc()
            self.emit("Star", t2)
            self.emit("Ldar", t1)
            self.emit("TestLess" if op == ">" else "TestLessEq", t2)
            self.free(t2)
            self.free(t1)
        elif op in ("&&", "||"):
            self.expr(left)
            jump = self.emit("JumpIfFalse" if op == "&&" else "JumpIfTrue", 0)
            self.expr(right)
            self.patch(jump, self.here())
        else:
            raise CompileError(f"unknown operator {op}")

    def expr_UnaryOp(self, node):
        self.expr(node.children[0])
        self.emit("Neg" if node.value == "-" else "Not")

    def expr_Call(self, node):
        if node.value not in self.signatures:
            raise CompileError(f"call to undeclared function {node.value!r}")
        index, arity = self.signatures[node.value]
        if arity != len(node.children):
            raise CompileError(f"{node.value} expects {arity} arguments, got {len(node.children)}")
        regs = []
        for arg in node.children:
            self.expr(arg)
            reg = self.alloc()
            self.emit("Star", reg)
            regs.append(reg)
        self.emit("CallFunc", index, regs[0] if regs else 0, len(regs))
        for reg in reversed(regs):
            self.free(reg)

    def expr_Index(self, node):
        obj, idx = node.children
        self.binary_into("StrCharAt", obj, idx)

    def expr_MethodCall(self, node):
        member = node.value
        obj, args = node.children[0], node.children[1:]
        if member == "length":
            self.expr(obj)
            self.emit("StrLen")
            return
        op = {"charAt": "StrCharAt", "charCodeAt": "StrCharCode",
              "indexOf": "StrIndexOf", "concat": "StrConcat"}.get(member)
        if op:
            self.binary_into(op, obj, args[0])
            return
        # substring(start[, end])
        self.expr(obj)
        t_obj = self.alloc()
        self.emit("Star", t_obj)
        self.expr(args[0])
        t_start = self.alloc()
        self.emit("Star", t_start)
        if len(args) == 2:
            self.expr(args[1])
        else:
            self.emit("Ldar", t_obj)
            self.emit("StrLen")
        self.emit("StrSubstring", t_obj, t_start)
        self.free(t_start)
        self.free(t_obj)


def compile_program(ast: AstNode) -> BytecodeProgram:
    """Compile every function declaration of a parsed program."""
    funcs = list(functions(ast).values())
    signatures = {fn.value: (i, len(param_names(fn))) for i, fn in enumerate(funcs)}
    out = [_FunctionCompiler(fn, i, signatures).compile() for i, fn in enumerate(funcs)]
    program = BytecodeProgram(out, tuple(ast.value or ()))
    for fn in out:
        verify(fn, program)
    return program


def compile(ast: AstNode) -> list[BytecodeFunction]:
    return compile_program(ast).functions


def verify(fn: BytecodeFunction, program: BytecodeProgram | None = None) -> None:
    """Check the structural invariants of ``fn``; raise VerifyError on the first violation."""
    n = len(fn.code)
    if n == 0:
        raise VerifyError(0, "empty function")
    if fn.frame_size < fn.param_count:
        raise VerifyError(0, "frame smaller than parameter count")
    for pc, bc in enumerate(fn.code):
        kinds = OPERANDS.get(bc.op)
        if kinds is None:
            raise VerifyError(pc, f"unknown op {bc.op}")
        if len(bc.operands) != len(kinds):
            raise VerifyError(pc, f"{bc.op} takes {len(kinds)} operands, got {len(bc.operands)}")
        for kind, val in zip(kinds, bc.operands):
            if kind == "r" and not 0 <= val < fn.frame_size:
                raise VerifyError(pc, f"register r{val} outside frame of size {fn.frame_size}")
            if kind == "c" and not 0 <= val < len(fn.constants):
                raise VerifyError(pc, f"constant #{val} outside pool")
            if kind == "j" and not 0 <= val < n:
                raise VerifyError(pc, f"jump target {val} outside code")
            if kind == "i" and val < 0:
                raise VerifyError(pc, "negative operand")
        if bc.op == "LdaParam" and bc.operands[0] >= fn.param_count:
            raise VerifyError(pc, f"parameter {bc.operands[0]} out of range")
        if bc.op == "CallFunc":
            f, first, argc = bc.operands
            if argc and first + argc > fn.frame_size:
                raise VerifyError(pc, "call arguments outside frame")
            if program is not None:
                if f >= len(program.functions):
                    raise VerifyError(pc, f"unknown function {f}")
                if program.functions[f].param_count != argc:
                    raise VerifyError(pc, "call arity mismatch")
        if bc.op not in TERMINATORS and pc + 1 >= n:
            raise VerifyError(pc, "control falls off the end of the function")
    for pc in list(fn.statement_map) + list(fn.catch_spans):
        if not 0 <= pc < n:
            raise VerifyError(pc, "statement map entry outside code")


# text form

def _fmt_const(value) -> str:
    if value is None:
        return "null"
    if value is True or value is False:
        return "bool " + ("1" if value else "0")
    if isinstance(value, int):
        return f"int {value}"
    return "str " + (quote_from_bytes(value, safe="") or '""')


def _parse_const(text: str):
    if text == "null":
        return None
    kind, _, payload = text.partition(" ")
    if kind == "bool":
        return payload == "1"
    if kind == "int":
        return int(payload)
    if kind == "str":
        return b"" if payload == '""' else unquote_to_bytes(payload)
    raise ValueError(f"bad constant {text!r}")


def _fmt_span(span) -> str:
    return f"{span[0]}:{span[1]}+{span[2]}"


def _parse_span(text: str) -> tuple[int, int, int]:
    m = re.fullmatch(r"(\d+):(\d+)\+(\d+)", text)
    if not m:
        raise ValueError(f"bad span {text!r}")
    return tuple(int(g) for g in m.groups())


def disassemble(fn: BytecodeFunction, header: bool = True) -> str:
    lines = []
    if header:
        lines += [f".function {fn.name}", f".index {fn.index}", " ".join([".params", str(fn.param_count), *fn.param_names]),
                  f".frame {fn.frame_size}"]
        lines += [f".const {i} {_fmt_const(c)}" for i, c in enumerate(fn.constants)]
        lines += [f".catch {pc} {_fmt_span(s)}" for pc, s in sorted(fn.catch_spans.items())]
    for pc, bc in enumerate(fn.code):
        parts = [bc.op]
        for kind, val in zip(OPERANDS[bc.op], bc.operands):
            if kind == "r":
                parts.append(f"r{val}")
            elif kind == "c":
                parts.append(f"#{val}({_fmt_const(fn.constants[val]).split(' ')[-1]})")
            else:
                parts.append(str(val))
        line = f"{pc}: {' '.join(parts)}"
        if pc in fn.statement_map:
            line += f"  ; {_fmt_span(fn.statement_map[pc])}"
        lines.append(line)
    return "\n".join(lines)


def assemble(text: str) -> BytecodeFunction:
    """Inverse of :func:`disassemble` (with header)."""
    fn = BytecodeFunction("", 0, 0)
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("."):
            key, _, rest = line[1:].partition(" ")
            if key == "function":
                fn.name = rest
            elif key == "index":
                fn.index = int(rest)
            elif key == "params":
                count, *names = rest.split()
                fn.param_count = int(count)
                fn.param_names = names
            elif key == "frame":
                fn.frame_size = int(rest)
            elif key == "const":
                idx, _, payload = rest.partition(" ")
                assert int(idx) == len(fn.constants)
                fn.constants.append(_parse_const(payload))
            elif key == "catch":
                pc, _, span = rest.partition(" ")
                fn.catch_spans[int(pc)] = _parse_span(span)
            else:
                raise ValueError(f"unknown directive {key!r}")
            continue
        body, _, comment = line.partition(";")
        idx, _, instr = body.partition(":")
        parts = instr.split()
        op, args = parts[0], parts[1:]
        operands = []
        for arg in args:
            if arg.startswith("r"):
                operands.append(int(arg[1:]))
            elif arg.startswith("#"):
                operands.append(int(arg[1:].split("(")[0]))
            else:
                operands.append(int(arg))
        if int(idx) != len(fn.code):
            raise ValueError(f"out of order bytecode index {idx}")
        fn.code.append(Bytecode(op, tuple(operands)))
        if comment.strip():
            fn.statement_map[int(idx)] = _parse_span(comment.strip())
    return fn
