"""MiniScript lexer, parser and pretty-printer.

MiniScript is the small dynamically typed JS subset the pipeline runs:
function declarations (optionally ``export``-ed), ``var``, ``if/else``,
``while``, ``for``, ``return``, ``throw``, ``try/catch``, integer, boolean,
string and ``null`` literals, the usual arithmetic/comparison/logical
operators and a handful of String members.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Iterator

KEYWORDS = {
    "function", "export", "var", "if", "else", "while", "for", "return",
    "throw", "try", "catch", "true", "false", "null",
}

# member name -> (number of call arguments, argument positions that are strings)
STRING_MEMBERS: dict[str, tuple[int, tuple[int, ...]]] = {
    "length": (-1, ()),
    "charAt": (1, ()),
    "charCodeAt": (1, ()),
    "indexOf": (1, (0,)),
    "substring": (2, ()),
    "concat": (1, (0,)),
}

STATEMENT_KINDS = {
    "If", "While", "For", "Return", "Throw", "TryCatch", "ExprStmt", "VarDecl",
}


class ParseError(Exception):
    def __init__(self, line: int, column: int, message: str):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column
        self.message = message


@dataclass(frozen=True)
class SourceProgram:
    path: str
    text: str

    @classmethod
    def from_file(cls, path) -> "SourceProgram":
        with open(path, "rb") as fh:
            raw = fh.read()
        return cls(str(path), raw.decode("utf-8"))

    @property
    def exports(self) -> list[str]:
        return list(parse(self).value)


@dataclass(eq=False)
class AstNode:
    kind: str
    children: list["AstNode"] = field(default_factory=list)
    span: tuple[int, int, int] = (1, 1, 0)
    value: Any = None
    offset: int = 0

    def structure(self) -> tuple:
        """Span-free nested tuple used for structural equality."""
        return (self.kind, self.value, tuple(c.structure() for c in self.children))

    def walk(self) -> Iterator["AstNode"]:
        yield self
        for child in self.children:
            yield from child.walk()

    def __repr__(self) -> str:
        inner = ", ".join(repr(c) for c in self.children)
        label = self.kind if self.value is None else f"{self.kind}:{self.value!r}"
        return f"{label}[{inner}]" if self.children else label


@dataclass(frozen=True)
class Token:
    kind: str  # ident, kw, int, str, op, eof
    text: str
    value: Any
    line: int
    column: int
    offset: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<str>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
  | (?P<op>==|!=|<=|>=|&&|\|\||[-+*/%<>!=(){}\[\];,.])
    """,
    re.VERBOSE | re.DOTALL,
)

_ESCAPES = {"n": b"\n", "t": b"\t", "r": b"\r", "0": b"\0", "\\": b"\\", '"': b'"', "'": b"'"}


def _unescape(body: str, line: int, column: int) -> bytes:
    out = bytearray()
    i = 0
    while i < len(body):
        ch = body[i]
        if ch != "\\":
            out += ch.encode("utf-8")
            i += 1
            continue
        nxt = body[i + 1]
        if nxt == "x":
            digits = body[i + 2:i + 4]
            if not re.fullmatch(r"[0-9A-Fa-f]{2}", digits):
                raise ParseError(line, column, "bad \\x escape")
            out.append(int(digits, 16))
            i += 4
        elif nxt in _ESCAPES:
            out += _ESCAPES[nxt]
            i += 2
        else:
            raise ParseError(line, column, f"unknown escape \\{nxt}")
    return bytes(out)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        column = pos - line_start + 1
        if m is None:
            raise ParseError(line, column, f"unexpected character {text[pos]!r}")
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "int":
            tokens.append(Token("int", lexeme, int(lexeme), line, column, pos))
        elif kind == "ident":
            tokens.append(Token("kw" if lexeme in KEYWORDS else "ident", lexeme, lexeme,
                                line, column, pos))
        elif kind == "str":
            tokens.append(Token("str", lexeme, _unescape(lexeme[1:-1], line, column),
                                line, column, pos))
        elif kind == "op":
            tokens.append(Token("op", lexeme, lexeme, line, column, pos))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            line_start = pos + lexeme.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", None, line, pos - line_start + 1, pos))
    return tokens


_BINARY_LEVELS = [
    ("||",),
    ("&&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "/", "%"),
]


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("op", "kw") and t.text == text

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}")
        return self.advance()

    def expect_ident(self) -> Token:
        if self.tok.kind != "ident":
            self.fail("expected identifier")
        return self.advance()

    def fail(self, message: str):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(t.line, t.column, f"{message}, found {found}")

    def node(self, kind, start: Token, children=(), value=None) -> AstNode:
        prev = self.tokens[self.i - 1]
        end = prev.offset + len(prev.text)
        return AstNode(kind, list(children), (start.line, start.column, end - start.offset),
                       value, start.offset)

    # grammar
    def program(self) -> AstNode:
        start = self.tok
        funcs, exported = [], []
        while self.tok.kind != "eof":
            is_export = False
            if self.at("export"):
                self.advance()
                is_export = True
            fn = self.function()
            if is_export:
                exported.append(fn.value)
            funcs.append(fn)
        names = [f.value for f in funcs]
        for fn in funcs:
            if names.count(fn.value) > 1:
                raise ParseError(fn.span[0], fn.span[1], f"duplicate function {fn.value!r}")
        if not funcs:
            return AstNode("Program", [], (1, 1, len(self.text)), (), 0)
        node = self.node("Program", start, funcs, tuple(exported))
        node.span = (1, 1, len(self.text))
        node.offset = 0
        return node

    def function(self) -> AstNode:
        start = self.expect("function")
        name = self.expect_ident().text
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                p = self.expect_ident()
                params.append(AstNode("Param", [], (p.line, p.column, len(p.text)), p.text, p.offset))
                if not self.at(","):
                    break
                self.advance()
        self.expect(")")
        body = self.block()
        return self.node("FunctionDecl", start, params + [body], name)

    def block(self) -> AstNode:
        start = self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.fail("unterminated block")
            stmts.append(self.statement())
        self.advance()
        return self.node("Block", start, stmts)

    def statement(self) -> AstNode:
        start = self.tok
        if self.at("{"):
            return self.block()
        if self.at("var"):
            return self.var_decl()
        if self.at("if"):
            self.advance()
            self.expect("(")
            cond = self.expression()
            self.expect(")")
            then = self.statement()
            children = [cond, then]
            if self.at("else"):
                self.advance()
                children.append(self.statement())
            return self.node("If", start, children)
        if self.at("while"):
            self.advance()
            self.expect("(")
            cond = self.expression()
            self.expect(")")
            return self.node("While", start, [cond, self.statement()])
        if self.at("for"):
            return self.for_stmt()
        if self.at("return"):
            self.advance()
            children = [] if self.at(";") else [self.expression()]
            self.expect(";")
            return self.node("Return", start, children)
        if self.at("throw"):
            self.advance()
            value = self.expression()
            self.expect(";")
            return self.node("Throw", start, [value])
        if self.at("try"):
            self.advance()
            body = self.block()
            self.expect("catch")
            self.expect("(")
            name = self.expect_ident().text
            self.expect(")")
            handler = self.block()
            return self.node("TryCatch", start, [body, handler], name)
        if self.at("function"):
            self.fail("nested functions are not supported")
        expr = self.expression()
        self.expect(";")
        return self.node("ExprStmt", start, [expr])

    def var_decl(self) -> AstNode:
        start = self.expect("var")
        name = self.expect_ident().text
        children = []
        if self.at("="):
            self.advance()
            children.append(self.expression())
        self.expect(";")
        return self.node("VarDecl", start, children, name)

    def for_stmt(self) -> AstNode:
        start = self.expect("for")
        self.expect("(")
        here = self.tok
        if self.at(";"):
            self.advance()
            init = self.node("Block", here)
        elif self.at("var"):
            init = self.var_decl()
        else:
            expr = self.expression()
            self.expect(";")
            init = self.node("ExprStmt", here, [expr])
        here = self.tok
        if self.at(";"):
            test = AstNode("Literal", [], (here.line, here.column, 0), True, here.offset)
        else:
            test = self.expression()
        self.expect(";")
        here = self.tok
        if self.at(")"):
            update = AstNode("Block", [], (here.line, here.column, 0), None, here.offset)
        else:
            expr = self.expression()
            update = self.node("ExprStmt", here, [expr])
        self.expect(")")
        body = self.statement()
        return self.node("For", start, [init, test, update, body])

    def expression(self) -> AstNode:
        start = self.tok
        if self.tok.kind == "ident" and self.tokens[self.i + 1].text == "=" \
                and self.tokens[self.i + 1].kind == "op":
            name = self.advance().text
            self.advance()
            value = self.expression()
            return self.node("Assign", start, [value], name)
        return self.binary(0)

    def binary(self, level: int) -> AstNode:
        if level == len(_BINARY_LEVELS):
            return self.unary()
        start = self.tok
        left = self.binary(level + 1)
        while self.tok.kind == "op" and self.tok.text in _BINARY_LEVELS[level]:
            op = self.advance().text
            right = self.binary(level + 1)
            left = self.node("BinaryOp", start, [left, right], op)
        return left

    def unary(self) -> AstNode:
        start = self.tok
        if self.at("!") or self.at("-"):
            op = self.advance().text
            return self.node("UnaryOp", start, [self.unary()], op)
        return self.postfix()

    def postfix(self) -> AstNode:
        start = self.tok
        expr = self.primary()
        while True:
            if self.at("."):
                self.advance()
                member = self.expect_ident().text
                if member not in STRING_MEMBERS:
                    self.fail(f"unknown member {member!r}")
                argc = STRING_MEMBERS[member][0]
                if argc < 0:
                    expr = self.node("MethodCall", start, [expr], member)
                    continue
                args = self.arguments()
                if member == "substring" and len(args) not in (1, 2) or \
                        member != "substring" and len(args) != argc:
                    self.fail(f"wrong number of arguments to {member}")
                expr = self.node("MethodCall", start, [expr] + args, member)
            elif self.at("["):
                self.advance()
                idx = self.expression()
                self.expect("]")
                expr = self.node("Index", start, [expr, idx])
            else:
                return expr

    def arguments(self) -> list[AstNode]:
        self.expect("(")
        args = []
        if not self.at(")"):
            while True:
                args.append(self.expression())
                if not self.at(","):
                    break
                self.advance()
        self.expect(")")
        return args

    def primary(self) -> AstNode:
        t = self.tok
        if t.kind == "int":
            self.advance()
            return self.node("Literal", t, [], t.value)
        if t.kind == "str":
            self.advance()
            return self.node("Literal", t, [], t.value)
        if t.kind == "kw" and t.text in ("true", "false", "null"):
            self.advance()
            return self.node("Literal", t, [], {"true": True, "false": False, "null": None}[t.text])
        if t.kind == "ident":
            self.advance()
            if self.at("("):
                args = self.arguments()
                return self.node("Call", t, args, t.text)
            return self.node("Identifier", t, [], t.text)
        if self.at("("):
            self.advance()
            inner = self.expression()
            self.expect(")")
            return inner
        self.fail("expected expression")


def parse(source: SourceProgram | str) -> AstNode:
    """Parse MiniScript text into a ``Program``-rooted AST.

    Raises :class:`ParseError` with the offending line and column.
    """
    text = source.text if isinstance(source, SourceProgram) else source
    return _Parser(text).program()


def functions(ast: AstNode) -> dict[str, AstNode]:
    return {fn.value: fn for fn in ast.children}


def param_names(fn: AstNode) -> list[str]:
    return [c.value for c in fn.children if c.kind == "Param"]


def _string_uses(fn: AstNode) -> tuple[set[str], list[tuple[str, int, str]]]:
    """Names used directly as strings, plus (callee, argIndex, name) call edges."""
    direct: set[str] = set()
    edges = []

    def ident(node):
        return node.value if node.kind == "Identifier" else None

    for node in fn.walk():
        if node.kind in ("MethodCall", "Index"):
            name = ident(node.children[0])
            if name:
                direct.add(name)
            if node.kind == "MethodCall":
                for pos in STRING_MEMBERS[node.value][1]:
                    arg = ident(node.children[1 + pos])
                    if arg:
                        direct.add(arg)
        elif node.kind == "BinaryOp" and node.value in ("==", "!=", "+"):
            left, right = node.children
            for a, b in ((left, right), (right, left)):
                if b.kind == "Literal" and isinstance(b.value, bytes) and ident(a):
                    direct.add(ident(a))
        elif node.kind == "Call":
            for pos, arg in enumerate(node.children):
                if ident(arg):
                    edges.append((node.value, pos, ident(arg)))
    return direct, edges


def infer_param_types(ast: AstNode) -> dict[str, list[str]]:
    """Infer ``String``/``Unknown`` for each parameter of each function.

    A parameter is a String when it is the receiver of a String member, a
    string argument of ``indexOf``/``concat``, compared with or added to a
    string literal, or passed on to a String parameter of another function.
    """
    funcs = functions(ast)
    facts = {name: _string_uses(fn) for name, fn in funcs.items()}
    types = {name: ["Unknown"] * len(param_names(fn)) for name, fn in funcs.items()}
    changed = True
    while changed:
        changed = False
        for name, fn in funcs.items():
            direct, edges = facts[name]
            strings = set(direct)
            for callee, pos, arg in edges:
                callee_types = types.get(callee)
                if callee_types and pos < len(callee_types) and callee_types[pos] == "String":
                    strings.add(arg)
            for i, p in enumerate(param_names(fn)):
                if p in strings and types[name][i] != "String":
                    types[name][i] = "String"
                    changed = True
    return types


def list_exports(ast: AstNode) -> list[tuple[str, int, list[str]]]:
    if ast.kind != "Program":
        raise ValueError("list_exports expects a Program node")
    types = infer_param_types(ast)
    funcs = functions(ast)
    return [(name, len(param_names(funcs[name])), types[name]) for name in ast.value]


# pretty printing

_PREC = {op: level for level, ops in enumerate(_BINARY_LEVELS) for op in ops}


def _quote(data: bytes) -> str:
    out = []
    for b in data:
        ch = chr(b)
        if ch == '"' or ch == "\\":
            out.append("\\" + ch)
        elif 32 <= b < 127:
            out.append(ch)
        else:
            out.append(f"\\x{b:02x}")
    return '"' + "".join(out) + '"'


def _expr(node: AstNode, prec: int = -1) -> str:
    k = node.kind
    if k == "Literal":
        v = node.value
        if v is None:
            return "null"
        if v is True:
            return "true"
        if v is False:
            return "false"
        if isinstance(v, bytes):
            return _quote(v)
        return str(v)
    if k == "Identifier":
        return node.value
    if k == "Assign":
        text = f"{node.value} = {_expr(node.children[0])}"
        return f"({text})" if prec >= 0 else text
    if k == "BinaryOp":
        level = _PREC[node.value]
        text = f"{_expr(node.children[0], level - 1)} {node.value} {_expr(node.children[1], level)}"
        return f"({text})" if level <= prec else text
    if k == "UnaryOp":
        return f"{node.value}{_expr(node.children[0], 99)}"
    if k == "Call":
        return f"{node.value}({', '.join(_expr(a) for a in node.children)})"
    if k == "MethodCall":
        recv = _expr(node.children[0], 99)
        if node.value == "length":
            return f"{recv}.length"
        return f"{recv}.{node.value}({', '.join(_expr(a) for a in node.children[1:])})"
    if k == "Index":
        return f"{_expr(node.children[0], 99)}[{_expr(node.children[1])}]"
    raise ValueError(f"not an expression: {k}")


def _stmt(node: AstNode, depth: int) -> list[str]:
    pad = "  " * depth
    k = node.kind
    if k == "Block":
        lines = [pad + "{"]
        for s in node.children:
            lines += _stmt(s, depth + 1)
        return lines + [pad + "}"]
    if k == "VarDecl":
        init = f" = {_expr(node.children[0])}" if node.children else ""
        return [f"{pad}var {node.value}{init};"]
    if k == "ExprStmt":
        return [f"{pad}{_expr(node.children[0])};"]
    if k == "Return":
        return [f"{pad}return{' ' + _expr(node.children[0]) if node.children else ''};"]
    if k == "Throw":
        return [f"{pad}throw {_expr(node.children[0])};"]
    if k == "If":
        lines = [f"{pad}if ({_expr(node.children[0])})"] + _stmt(node.children[1], depth + 1)
        if len(node.children) == 3:
            lines += [pad + "else"] + _stmt(node.children[2], depth + 1)
        return lines
    if k == "While":
        return [f"{pad}while ({_expr(node.children[0])})"] + _stmt(node.children[1], depth + 1)
    if k == "For":
        init, test, update, body = node.children
        init_text = "" if init.kind == "Block" else _stmt(init, 0)[0].rstrip(";")
        test_text = _expr(test)
        update_text = "" if update.kind == "Block" else _expr(update.children[0])
        return [f"{pad}for ({init_text}; {test_text}; {update_text})"] + _stmt(body, depth + 1)
    if k == "TryCatch":
        return ([f"{pad}try"] + _stmt(node.children[0], depth) +
                [f"{pad}catch ({node.value})"] + _stmt(node.children[1], depth))
    raise ValueError(f"not a statement: {k}")


def pretty_print(ast: AstNode) -> str:
    lines = []
    exported = set(ast.value or ())
    for fn in ast.children:
        params = ", ".join(param_names(fn))
        prefix = "export " if fn.value in exported else ""
        lines.append(f"{prefix}function {fn.value}({params})")
        lines += _stmt(fn.children[-1], 0)
    return "\n".join(lines) + ("\n" if lines else "")
