"""A direct AST-walking evaluator, used as an oracle for the compiled tiers.

It shares only the value primitives with the package; control flow,
scoping, short-circuiting and exception propagation are re-derived here.
"""

from __future__ import annotations

from sparktrace import values as V
from sparktrace.frontend import functions, param_names


class _Return(Exception):
    def __init__(self, value):
        self.value = value


class _Throw(Exception):
    def __init__(self, value):
        self.value = value


class StepLimit(Exception):
    pass


class AstEvaluator:
    def __init__(self, ast, max_depth: int = 200, max_steps: int = 200_000):
        self.fns = functions(ast)
        self.max_depth = max_depth
        self.max_steps = max_steps
        self.steps = 0
        self.depth = 0
        self.handled: list[str] = []

    def run(self, name: str, args: list):
        """Return (kind, value, message) like the interpreter outcome."""
        try:
            return "Returned", self.call(name, list(args)), None
        except _Throw as t:
            return "UnhandledException", t.value, V.message_of(t.value)

    def call(self, name, args):
        if self.depth >= self.max_depth:
            raise _Throw(b"RangeError: Maximum call stack size exceeded")
        fn = self.fns[name]
        scope = {p: None for p in _declared(fn)}
        scope.update(zip(param_names(fn), args))
        self.depth += 1
        try:
            self.stmt(fn.children[-1], scope)
        except _Return as r:
            return r.value
        finally:
            self.depth -= 1
        return None

    def tick(self):
        self.steps += 1
        if self.steps > self.max_steps:
            raise StepLimit()

    def stmt(self, node, env):
        self.tick()
        k = node.kind
        if k == "Block":
            for c in node.children:
                self.stmt(c, env)
        elif k == "VarDecl":
            env[node.value] = self.expr(node.children[0], env) if node.children else None
        elif k == "ExprStmt":
            self.expr(node.children[0], env)
        elif k == "Return":
            raise _Return(self.expr(node.children[0], env) if node.children else None)
        elif k == "Throw":
            raise _Throw(self.expr(node.children[0], env))
        elif k == "If":
            if V.truthy(self.expr(node.children[0], env)):
                self.stmt(node.children[1], env)
            elif len(node.children) == 3:
                self.stmt(node.children[2], env)
        elif k == "While":
            while V.truthy(self.expr(node.children[0], env)):
                self.stmt(node.children[1], env)
        elif k == "For":
            init, test, update, body = node.children
            if init.kind != "Block":
                self.stmt(init, env)
            while V.truthy(self.expr(test, env)):
                self.stmt(body, env)
                if update.kind != "Block":
                    self.stmt(update, env)
        elif k == "TryCatch":
            try:
                self.stmt(node.children[0], env)
            except _Throw as t:
                self.handled.append(V.message_of(t.value))
                env[node.value] = t.value
                self.stmt(node.children[1], env)
        else:
            raise AssertionError(k)

    def expr(self, node, env):
        self.tick()
        k = node.kind
        try:
            if k == "Literal":
                return node.value
            if k == "Identifier":
                return env[node.value]
            if k == "Assign":
                env[node.value] = v = self.expr(node.children[0], env)
                return v
            if k == "UnaryOp":
                v = self.expr(node.children[0], env)
                return V.negate(v) if node.value == "-" else not V.truthy(v)
            if k == "BinaryOp":
                return self.binop(node, env)
            if k == "Call":
                args = [self.expr(a, env) for a in node.children]
                return self.call(node.value, args)
            if k == "Index":
                s = self.expr(node.children[0], env)
                i = self.expr(node.children[1], env)
                return V.char_at(V.require_string(s, "charAt"), V.require_int_arg(i, "charAt"))
            if k == "MethodCall":
                return self.method(node, env)
        except V.ScriptError as e:
            raise _Throw(e.value) from None
        raise AssertionError(k)

    def binop(self, node, env):
        op = node.value
        left, right = node.children
        if op in ("&&", "||"):
            a = self.expr(left, env)
            if V.truthy(a) == (op == "||"):
                return a
            return self.expr(right, env)
        a = self.expr(left, env)
        b = self.expr(right, env)
        if op == "!=":
            return not V.strict_equal(a, b)
        if op == ">":
            return V.binary("TestLess", b, a)
        if op == ">=":
            return V.binary("TestLessEq", b, a)
        name = {"+": "Add", "-": "Sub", "*": "Mul", "/": "Div", "%": "Mod",
                "==": "TestEqual", "<": "TestLess", "<=": "TestLessEq"}[op]
        return V.binary(name, a, b)

    def method(self, node, env):
        m = node.value
        obj = self.expr(node.children[0], env)
        args = [self.expr(a, env) for a in node.children[1:]]
        if m == "substring" and len(args) == 1:
            V.require_string(obj, "length")  # the implicit end reads obj.length first
        s = V.require_string(obj, m)
        if m == "length":
            return len(s)
        if m == "charAt":
            return V.char_at(s, V.require_int_arg(args[0], m))
        if m == "charCodeAt":
            return V.char_code_at(s, V.require_int_arg(args[0], m))
        if m == "indexOf":
            return V.index_of(s, V.require_str_arg(args[0], m))
        if m == "concat":
            return V.concat(s, V.require_str_arg(args[0], m))
        if m == "substring":
            a = V.require_int_arg(args[0], m)
            b = V.require_int_arg(args[1], m) if len(args) == 2 else len(s)
            lo, hi = V.substring_bounds(len(s), a, b)
            return s[lo:hi]
        raise AssertionError(m)


def _declared(fn):
    return [n.value for n in fn.children[-1].walk() if n.kind in ("VarDecl", "TryCatch")]
