"""Symbolic expressions over string inputs and a bounded constraint solver.

Expressions are interned tuples. Leaves are ``("c", value)``,
``("byte", sym, offset)`` and ``("len", sym)``; interior nodes are
``(op, *children)``. Every structure exists once, so nodes hash and
compare by identity; without that, hashing a shared DAG walks it as a tree.
Constructors fold constants so a condition that does not depend on any
input collapses to a ``("c", bool)`` leaf.

A model maps a symbol id to a byte string; the length of the string is the
value of ``len`` and bytes past the end read as 0.
"""

from __future__ import annotations

import bisect
import itertools
from dataclasses import dataclass

from . import values as V

PRINTABLE = bytes(range(32, 127))


class Node(tuple):
    """An interned expression node; build with :func:`node`."""

    __slots__ = ()
    __hash__ = object.__hash__

    def __eq__(self, other):
        return self is other

    def __ne__(self, other):
        return self is not other

    def __reduce__(self):
        return (node, tuple(self))

    def __repr__(self):
        return render(self)


_TABLE: dict = {}
_TABLE_LIMIT = 2_000_000


def node(*parts) -> Node:
    key = parts if parts[0] != "c" else ("c", type(parts[1]), parts[1])
    found = _TABLE.get(key)
    if found is None:
        if len(_TABLE) > _TABLE_LIMIT:
            _TABLE.clear()  # only sharing is lost; meaning is unchanged
        found = _TABLE[key] = tuple.__new__(Node, parts)
    return found


TRUE = node("c", True)
FALSE = node("c", False)
ZERO = node("c", 0)

BINARY = {"add", "sub", "mul", "div", "mod", "eq", "lt", "le", "and", "or"}


def const(v) -> Node:
    return node("c", v)


def byte(sym: int, offset: int) -> Node:
    return node("byte", sym, offset)


def length(sym: int) -> Node:
    return node("len", sym)


def is_const(e) -> bool:
    return e[0] == "c"


def _arith(op: str, a: int, b: int) -> int:
    if op == "add":
        return V.wrap64(a + b)
    if op == "sub":
        return V.wrap64(a - b)
    if op == "mul":
        return V.wrap64(a * b)
    if b == 0:
        return 0
    q = V.div_trunc(a, b)
    return V.wrap64(q) if op == "div" else V.wrap64(a - b * q)


def apply(op: str, *args):
    """Evaluate ``op`` on concrete operands."""
    if op in ("add", "sub", "mul", "div", "mod"):
        return _arith(op, args[0], args[1])
    if op == "eq":
        return args[0] == args[1]
    if op == "lt":
        return args[0] < args[1]
    if op == "le":
        return args[0] <= args[1]
    if op == "not":
        return not args[0]
    if op == "and":
        return bool(args[0] and args[1])
    if op == "or":
        return bool(args[0] or args[1])
    if op == "ite":
        return args[1] if args[0] else args[2]
    raise ValueError(op)


def mk(op: str, *args) -> tuple:
    """Build a node, folding constants and trivial boolean identities."""
    if all(a[0] == "c" for a in args):
        return node("c", apply(op, *(a[1] for a in args)))
    if op == "not":
        a = args[0]
        return a[1] if a[0] == "not" else node("not", a)
    if op in ("and", "or"):
        a, b = args
        unit = op == "and"
        for x, y in ((a, b), (b, a)):
            if x[0] == "c":
                return y if bool(x[1]) == unit else node("c", not unit)
        if a == b:
            return a
    if op == "ite":
        c, a, b = args
        if c[0] == "c":
            return a if c[1] else b
        if a == b:
            return a
        # boolean selects become plain connectives
        if a[0] == "c" and type(a[1]) is bool:
            return mk("or", c, b) if a[1] else mk("and", mk("not", c), b)
        if b[0] == "c" and type(b[1]) is bool:
            return mk("and", c, a) if not b[1] else mk("or", mk("not", c), a)
    if op in ("add", "sub"):
        a, b = args
        if b is ZERO:
            return a
        if op == "add" and a is ZERO:
            return b
    if op in ("eq", "lt", "le"):
        a, b = args
        if op != "lt" and a == b:
            return TRUE
        # compare against a select of constants branch by branch
        if a[0] == "ite" and b[0] == "c" and _const_leaves(a):
            return mk("ite", a[1], mk(op, a[2], b), mk(op, a[3], b))
        if b[0] == "ite" and a[0] == "c" and _const_leaves(b):
            return mk("ite", b[1], mk(op, a, b[2]), mk(op, a, b[3]))
    return node(op, *args)


def _const_leaves(e) -> bool:
    """True for a select tree whose values are all constants."""
    while e[0] == "ite":
        if e[2][0] != "c" and not (e[2][0] == "ite" and _const_leaves(e[2])):
            return False
        e = e[3]
    return e[0] == "c"


def conjuncts(e) -> list:
    """Split ``e`` into a list of facts whose conjunction is ``e``."""
    out = []
    stack = [e]
    while stack:
        node = stack.pop()
        if node[0] == "and":
            stack.extend(node[1:])
        elif node[0] == "not" and node[1][0] == "or":
            stack.extend(mk("not", x) for x in node[1][1:])
        elif node != TRUE:
            out.append(node)
    return out


def disjuncts(e) -> list:
    """Split ``e`` into alternatives whose disjunction is ``e``."""
    out = []
    stack = [e]
    while stack:
        node = stack.pop()
        if node[0] == "or":
            stack.extend(reversed(node[1:]))
        elif node[0] == "not" and node[1][0] == "and":
            stack.extend(reversed([mk("not", x) for x in node[1][1:]]))
        else:
            out.append(node)
    return out


def not_(e):
    return mk("not", e)


def evaluate(e, model: dict[int, bytes], memo: dict | None = None):
    """Concrete value of ``e`` under ``model``."""
    if memo is None:
        memo = {}
    stack = [e]
    while stack:
        node = stack[-1]
        if node in memo:
            stack.pop()
            continue
        tag = node[0]
        if tag == "c":
            memo[node] = node[1]
        elif tag == "byte":
            data = model[node[1]]
            memo[node] = data[node[2]] if node[2] < len(data) else 0
        elif tag == "len":
            memo[node] = len(model[node[1]])
        else:
            pending = [c for c in node[1:] if c not in memo]
            if pending:
                stack.extend(pending)
                continue
            memo[node] = apply(tag, *(memo[c] for c in node[1:]))
        stack.pop()
    return memo[e]


def substitute(e, env: dict, memo: dict):
    """Replace leaves found in ``env`` by constants and refold."""
    stack = [(e, False)]
    while stack:
        node, ready = stack.pop()
        if node in memo:
            continue
        tag = node[0]
        if tag == "c":
            memo[node] = node
        elif tag in ("byte", "len"):
            memo[node] = const(env[node]) if node in env else node
        elif ready:
            memo[node] = mk(tag, *(memo[c] for c in node[1:]))
        else:
            stack.append((node, True))
            stack.extend((c, False) for c in node[1:] if c not in memo)
    return memo[e]


def leaves(e, acc: set | None = None) -> set:
    """All ``byte``/``len`` leaves of ``e``."""
    if acc is None:
        acc = set()
    seen = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        if node[0] in ("byte", "len"):
            acc.add(node)
        elif node[0] != "c":
            stack.extend(node[1:])
    return acc


def symbols_of(exprs) -> set[int]:
    out = set()
    for e in exprs:
        for leaf in leaves(e):
            out.add(leaf[1])
    return out


def render(e) -> str:
    tag = e[0]
    if tag == "c":
        v = e[1]
        return ("true" if v else "false") if isinstance(v, bool) else str(v)
    if tag == "byte":
        return f"s{e[1]}[{e[2]}]"
    if tag == "len":
        return f"len(s{e[1]})"
    return f"{tag}(" + ", ".join(render(c) for c in e[1:]) + ")"


# solving

_PY = {
    "add": "_w({0} + {1})", "sub": "_w({0} - {1})", "mul": "_w({0} * {1})",
    "div": "_ar('div', {0}, {1})", "mod": "_ar('mod', {0}, {1})",
    "eq": "({0} == {1})", "lt": "({0} < {1})", "le": "({0} <= {1})",
    "not": "(not {0})", "and": "({0} and {1})", "or": "({0} or {1})",
    "ite": "({1} if {0} else {2})",
}
_COMPILED: dict = {}
MAX_SPLITS = 4


def compile_expr(e):
    """Turn ``e`` into a Python function of a leaf-to-value mapping."""
    fn = _COMPILED.get(e)
    if fn is not None:
        return fn
    index: dict = {}
    order = []
    stack = [(e, False)]
    while stack:
        node, ready = stack.pop()
        if node in index:
            continue
        if ready or node[0] in ("c", "byte", "len"):
            index[node] = len(order)
            order.append(node)
            continue
        stack.append((node, True))
        stack.extend((c, False) for c in node[1:] if c not in index)
    lines = []
    keys = {}
    for i, node in enumerate(order):
        tag = node[0]
        if tag == "c":
            rhs = repr(node[1])
        elif tag in ("byte", "len"):
            keys[f"k{i}"] = node
            rhs = f"env[k{i}]"
        else:
            rhs = _PY[tag].format(*(f"t{index[c]}" for c in node[1:]))
        lines.append(f"    t{i} = {rhs}")
    src = "def f(env):\n" + "\n".join(lines) + f"\n    return t{len(order) - 1}\n"
    scope = {"_w": V.wrap64, "_ar": _arith, **keys}
    exec(compile(src, "<constraint>", "exec"), scope)
    fn = scope["f"]
    if len(_COMPILED) > 50_000:
        _COMPILED.clear()
    _COMPILED[e] = fn
    return fn


@dataclass(frozen=True)
class Sat:
    model: dict[int, bytes]


@dataclass(frozen=True)
class Unsat:
    pass


@dataclass(frozen=True)
class Unknown:
    reason: str = "budget exhausted"


class _Budget(Exception):
    pass


class BoundedSolver:
    """Solve conjunctions of boolean expressions over bounded strings.

    Lengths are enumerated from ``0..max_len`` (closest to the hint first);
    with lengths fixed, the byte constraints form a finite CSP solved by
    domain filtering and backtracking with forward checking over
    ``alphabet``. ``Unsat`` means no model exists within those bounds.
    """

    def __init__(self, alphabet: bytes = PRINTABLE, max_len: int = 8, budget: int = 1_000_000):
        if not alphabet:
            raise ValueError("alphabet must be nonempty")
        self.alphabet = bytes(sorted(set(alphabet)))
        self.max_len = max_len
        self.budget = budget
        self.work = 0

    def tick(self, n: int = 1):
        self.work += n
        if self.work > self.budget:
            raise _Budget()

    def solve(self, constraints, symbols=(), hint: dict[int, bytes] | None = None):
        """Return ``Sat(model)``, ``Unsat()`` or ``Unknown()``."""
        self.work = 0
        try:
            for model in self._models(list(constraints), symbols, hint or {}, all_models=False):
                return Sat(model)
        except _Budget:
            return Unknown()
        return Unsat()

    def enumerate_models(self, constraints, symbols=()) -> list[dict[int, bytes]]:
        """Every model within bounds (byte values range over the alphabet)."""
        self.work = 0
        saved, self.budget = self.budget, float("inf")
        try:
            return list(self._models(list(constraints), symbols, {}, all_models=True))
        finally:
            self.budget = saved

    def _length_candidates(self, syms, hint):
        base = [min(len(hint.get(s, b"")), self.max_len) for s in syms]
        combos = itertools.product(range(self.max_len + 1), repeat=len(syms))
        return sorted(combos, key=lambda c: (sum(abs(a - b) for a, b in zip(c, base)), c))

    def _models(self, constraints, symbols, hint, all_models):
        facts = []
        for c in constraints:
            facts.extend(conjuncts(c))
        facts = list(dict.fromkeys(facts))
        if any(c[0] == "c" and not c[1] for c in facts):
            return
        syms = sorted(set(symbols) | symbols_of(facts))
        byte_leaves = [leaf for leaf in set().union(set(), *(leaves(c) for c in facts))
                       if leaf[0] == "byte"]
        for lengths in self._length_candidates(syms, hint):
            self.tick()
            lens = dict(zip(syms, lengths))
            env = {length(s): n for s, n in lens.items()}
            for leaf in byte_leaves:
                if leaf[2] >= lens[leaf[1]]:
                    env[leaf] = 0  # bytes beyond a string's end read as 0
            memo: dict = {}
            reduced = []
            dead = False
            for c in facts:
                r = substitute(c, env, memo)
                if r[0] == "c":
                    if not r[1]:
                        dead = True
                        break
                    continue
                reduced.extend(conjuncts(r))
            self.tick(len(memo) // 64)
            if dead or any(r[0] == "c" and not r[1] for r in reduced):
                continue
            prefer = {byte(s, k): h[k] for s, h in hint.items() if s in lens
                      for k in range(min(len(h), lens[s])) if h[k] in self.alphabet}
            every = [byte(s, k) for s in syms for k in range(lens[s])] if all_models else None
            seen = set()
            for assignment in self._split(reduced, every, prefer, 0):
                if all_models:
                    key = tuple(sorted(assignment.items()))
                    if key in seen:
                        continue
                    seen.add(key)
                out = {}
                for s in syms:
                    h = hint.get(s, b"")
                    chars = []
                    for k in range(lens[s]):
                        key = byte(s, k)
                        if key in assignment:
                            chars.append(assignment[key])
                        elif k < len(h) and h[k] in self.alphabet:
                            chars.append(h[k])
                        else:
                            chars.append(self.alphabet[0])
                    out[s] = bytes(chars)
                yield out
                if not all_models:
                    return

    def _split(self, facts, every, prefer, depth):
        """Case-split disjunctions of conjunctions, then search bytes."""
        present = set(facts)
        if any(f[0] == "not" and f[1] in present for f in facts):
            return
        if depth < MAX_SPLITS:
            for i, f in enumerate(facts):
                options = disjuncts(f)
                if len(options) > 1 and any(len(conjuncts(d)) > 1 for d in options):
                    rest = facts[:i] + facts[i + 1:]
                    for d in options:
                        self.tick()
                        yield from self._split(rest + conjuncts(d), every, prefer, depth + 1)
                    return
        if any(f[0] == "c" and not f[1] for f in facts):
            return
        checks = [(compile_expr(f), leaves(f)) for f in dict.fromkeys(facts)]
        variables = every if every is not None else sorted(
            set().union(set(), *(free for _, free in checks)))
        cuts = None if every is not None else byte_cuts(facts)
        yield from self._search(checks, variables, {}, prefer, cuts)

    def _search(self, checks, variables, env, prefer=None, cuts=None):
        """Backtracking with forward checking and smallest-domain-first ordering."""
        # constraints already decided by the lengths alone
        pending = []
        for fn, free in checks:
            if free:
                pending.append((fn, free))
            else:
                self.tick()
                if not fn(env):
                    return
        prefer = prefer or {}
        domains = {}
        for v in variables:
            domain = list(self.alphabet)
            if cuts is not None:
                domain = _representatives(domain, cuts, prefer.get(v))
            if v in prefer and prefer[v] in domain:
                # the parent's byte first: most models only change a few bytes
                domain.remove(prefer[v])
                domain.insert(0, prefer[v])
            domains[v] = domain
        watch: dict = {v: [] for v in variables}
        for i, (_, free) in enumerate(pending):
            for v in free:
                watch[v].append(i)
        unassigned = [len(free) for _, free in pending]
        for i, (fn, free) in enumerate(pending):
            if len(free) == 1:
                (v,) = free
                domains[v] = self._filter(fn, v, domains[v], env)
                if not domains[v]:
                    return
        assigned: dict = {}

        def backtrack():
            if len(assigned) == len(variables):
                yield dict(assigned)
                return
            v = min((u for u in variables if u not in assigned),
                    key=lambda u: (len(domains[u]), -len(watch[u])))
            for x in list(domains[v]):
                self.tick()
                assigned[v] = env[v] = x
                saved = {}
                ok = True
                for i in watch[v]:
                    unassigned[i] -= 1
                for i in watch[v]:
                    fn, free = pending[i]
                    left = unassigned[i]
                    if left == 0:
                        self.tick()
                        if not fn(env):
                            ok = False
                            break
                    elif left == 1:
                        (u,) = [w for w in free if w not in assigned]
                        if u not in saved:
                            saved[u] = domains[u]
                        domains[u] = self._filter(fn, u, domains[u], env)
                        if not domains[u]:
                            ok = False
                            break
                if ok:
                    yield from backtrack()
                for i in watch[v]:
                    unassigned[i] += 1
                domains.update(saved)
                del assigned[v]
                del env[v]

        yield from backtrack()

    def _filter(self, fn, v, domain, env):
        self.tick(len(domain))
        out = []
        for x in domain:
            env[v] = x
            if fn(env):
                out.append(x)
        del env[v]
        return out


def byte_cuts(facts) -> list[int] | None:
    """Boundaries splitting byte values into classes no fact can tell apart.

    Only valid when every byte leaf is compared directly against a constant;
    otherwise ``None``.
    """
    cuts = set()
    seen = set()
    stack = list(facts)
    while stack:
        e = stack.pop()
        if id(e) in seen or e[0] in ("c", "len"):
            continue
        seen.add(id(e))
        if e[0] == "byte":
            return None  # reached outside a constant comparison
        if e[0] in ("eq", "lt", "le"):
            a, b = e[1], e[2]
            for x, y in ((a, b), (b, a)):
                if x[0] == "byte" and y[0] == "c":
                    cuts.update((y[1], y[1] + 1))
                    break
            else:
                stack.extend((a, b))
            continue
        stack.extend(e[1:] if e[0] != "byte" else ())
    return sorted(cuts)


def _representatives(domain: list[int], cuts: list[int], preferred=None) -> list[int]:
    """One value per class of ``domain``; ``preferred`` stands for its class."""
    reps: dict[int, int] = {}
    for x in domain:
        reps.setdefault(bisect.bisect_right(cuts, x), x)
    if preferred is not None:
        reps[bisect.bisect_right(cuts, preferred)] = preferred
    return sorted(reps.values())


def brute_force_models(constraints, symbols, alphabet: bytes, max_len: int):
    """All models by exhaustive enumeration: the oracle for the solver."""
    alphabet = bytes(sorted(set(alphabet)))
    strings = [bytes(t) for n in range(max_len + 1) for t in itertools.product(alphabet, repeat=n)]
    syms = sorted(set(symbols) | symbols_of(constraints))
    out = []
    for combo in itertools.product(strings, repeat=len(syms)):
        model = dict(zip(syms, combo))
        memo: dict = {}
        if all(evaluate(c, model, memo) for c in constraints):
            out.append(model)
    return out


def holds(constraints, model) -> bool:
    memo: dict = {}
    return all(evaluate(c, model, memo) for c in constraints)
