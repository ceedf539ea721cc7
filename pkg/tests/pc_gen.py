"""Random path conditions over small string inputs, for the solver oracle."""

from __future__ import annotations

import random

from sparktrace import symbolic as S
from sparktrace.concolic import PathCondition, PathEntry


def random_int_expr(rng: random.Random, depth: int, syms: int, alphabet: bytes):
    if depth <= 0 or rng.random() < 0.35:
        pick = rng.random()
        if pick < 0.45:
            return S.byte(rng.randrange(syms), rng.randint(0, 2))
        if pick < 0.7:
            return S.length(rng.randrange(syms))
        return S.const(rng.choice([0, 1, 2, 3, *alphabet]))
    op = rng.choice(["add", "sub", "add", "sub", "mul"])
    return S.mk(op, random_int_expr(rng, depth - 1, syms, alphabet),
                random_int_expr(rng, depth - 1, syms, alphabet))


def random_bool_expr(rng: random.Random, depth: int, syms: int, alphabet: bytes):
    r = rng.random()
    if depth <= 0 or r < 0.5:
        return S.mk(rng.choice(["eq", "lt", "le"]),
                    random_int_expr(rng, depth - 1, syms, alphabet),
                    random_int_expr(rng, depth - 1, syms, alphabet))
    if r < 0.6:
        return S.not_(random_bool_expr(rng, depth - 1, syms, alphabet))
    return S.mk(rng.choice(["and", "or"]), random_bool_expr(rng, depth - 1, syms, alphabet),
                random_bool_expr(rng, depth - 1, syms, alphabet))


def random_path_condition(rng: random.Random, syms: int, alphabet: bytes,
                          max_entries: int = 4) -> PathCondition:
    entries = []
    for pc in range(rng.randint(1, max_entries)):
        expr = random_bool_expr(rng, 2, syms, alphabet)
        observed = rng.random() < 0.5
        entries.append(PathEntry(expr, observed, observed, pc, pc + 1))
    return PathCondition(entries)


def model_key(model: dict) -> tuple:
    return tuple(sorted(model.items()))
