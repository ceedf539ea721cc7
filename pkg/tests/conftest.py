from __future__ import annotations

import random

import pytest

from sparktrace.bytecode import compile_program
from sparktrace.frontend import parse
from sparktrace.harness import load_corpus
from sparktrace.testcase import STRING


def compile_src(text: str):
    return compile_program(parse(text))


def random_args(types, rng: random.Random, alphabet=b"abc.,-_ 01", max_len=8):
    """Random arguments: strings for String params, a mix for the rest."""
    args = []
    for t in types:
        if t == STRING or rng.random() < 0.5:
            n = rng.randint(0, max_len)
            args.append(bytes(rng.choice(alphabet) for _ in range(n)))
        else:
            args.append(rng.choice([None, 0, 1, -3, 7, True, False]))
    return args


@pytest.fixture(scope="session")
def corpus():
    return load_corpus()


@pytest.fixture(scope="session")
def corpus_functions(corpus):
    """(library, function name, param types) for every exported function."""
    return [(lib, name, types) for lib in corpus for name, _, types in lib.exports]


# acceptance criteria report one line each at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
