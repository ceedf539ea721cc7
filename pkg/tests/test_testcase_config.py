import json
from collections import Counter

import pytest

from sparktrace.config import Config, ConfigError, load_config_file, parse_alphabet, resolve
from sparktrace.testcase import TestCase, dump_testcase, load_testcase, random_seeds


def test_testcase_json_round_trip():
    tc = TestCase(4, (b"a b%", None, 3, True, b""), (0, 4), ("NegatedBranch", 1, 2), 2, "f")
    again = load_testcase(dump_testcase(tc))
    assert again == tc


def test_testcase_json_layout():
    data = json.loads(dump_testcase(TestCase(0, (b"x y",), (0,), function="f")))
    assert data["args"] == [{"type": "string", "value": "x%20y"}]
    assert data["provenance"] == {"kind": "RandomSeed"}


def test_bindings_follow_symbolic_order():
    tc = TestCase(0, (b"a", None, b"c"), (2, 0))
    assert tc.bindings == {0: b"c", 1: b"a"}


def test_random_seeds_are_reproducible():
    a = random_seeds(["String", "Unknown"], 5, 42, b"abc", 8)
    assert a == random_seeds(["String", "Unknown"], 5, 42, b"abc", 8)
    assert all(tc.args[1] is None for tc in a)


def test_zero_max_length_gives_empty_string():
    (tc,) = random_seeds(["String"], 1, 0, b"abc", 0)
    assert tc.args == (b"",)


def test_seed_length_distribution():
    seeds = random_seeds(["String"], 10_000, 9, b"ab", 8)
    counts = Counter(len(tc.args[0]) for tc in seeds)
    for n in range(9):
        assert abs(counts[n] / 10_000 - 1 / 9) <= 0.02


def test_config_validation():
    with pytest.raises(ConfigError):
        Config(alphabet=b"")
    with pytest.raises(ConfigError):
        Config(max_iterations=0)


def test_alphabet_forms():
    assert parse_alphabet("a-d") == b"abcd"
    assert parse_alphabet("printable")[0] == 32
    assert parse_alphabet("ba%2E") == b".ab"


def test_precedence_defaults_file_flags(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("# pinned\nmax_iterations = 7\nrng-seed = 3\nalphabet = a-c\n")
    assert load_config_file(path)["max_iterations"] == 7
    config = resolve(path, rng_seed=9)
    assert (config.max_iterations, config.rng_seed, config.alphabet) == (7, 9, b"abc")
    assert config.max_solve_len == Config().max_solve_len


def test_bad_config_key(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("colour = blue\n")
    with pytest.raises(ConfigError):
        load_config_file(path)
