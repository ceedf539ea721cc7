"""End-to-end acceptance checks; each records one pass/fail line."""

import os
import random
import time

import pytest

from sparktrace import symbolic as S
from sparktrace.concolic import negate_and_solve
from sparktrace.config import Config
from sparktrace.harness import (
    CORPUS_DIR, load_corpus, load_manifest, oracle_coverage, run_campaign, run_library,
)
from sparktrace.interpreter import interpret
from sparktrace.lifter import build_entry, eval_ir, lift, original_bindings
from sparktrace.matrix import MATRIX
from sparktrace.testcase import STRING
from sparktrace.tracer import (
    VERIFICATION, baseline_trace, dispatch_sites, extract_function_instr,
)

from conftest import compile_src, random_args, record_criterion
from pc_gen import model_key, random_path_condition

JOBS = max(2, min(8, os.cpu_count() or 2))
CAMPAIGN_CONFIG = Config(deterministic=True, rng_seed=0)


@pytest.fixture(scope="module")
def campaign():
    start = time.perf_counter()
    result = run_campaign(CORPUS_DIR, CAMPAIGN_CONFIG, jobs=JOBS)
    return result, time.perf_counter() - start


def test_mirroring_and_extraction_counting(corpus_functions):
    rng = random.Random(2024)
    start = time.perf_counter()
    mismatches = runs = bad_counts = 0
    for lib, name, types in corpus_functions:
        fn = lib.program[name]
        for _ in range(100):
            args = random_args(types, rng)
            sym = {i for i, t in enumerate(types) if t == STRING}
            trace = baseline_trace(fn, list(args), sym, lib.program)
            ref = interpret(fn, list(args), lib.program)
            runs += 1
            same = (dispatch_sites(trace) == [(fi, pc) for fi, pc, _ in ref.dispatch_log]
                    and (trace.outcome.kind, trace.outcome.value, trace.outcome.message,
                         trace.outcome.handled) == (ref.kind, ref.value, ref.message, ref.handled))
            mismatches += not same
            extracted = extract_function_instr(trace)
            verification = sum(op.tag == VERIFICATION for op in trace.ops)
            if (len(extracted.ops) + verification != len(trace.ops)
                    or any(op.tag == VERIFICATION for op in extracted.ops)):
                bad_counts += 1
    elapsed = time.perf_counter() - start
    ok1 = mismatches == 0 and elapsed < 30
    record_criterion(1, ok1, f"{runs} runs, {mismatches} mismatches, {elapsed:.1f}s (< 30s)")
    ok2 = bad_counts == 0
    record_criterion(2, ok2, f"{runs} traces, {bad_counts} counting violations")
    assert ok1 and ok2


def test_construct_matrix_replays():
    start = time.perf_counter()
    failed = []
    for case in MATRIX:
        prog = compile_src(case.source)
        raw = baseline_trace(prog[case.function], list(case.args), set(case.symbolic), prog)
        module = build_entry(lift(extract_function_instr(raw)))
        result = eval_ir(module, original_bindings(module, raw))
        if ((result.kind, result.value) != (raw.outcome.kind, raw.outcome.value)
                or not all(result.assertion_results)):
            failed.append(case.name)
    elapsed = time.perf_counter() - start
    ok = len(MATRIX) == 16 and not failed and elapsed < 10
    record_criterion(3, ok, f"{len(MATRIX) - len(failed)}/{len(MATRIX)} constructs replay, "
                            f"{elapsed:.2f}s (< 10s)")
    assert ok, failed


def test_solver_matches_brute_force():
    rng = random.Random(77)
    start = time.perf_counter()
    wrong = sat = 0
    for i in range(1000):
        # two symbols use a two-letter alphabet to keep brute force small
        syms, alphabet = (1, b"abcd") if i % 3 else (2, b"ab")
        pc = random_path_condition(rng, syms, alphabet)
        k = rng.randrange(len(pc))
        solver = S.BoundedSolver(alphabet, 3)
        answer = negate_and_solve(pc, k, set(range(syms)), solver)
        entry = pc[k]
        target = pc.constraints(k) + [S.not_(entry.expr) if entry.observed else entry.expr]
        models = {model_key(m) for m in S.brute_force_models(target, set(range(syms)),
                                                             alphabet, 3)}
        if isinstance(answer, dict):
            sat += 1
            wrong += model_key(answer) not in models
        else:
            wrong += not (isinstance(answer, S.Unsat) and not models)
    elapsed = time.perf_counter() - start
    ok = wrong == 0 and elapsed < 60
    record_criterion(4, ok, f"1000 path conditions ({sat} sat), {wrong} disagreements, "
                            f"{elapsed:.1f}s (< 60s)")
    assert ok


def test_bug_libraries_expose_all_six_shapes():
    bugs = {e["name"]: e["bug"] for e in load_manifest() if e.get("bug")}
    config = Config(deterministic=True, max_iterations=50)
    start = time.perf_counter()
    result = run_campaign(CORPUS_DIR, config, names=set(bugs), jobs=JOBS)
    elapsed = time.perf_counter() - start
    found = []
    for lib in result.libraries:
        bug = bugs[lib.library]
        if any(f.function == bug["function"] and bug["message"] in f.message
               and f.kind == bug["kind"] for fr in lib.functions for f in fr.findings):
            found.append(bug["shape"])
    iterations_ok = all(fr.iterations <= 50 for fr in result.functions)
    ok = len(found) == 6 == len(bugs) and iterations_ok and elapsed < 120
    record_criterion(5, ok, f"{len(found)}/6 bug shapes found ({', '.join(sorted(found))}), "
                            f"{elapsed:.1f}s (< 120s)")
    assert ok


def test_coverage_threshold_and_oracle_gap(campaign):
    result, campaign_s = campaign
    start = time.perf_counter()
    libs = {lib.name: lib for lib in load_corpus()}
    ours = {r.library: r.coverage.percent for r in result.libraries}
    oracle = {name: oracle_coverage(lib, b"abcd", 3) for name, lib in libs.items()}
    elapsed = campaign_s + time.perf_counter() - start
    low = sorted(name for name, pct in ours.items() if pct < 75)
    mean_ours = sum(ours.values()) / len(ours)
    mean_oracle = sum(oracle.values()) / len(oracle)
    gap = abs(mean_ours - mean_oracle)
    ok = not low and len(ours) == len(libs) and gap <= 10 and elapsed < 300
    record_criterion(6, ok, f"min {min(ours.values()):.1f}% over {len(ours)} libraries, "
                            f"mean {mean_ours:.2f}% vs oracle {mean_oracle:.2f}% "
                            f"(gap {gap:.2f}pp), {elapsed:.1f}s (< 300s)")
    assert ok, low


def test_single_symbolic_arg_drops_coverage():
    (lib,) = load_corpus(names={"validator-mini"})
    assert lib.string_functions() == [("isVAT", [STRING, STRING])]
    both = run_library(lib, Config(deterministic=True)).functions[0].coverage.percent
    one = run_library(lib, Config(deterministic=True, symbolize_all_strings=False)
                      ).functions[0].coverage.percent
    ok = one < both
    record_criterion(7, ok, f"isVAT coverage {both:.1f}% with both args symbolic, "
                            f"{one:.1f}% with one")
    assert ok


def test_mean_iteration_time(campaign):
    result, _ = campaign
    times = [t for fr in result.functions for t in fr.iteration_ms]
    mean = sum(times) / len(times)
    worst = max(result.functions, key=lambda fr: sum(fr.iteration_ms) / len(fr.iteration_ms))
    worst_mean = sum(worst.iteration_ms) / len(worst.iteration_ms)
    ok = mean < 1000
    record_criterion(8, ok, f"mean {mean:.1f} ms over {len(times)} iterations "
                            f"(slowest function {worst.function} at {worst_mean:.1f} ms)")
    assert ok


def test_campaign_reports_are_byte_identical(campaign, tmp_path):
    first, _ = campaign
    second = run_campaign(CORPUS_DIR, CAMPAIGN_CONFIG, jobs=JOBS)
    a = first.write(tmp_path / "a", figures=False)
    b = second.write(tmp_path / "b", figures=False)
    same = all(x.read_bytes() == y.read_bytes() for x, y in zip(a, b))
    ok = same and len(a) == len(b) == 3
    record_criterion(9, ok, f"{len(a)} report files compared, "
                            f"{'identical' if same else 'different'}")
    assert ok
