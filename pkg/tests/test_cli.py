import json

import pytest

from sparktrace import __version__
from sparktrace.cli import main, parse_arg
from sparktrace.harness import CORPUS_DIR

EMPTY_CHECK = "export function f(s){if(s.length==0){return 0;} return 1;}\n"


@pytest.fixture
def lib(tmp_path):
    path = tmp_path / "lib.ms"
    path.write_text(EMPTY_CHECK + "export function k(){return 1;}\n")
    return path


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    assert "TRACE v1" in out and "MODULE v1" in out and __version__ in out


def test_unknown_function_lists_exports(lib, capsys):
    assert main(["trace", str(lib), "nope", "--args", "a"]) == 2
    err = capsys.readouterr().err
    assert "f" in err and "k" in err


def test_trace_writes_raw_and_extracted(lib, tmp_path):
    out = tmp_path / "t.trace"
    assert main(["trace", str(lib), "f", "--args", "a", "--sym", "0", "-o", str(out)]) == 0
    text = out.read_text()
    assert any(line.startswith("sym 0 ") for line in text.splitlines())
    raw = out.with_suffix(".raw.trace").read_text()
    assert "Verification" in raw and "Verification" not in text


def test_two_bytecode_function_has_two_groups(lib, tmp_path):
    out = tmp_path / "k.trace"
    assert main(["trace", str(lib), "k", "-o", str(out)]) == 0
    pcs = {line.split()[2] for line in out.read_text().splitlines() if line.split()[0].isdigit()}
    assert len(pcs) == 2


def test_lift_and_replay(lib, tmp_path, capsys):
    trace = tmp_path / "t.trace"
    main(["trace", str(lib), "f", "--args", "a", "--sym", "0", "-o", str(trace)])
    assert main(["lift", str(trace)]) == 0
    module = trace.with_suffix(".sir")
    assert module.read_text().startswith("MODULE v1")
    same = tmp_path / "same.tc.json"
    same.write_text(json.dumps({"id": 0, "function": "f",
                                "args": [{"type": "string", "value": "a"}]}))
    capsys.readouterr()
    assert main(["replay", str(module), str(same)]) == 0
    assert "all assertions hold" in capsys.readouterr().out
    other = tmp_path / "other.tc.json"
    other.write_text(json.dumps({"id": 1, "function": "f",
                                 "args": [{"type": "string", "value": ""}]}))
    assert main(["replay", str(module), str(other)]) == 1
    assert "first failed assertion: 0" in capsys.readouterr().out


def test_lifting_raw_trace_names_verification_op(lib, tmp_path, capsys):
    trace = tmp_path / "t.trace"
    main(["trace", str(lib), "f", "--args", "a", "-o", str(trace)])
    assert main(["lift", str(trace.with_suffix(".raw.trace"))]) == 3
    assert "VerifyFrameSize" in capsys.readouterr().err


def test_gen_branch_free(tmp_path):
    path = tmp_path / "free.ms"
    path.write_text("export function g(s){return s.length;}\n")
    out = tmp_path / "out"
    assert main(["gen", str(path), "g", "--out", str(out), "--deterministic"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["iterations"] == 1 and report["testCases"] == 1
    assert len(list((out / "cases").glob("*.tc.json"))) == 1


def test_gen_artifacts_replay(lib, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["gen", str(lib), "f", "--out", str(out), "--keep-artifacts",
                 "--deterministic"]) == 0
    cases = sorted((out / "cases").glob("*.tc.json"))
    assert len(cases) == 2
    for tc in cases:
        stem = tc.name.split(".")[0]
        assert main(["replay", str(out / "artifacts" / f"{stem}.sir"), str(tc)]) == 0


def test_gen_artifacts_match_standalone_stages(lib, tmp_path):
    out = tmp_path / "out"
    main(["gen", str(lib), "f", "--out", str(out), "--keep-artifacts", "--deterministic"])
    data = json.loads((out / "cases" / "1.tc.json").read_text())
    value = data["args"][0]["value"]
    trace = tmp_path / "x.trace"
    main(["trace", str(lib), "f", "--args", value, "--sym", "0", "-o", str(trace)])
    main(["lift", str(trace)])
    assert trace.read_text() == (out / "artifacts" / "1.trace").read_text()
    assert trace.with_suffix(".sir").read_text() == (out / "artifacts" / "1.sir").read_text()


def test_fail_on_findings(tmp_path):
    path = tmp_path / "bug.ms"
    path.write_text('export function f(s){if(s.length==0){throw "e";} return 0;}\n')
    args = ["gen", str(path), "f", "--out", str(tmp_path / "o"), "--deterministic"]
    assert main(args) == 0
    assert main(args + ["--fail-on-findings"]) == 1


def test_campaign_determinism_and_figures(tmp_path):
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["campaign", str(CORPUS_DIR), "--library", "trim-mini", "--library",
                     "validator-mini", "--out", str(out), "--deterministic",
                     "--rng-seed", "5"]) == 0
        runs.append(out)
    for f in ("report.json", "summary.json", "coverage.csv"):
        assert (runs[0] / f).read_bytes() == (runs[1] / f).read_bytes()
    assert (runs[0] / "coverage_sorted.png").stat().st_size > 0
    (runs[0] / "coverage_hist.png").unlink()
    assert main(["report", str(runs[0])]) == 0
    assert (runs[0] / "coverage_hist.png").exists()


def test_usage_errors(tmp_path, lib):
    assert main(["campaign", str(tmp_path)]) == 2
    assert main(["report", str(tmp_path)]) == 2
    assert main(["trace", str(lib), "f", "--args", "a", "b"]) == 2


def test_parse_arg():
    assert parse_arg("a%20b", "String") == b"a b"
    assert parse_arg("12", "String") == b"12"
    assert parse_arg("12", "Unknown") == 12
    assert parse_arg("null", "Unknown") is None
