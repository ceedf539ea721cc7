import pytest

from sparktrace.frontend import (
    ParseError, SourceProgram, infer_param_types, list_exports, parse, pretty_print, tokenize,
)


def test_minimal_function_shape():
    ast = parse("function f(s){return s.length;}")
    assert ast.kind == "Program"
    (fn,) = ast.children
    assert fn.kind == "FunctionDecl" and fn.value == "f"
    param, body = fn.children
    assert param.kind == "Param" and param.value == "s"
    (ret,) = body.children
    assert ret.kind == "Return"
    (call,) = ret.children
    assert call.kind == "MethodCall" and call.value == "length"
    assert call.children[0].kind == "Identifier" and call.children[0].value == "s"


def test_empty_program():
    ast = parse("")
    assert ast.kind == "Program" and ast.children == []


def test_malformed_input_reports_line():
    with pytest.raises(ParseError) as info:
        parse("function f({")
    assert info.value.line == 1


def test_parse_error_line_is_accurate_on_later_lines():
    with pytest.raises(ParseError) as info:
        parse("function f(s) {\n  return s.length;\n  var = 3;\n}")
    assert info.value.line == 3


def test_exports_direct_member_use():
    ast = parse("export function f(s){return s.charAt(0);}")
    assert list_exports(ast) == [("f", 1, ["String"])]


def test_no_exports():
    assert list_exports(parse("function f(s){return s.charAt(0);}")) == []


def test_concat_marks_both_params_string():
    ast = parse("export function g(a,b){return a.concat(b);}")
    assert list_exports(ast) == [("g", 2, ["String", "String"])]


def test_unused_param_is_unknown():
    types = infer_param_types(parse("function h(a, n){return a.length + n;}"))
    assert types["h"] == ["String", "Unknown"]


def test_source_program_exports(tmp_path):
    path = tmp_path / "lib.ms"
    path.write_text("export function a(s){return s;}\nfunction b(){return 1;}\n")
    assert SourceProgram.from_file(path).exports == ["a"]


def test_string_escapes_are_bytes():
    toks = tokenize(r'"a\n\"b"')
    assert toks[0].value == b'a\n"b'


@pytest.mark.parametrize("src", [
    "export function f(s, t) { if (s == t) { return 1; } else if (s.length > 2) { return -2; } return 0; }",
    "function g(x) { var i = 0; while (i < 3 && !(x == null)) { i = i + 1; } return i; }",
    "function h(s) { try { throw \"e\"; } catch (err) { return err; } }",
    "function k(s) { for (var i = 0; i < s.length; i = i + 1) { s = s.substring(1); } return s[0]; }",
])
def test_pretty_print_round_trips_structure(src):
    ast = parse(src)
    again = parse(pretty_print(ast))
    assert again.structure() == ast.structure()
