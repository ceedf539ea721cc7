"""Sixteen small programs, one per instruction combination, for replay checks.

Each entry runs through trace, extraction, lifting and IR evaluation with the
inputs it was traced on; the lifted module must reproduce the concrete
outcome with every path assertion true.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class MatrixCase:
    name: str
    source: str
    function: str
    args: tuple
    symbolic: tuple[int, ...] = (0,)


_CASES = [
    ("arith", """
export function f(s, n) {
  var a = s.length + n;
  var b = a * 3 - n;
  return b / 2;
}""", (b"abcd", 5)),
    ("mod_neg", """
export function f(s, n) {
  var m = (s.length * 7) % 5;
  return -m + -n;
}""", (b"abc", 4)),
    ("compare_chain", """
export function f(s) {
  var n = s.length;
  return n < 5 == (n <= 4) == !(n > 4 == n >= 5);
}""", (b"ab",)),
    ("boolean", """
export function f(s) {
  return s.length > 1 && s.charAt(0) == "a" || !(s.length != 3);
}""", (b"ab",)),
    ("if", """
export function f(s) {
  var r = 0;
  if (s.length > 2) {
    r = 1;
  }
  return r;
}""", (b"abc",)),
    ("if_else", """
export function f(s) {
  if (s == "ok") {
    return "yes";
  } else {
    return "no";
  }
}""", (b"ok",)),
    ("nested_if", """
export function f(s) {
  if (s.length > 0) {
    if (s.charAt(0) == "x") {
      return 2;
    } else if (s.charAt(0) == "y") {
      return 3;
    }
    return 1;
  }
  return 0;
}""", (b"yz",)),
    ("while", """
export function f(s) {
  var i = 0;
  var n = 0;
  while (i < s.length) {
    if (s.charAt(i) == "a") {
      n = n + 1;
    }
    i = i + 1;
  }
  return n;
}""", (b"abca",)),
    ("for", """
export function f(s) {
  var h = 7;
  for (var i = 0; i < s.length; i = i + 1) {
    h = h * 31 + s.charCodeAt(i);
  }
  return h;
}""", (b"key",)),
    ("nested_loop", """
export function f(s) {
  var pairs = 0;
  for (var i = 0; i < s.length; i = i + 1) {
    for (var j = i + 1; j < s.length; j = j + 1) {
      if (s.charAt(i) == s.charAt(j)) {
        pairs = pairs + 1;
      }
    }
  }
  return pairs;
}""", (b"abab",)),
    ("loop_exit_flag", """
export function f(s) {
  var i = 0;
  var done = false;
  while (!done && i < s.length) {
    if (s.charAt(i) == ",") {
      done = true;
    } else {
      i = i + 1;
    }
  }
  return i;
}""", (b"ab,cd",)),
    ("length", """
export function f(s) {
  if (s.length == 0) {
    throw "empty";
  }
  return s.length;
}""", (b"abc",)),
    ("char_access", """
export function f(s) {
  var c = s.charCodeAt(1);
  if (c >= 97 && c <= 122) {
    return s.charAt(1);
  }
  return "?";
}""", (b"xq1",)),
    ("index_of", """
export function f(s, t) {
  var at = s.indexOf(t);
  if (at < 0) {
    return -1;
  }
  return at * 10;
}""", (b"abcab", b"ca"), (0, 1)),
    ("substring", """
export function f(s) {
  var head = s.substring(0, 2);
  var tail = s.substring(2);
  if (head == tail) {
    return "twin";
  }
  return tail;
}""", (b"abcd",)),
    ("concat", """
export function f(s, t) {
  var joined = s.concat("-").concat(t);
  try {
    if (joined.length > 5) {
      throw "long";
    }
  } catch (e) {
    return e;
  }
  return joined + "!";
}""", (b"ab", b"cde"), (0, 1)),
]

MATRIX: list[MatrixCase] = [
    MatrixCase(name, source.strip() + "\n", "f", args, *rest)
    for name, source, args, *rest in _CASES
]
