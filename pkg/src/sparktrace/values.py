"""Runtime values and the built-in operations shared by both execution tiers.

Values are plain Python objects: ``int`` (64-bit two's complement),
``bytes`` (immutable 8-bit strings), ``bool`` and ``None`` for null.
"""

from __future__ import annotations

from urllib.parse import quote_from_bytes, unquote_to_bytes

MAX_STRING_LEN = 4096
_MOD = 1 << 64
_HALF = 1 << 63

TAG_INT, TAG_STR, TAG_BOOL, TAG_NULL = 0, 1, 2, 3
TAG_NAMES = ("Int", "Str", "Bool", "Null")


class ScriptError(Exception):
    """A MiniScript-level exception; ``value`` is the thrown value."""

    def __init__(self, value):
        super().__init__(value)
        self.value = value


def tag_of(v) -> int:
    if v is None:
        return TAG_NULL
    t = type(v)
    if t is bool:
        return TAG_BOOL
    if t is int:
        return TAG_INT
    return TAG_STR


def type_name(v) -> str:
    return TAG_NAMES[tag_of(v)]


def wrap64(x: int) -> int:
    return ((x + _HALF) % _MOD) - _HALF


def truthy(v) -> bool:
    if v is None:
        return False
    if type(v) is bool:
        return v
    if type(v) is int:
        return v != 0
    return len(v) > 0


def strict_equal(a, b) -> bool:
    return tag_of(a) == tag_of(b) and a == b


def message_of(v) -> str:
    """Render a thrown value as an exception message."""
    if isinstance(v, (bytes, bytearray)):
        return bytes(v).decode("latin-1")
    if v is None:
        return "null"
    if type(v) is bool:
        return "true" if v else "false"
    return str(v)


def type_error(text: str) -> ScriptError:
    return ScriptError(("TypeError: " + text).encode())


def range_error(text: str) -> ScriptError:
    return ScriptError(("RangeError: " + text).encode())


def _require_ints(op, a, b):
    if tag_of(a) != TAG_INT or tag_of(b) != TAG_INT:
        raise type_error(f"unsupported operand types for {op}: {type_name(a)} and {type_name(b)}")


def div_trunc(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


def binary(op: str, a, b):
    """Evaluate ``a <op> b`` (``a`` is the register operand, ``b`` the accumulator)."""
    if op == "Add":
        if tag_of(a) == TAG_STR and tag_of(b) == TAG_STR:
            return concat(a, b)
        _require_ints("+", a, b)
        return wrap64(a + b)
    if op == "Sub":
        _require_ints("-", a, b)
        return wrap64(a - b)
    if op == "Mul":
        _require_ints("*", a, b)
        return wrap64(a * b)
    if op in ("Div", "Mod"):
        _require_ints("/" if op == "Div" else "%", a, b)
        if b == 0:
            raise range_error("Division by zero")
        q = div_trunc(a, b)
        return wrap64(q) if op == "Div" else wrap64(a - b * q)
    if op == "TestEqual":
        return strict_equal(a, b)
    if op in ("TestLess", "TestLessEq"):
        _require_ints("<" if op == "TestLess" else "<=", a, b)
        return a < b if op == "TestLess" else a <= b
    raise ValueError(op)


def negate(v):
    if tag_of(v) != TAG_INT:
        raise type_error(f"bad operand type for unary -: {type_name(v)}")
    return wrap64(-v)


def require_string(v, member: str) -> bytes:
    if tag_of(v) == TAG_STR:
        return v
    if v is None:
        raise type_error(f"Cannot read properties of null (reading '{member}')")
    raise type_error(f"{type_name(v)}.{member} is not a function")


def require_int_arg(v, member: str) -> int:
    if tag_of(v) != TAG_INT:
        raise type_error(f"{member} expects an Int argument, got {type_name(v)}")
    return v


def require_str_arg(v, member: str) -> bytes:
    if tag_of(v) != TAG_STR:
        raise type_error(f"{member} expects a Str argument, got {type_name(v)}")
    return v


def char_at(s: bytes, i: int) -> bytes:
    return s[i:i + 1] if 0 <= i < len(s) else b""


def char_code_at(s: bytes, i: int) -> int:
    # -1 stands in for NaN: there are no floats
    return s[i] if 0 <= i < len(s) else -1


def index_of(s: bytes, t: bytes) -> int:
    return s.find(t)


def substring_bounds(n: int, a: int, b: int) -> tuple[int, int]:
    a = min(max(a, 0), n)
    b = min(max(b, 0), n)
    return (a, b) if a <= b else (b, a)


def concat(a: bytes, b: bytes) -> bytes:
    if len(a) + len(b) > MAX_STRING_LEN:
        raise range_error("Invalid string length")
    return a + b


# text encodings shared by the file formats

def encode_value(v) -> tuple[str, str]:
    tag = tag_of(v)
    if tag == TAG_INT:
        return "Int", str(v)
    if tag == TAG_BOOL:
        return "Bool", "1" if v else "0"
    if tag == TAG_NULL:
        return "Null", "-"
    return "Str", quote_from_bytes(v, safe="") or "%"


def decode_value(type_: str, text: str):
    if type_ == "Int":
        return int(text)
    if type_ == "Bool":
        return text == "1"
    if type_ == "Null":
        return None
    if type_ == "Str":
        return b"" if text == "%" else unquote_to_bytes(text)
    raise ValueError(f"unknown value type {type_!r}")


def pct(data: bytes) -> str:
    return quote_from_bytes(data, safe="")


def pct_field(data: bytes) -> str:
    """Percent-encode for a whitespace-separated field where ``-`` means absent
    and ``%`` means empty."""
    text = pct(data)
    if text == "-":
        return "%2D"
    return text or "%"


def unpct(text: str) -> bytes:
    return unquote_to_bytes(text)
