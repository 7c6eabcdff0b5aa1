"""Dynamic value domain shared by the DSL interpreter, tree automata, and verifier.

Values form a small tagged union: booleans, 64-bit signed integers, single
Unicode characters, strings, byte sequences, integer arrays, character arrays,
and an absorbing error value carrying a diagnostic label.  Every value is
immutable and hashable, equality is structural, and a canonical total order
exists across all values for deterministic tie-breaking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

# Tag names in canonical order.  The order is used only for deterministic
# iteration and tie-breaking, never for semantics.
_TAGS = ("Bool", "Int", "Char", "Str", "Bytes", "IntArray", "CharArray", "Err")
_TAG_RANK = {tag: i for i, tag in enumerate(_TAGS)}

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1


@dataclass(frozen=True, slots=True)
class Value:
    """One tagged runtime value.  Construct via the v* helpers below."""

    tag: str
    data: object

    def sort_key(self) -> tuple:
        return (_TAG_RANK[self.tag], self.data)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"{self.tag}({self.data!r})"


def vbool(b: bool) -> Value:
    return _TRUE if b else _FALSE


def vint(n: int) -> Value:
    """A 64-bit integer, or Err("overflow") if out of range."""
    if not (INT_MIN <= n <= INT_MAX):
        return verr("overflow")
    return Value("Int", n)


def vchar(c: str) -> Value:
    if len(c) != 1:
        raise ValueError(f"Char requires a single character, got {c!r}")
    return Value("Char", c)


def vstr(s: str) -> Value:
    return Value("Str", s)


def vbytes(b: bytes) -> Value:
    return Value("Bytes", bytes(b))


def vint_array(xs) -> Value:
    xs = tuple(int(x) for x in xs)
    if any(not (INT_MIN <= x <= INT_MAX) for x in xs):
        return verr("overflow")
    return Value("IntArray", xs)


def vchar_array(cs) -> Value:
    cs = tuple(cs)
    if any(len(c) != 1 for c in cs):
        raise ValueError("CharArray elements must be single characters")
    return Value("CharArray", cs)


def verr(label: str) -> Value:
    return Value("Err", label)


_TRUE = Value("Bool", True)
_FALSE = Value("Bool", False)


def is_err(v: Value) -> bool:
    return v.tag == "Err"


def value_equals(a: Value, b: Value) -> bool:
    """Structural equality.  Total: cross-tag comparisons are simply False.

    Err values compare equal exactly when their labels match.
    """
    return a == b


def compare_values(a: Value, b: Value) -> int:
    """Canonical total order: tag rank first, then payload within the tag.

    Returns -1, 0, or 1.  Used for deterministic iteration only.
    """
    ka, kb = a.sort_key(), b.sort_key()
    if ka < kb:
        return -1
    if ka > kb:
        return 1
    return 0


def builtin_sgn(v: Value) -> Value:
    """Sign of an integer: Int(-1) / Int(0) / Int(1).  Err passes through."""
    if is_err(v):
        return v
    if v.tag != "Int":
        return verr("type")
    n = v.data
    return vint((n > 0) - (n < 0))


def builtin_neg(v: Value) -> Value:
    """Integer negation, used to desugar unary minus in formulas."""
    if is_err(v):
        return v
    if v.tag != "Int":
        return verr("type")
    return vint(-v.data)


@dataclass(frozen=True)
class InterpretedFn:
    """A fixed function with known semantics usable inside specifications.

    Unlike synthesis targets, an interpreted function's meaning is supplied up
    front; ``apply`` must be deterministic and total on Value tuples.
    """

    name: str
    arity: int
    apply: Callable[..., Value]


SGN = InterpretedFn("sgn", 1, builtin_sgn)
NEG = InterpretedFn("neg", 1, builtin_neg)

#: Interpreted functions available to every specification.
DEFAULT_INTERPRETED: dict[str, InterpretedFn] = {f.name: f for f in (SGN, NEG)}


def _escape_str(s: str) -> str:
    out = []
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch.isprintable():
            out.append(ch)
        else:
            out.append(f"\\u{ord(ch):04X}")
    return "".join(out)


def render_literal(v: Value) -> str:
    """Render a value in the literal syntax accepted by the spec-file parser."""
    if v.tag == "Bool":
        return "true" if v.data else "false"
    if v.tag == "Int":
        return str(v.data)
    if v.tag == "Char":
        c = v.data
        if c == "'":
            return "'\\''"
        if c == "\\":
            return "'\\\\'"
        return f"'{c}'" if c.isprintable() else f"'\\u{ord(c):04X}'"
    if v.tag == "Str":
        return f'"{_escape_str(v.data)}"'
    if v.tag == "Bytes":
        return "[" + ",".join(f"0x{b:02X}" for b in v.data) + "]"
    if v.tag == "IntArray":
        return "[" + ",".join(str(x) for x in v.data) + "]"
    if v.tag == "CharArray":
        return "[" + ",".join(render_literal(vchar(c)) for c in v.data) + "]"
    return f"Err({v.data})"
