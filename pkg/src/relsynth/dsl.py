"""DSL framework: grammars with executable semantics, program ASTs, and costs.

A grammar is a set of productions over nonterminals whose right-hand sides are
either constructor applications ``S -> ctor(S1,...,Sn)`` or bare symbols
``S -> S1`` / ``S -> x`` (identity productions into another nonterminal or a
grammar parameter).  Every constructor is bound to an executable semantic
function over :mod:`relsynth.values` values, registered by (name, arity).

Programs are plain constructor trees (no identity nodes); evaluation is
bottom-up, deterministic, and total — failures travel as Err values, which
absorb through every constructor.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .values import (
    Value,
    is_err,
    render_literal,
    vbool,
    vchar,
    verr,
    vint,
    vint_array,
    vstr,
)


class DslError(Exception):
    """Base class for grammar/program loading failures."""


class DslSyntaxError(DslError):
    pass


class UnknownConstructor(DslError):
    pass


class ArityMismatch(DslError):
    pass


# ---------------------------------------------------------------------------
# Constructor semantics registry
# ---------------------------------------------------------------------------

#: (constructor name, arity) -> semantic function over Values.
REGISTRY: dict[tuple[str, int], Callable[..., Value]] = {}


def register(name: str, arity: int):
    def wrap(fn: Callable[..., Value]) -> Callable[..., Value]:
        REGISTRY[(name, arity)] = fn
        return fn

    return wrap


def apply_constructor(ctor: "Constructor", args: tuple[Value, ...]) -> Value:
    """Apply a constructor; by default any Err argument wins (absorption).

    Constructors built with ``absorbs_err=False`` see Err operands directly —
    relations over erroneous values are simply false rather than erroneous.
    """
    if ctor.absorbs_err:
        for a in args:
            if is_err(a):
                return a
    return ctor.fn(*args)


# ---------------------------------------------------------------------------
# Grammar and program ASTs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constructor:
    name: str
    arity: int
    fn: Callable[..., Value]
    absorbs_err: bool = True


@dataclass(frozen=True)
class Production:
    """``lhs -> ctor(rhs...)``, or an identity production when ctor is None.

    Identity productions have exactly one right-hand symbol — another
    nonterminal or a grammar parameter — and contribute no program node.
    """

    lhs: str
    ctor: str | None
    rhs: tuple[str, ...]


@dataclass(frozen=True)
class ProgramAst:
    """A program tree: constructor applications over parameter/constant leaves.

    ``symbol`` records the nonterminal that produced the node (for parameter
    leaves, the parameter's own name).
    """

    node: str
    children: tuple[ProgramAst, ...] = ()
    symbol: str = ""

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Ast({render_program(self)})"


def render_program(p: ProgramAst) -> str:
    """Pretty-print in the grammar-file constructor syntax (re-parseable)."""
    if not p.children:
        return p.node
    return f"{p.node}({','.join(render_program(c) for c in p.children)})"


@dataclass(frozen=True, eq=False)
class Grammar:
    name: str
    params: tuple[tuple[str, str], ...]  # (name, sort), in declaration order
    start: str
    productions: tuple[Production, ...]
    constructors: Mapping[str, Constructor]

    @property
    def param_names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.params)

    @property
    def nonterminals(self) -> frozenset[str]:
        return frozenset(p.lhs for p in self.productions)

    def productions_for(self, symbol: str) -> tuple[Production, ...]:
        return _productions_by_lhs(self).get(symbol, ())


@lru_cache(maxsize=None)
def _productions_by_lhs(g: Grammar) -> Mapping[str, tuple[Production, ...]]:
    by_lhs: dict[str, list[Production]] = {}
    for p in g.productions:
        by_lhs.setdefault(p.lhs, []).append(p)
    return {k: tuple(v) for k, v in by_lhs.items()}


# ---------------------------------------------------------------------------
# Literal constants usable as grammar terminals
# ---------------------------------------------------------------------------

_INT_RE = re.compile(r"-?\d+$")
_CHAR_RE = re.compile(r"'(\\.|[^'\\])'$")

_CHAR_ESCAPES = {"\\'": "'", "\\\\": "\\", "\\n": "\n", "\\t": "\t", "\\ ": " "}


def literal_constant(token: str) -> Value | None:
    """Interpret a grammar token as a literal constant, if it is one."""
    if _INT_RE.match(token):
        return vint(int(token))
    m = _CHAR_RE.match(token)
    if m:
        body = m.group(1)
        if body.startswith("\\"):
            if body in _CHAR_ESCAPES:
                return vchar(_CHAR_ESCAPES[body])
            if body.startswith("\\u"):
                return vchar(chr(int(body[2:], 16)))
            return None
        return vchar(body)
    if token == "true":
        return vbool(True)
    if token == "false":
        return vbool(False)
    return None


def _constant_ctor(token: str, value: Value) -> Constructor:
    return Constructor(token, 0, lambda v=value: v)


# ---------------------------------------------------------------------------
# Grammar file parsing
# ---------------------------------------------------------------------------

_PROD_RE = re.compile(r"^(\S+)\s*->\s*(.+)$")
_APP_RE = re.compile(r"^([^\s(]+)\((.*)\)$")

SORTS = ("Bool", "Int", "Char", "Str", "Bytes", "IntArray", "CharArray")


def parse_grammar(text: str, name: str = "grammar") -> Grammar:
    params: list[tuple[str, str]] = []
    start: str | None = None
    productions: list[Production] = []
    ctors: dict[str, Constructor] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("param "):
            m = re.match(r"^param\s+(\w+)\s*:\s*(\w+)$", line)
            if not m:
                raise DslSyntaxError(f"{name}:{lineno}: bad param declaration: {raw!r}")
            pname, sort = m.groups()
            if sort not in SORTS:
                raise DslSyntaxError(f"{name}:{lineno}: unknown sort {sort!r}")
            params.append((pname, sort))
            continue
        if line.startswith("start "):
            start = line.split(None, 1)[1].strip()
            continue
        m = _PROD_RE.match(line)
        if not m:
            raise DslSyntaxError(f"{name}:{lineno}: expected 'S -> rhs': {raw!r}")
        lhs, rhs = m.group(1), m.group(2).strip()
        app = _APP_RE.match(rhs)
        if app:
            ctor_name, arglist = app.group(1), app.group(2).strip()
            args = tuple(a.strip() for a in arglist.split(",")) if arglist else ()
            fn = REGISTRY.get((ctor_name, len(args)))
            if fn is None:
                if any(k[0] == ctor_name for k in REGISTRY):
                    raise ArityMismatch(
                        f"{name}:{lineno}: {ctor_name} does not take {len(args)} arguments"
                    )
                raise UnknownConstructor(f"{name}:{lineno}: {ctor_name!r} is not registered")
            ctors[ctor_name] = Constructor(ctor_name, len(args), fn)
            productions.append(Production(lhs, ctor_name, args))
        else:
            quoted = bool(_CHAR_RE.match(rhs))
            if not quoted and (" " in rhs or "," in rhs):
                raise DslSyntaxError(f"{name}:{lineno}: bad production right-hand side: {raw!r}")
            is_plain_name = bool(re.match(r"^[A-Za-z_]\w*$", rhs)) and rhs not in ("true", "false")
            lit = None if is_plain_name else literal_constant(rhs)
            fn = REGISTRY.get((rhs, 0))
            if fn is not None:
                ctors[rhs] = Constructor(rhs, 0, fn)
                productions.append(Production(lhs, rhs, ()))
            elif lit is not None:
                ctors[rhs] = _constant_ctor(rhs, lit)
                productions.append(Production(lhs, rhs, ()))
            else:
                # Identity production into a nonterminal or parameter.
                productions.append(Production(lhs, None, (rhs,)))

    if not productions:
        raise DslSyntaxError(f"{name}: no productions")
    if start is None:
        start = productions[0].lhs

    g = Grammar(name, tuple(params), start, tuple(productions), ctors)
    _validate(g)
    return g


def _validate(g: Grammar) -> None:
    nts = g.nonterminals
    param_names = set(g.param_names)
    if g.start not in nts:
        raise DslSyntaxError(f"{g.name}: start symbol {g.start!r} has no productions")
    for p in g.productions:
        for s in p.rhs:
            if s not in nts and s not in param_names:
                raise DslSyntaxError(
                    f"{g.name}: production {p.lhs} refers to undefined symbol {s!r}"
                )
    # Every nonterminal must be reachable from the start symbol.
    seen = {g.start}
    frontier = [g.start]
    while frontier:
        sym = frontier.pop()
        for p in g.productions_for(sym):
            for s in p.rhs:
                if s in nts and s not in seen:
                    seen.add(s)
                    frontier.append(s)
    unreachable = nts - seen
    if unreachable:
        raise DslSyntaxError(f"{g.name}: unreachable nonterminals {sorted(unreachable)}")


def load_grammar(path: str | Path) -> Grammar:
    path = Path(path)
    return parse_grammar(path.read_text(encoding="utf-8"), name=path.stem)


def trivial_grammar(name: str, arity: int, fn: Callable[..., Value]) -> Grammar:
    """A single-production grammar ``s0 -> name(x1,...,xn)`` for a fixed function."""
    params = tuple((f"x{i}", "Int") for i in range(1, arity + 1))
    prod = Production("s0", name, tuple(p for p, _ in params))
    ctor = Constructor(name, arity, fn)
    return Grammar(name, params, "s0", (prod,), {name: ctor})


# ---------------------------------------------------------------------------
# Evaluation, cost, conformance
# ---------------------------------------------------------------------------


def eval_program(g: Grammar, p: ProgramAst, args: Iterable[Value]) -> Value:
    """Evaluate ``p`` on positional arguments bound to the grammar parameters."""
    env = dict(zip(g.param_names, args, strict=True))

    def go(t: ProgramAst) -> Value:
        if t.node in env and not t.children:
            return env[t.node]
        ctor = g.constructors.get(t.node)
        if ctor is None or ctor.arity != len(t.children):
            return verr("unknown-constructor")
        vals = tuple(go(c) for c in t.children)
        return apply_constructor(ctor, vals)

    return go(p)


@dataclass(frozen=True, eq=False)
class CostModel:
    """Per-constructor costs; every node not listed costs ``default``."""

    costs: Mapping[str, float] = field(default_factory=dict)
    default: float = 1.0

    def node_cost(self, name: str) -> float:
        c = float(self.costs.get(name, self.default))
        if c < 0:
            raise ValueError(f"negative cost for {name!r}")
        return c

    def max_cost(self) -> float:
        return max([self.default, *self.costs.values()], default=self.default)

    def require_positive(self) -> None:
        bad = [n for n, c in self.costs.items() if c <= 0]
        if bad or self.default <= 0:
            raise ValueError(
                "cost-ordered enumeration requires strictly positive constructor "
                f"costs (offending: {bad or ['default']})"
            )


UNIT_COSTS = CostModel()


def program_cost(p: ProgramAst, m: CostModel = UNIT_COSTS) -> float:
    return m.node_cost(p.node) + sum(program_cost(c, m) for c in p.children)


def derivable_symbols(g: Grammar, p: ProgramAst) -> frozenset[str]:
    """All grammar symbols (params included) that can derive the tree ``p``."""
    param_names = set(g.param_names)

    def close_identity(syms: set[str]) -> frozenset[str]:
        changed = True
        while changed:
            changed = False
            for prod in g.productions:
                if prod.ctor is None and prod.rhs[0] in syms and prod.lhs not in syms:
                    syms.add(prod.lhs)
                    changed = True
        return frozenset(syms)

    def go(t: ProgramAst) -> frozenset[str]:
        if not t.children and t.node in param_names:
            return close_identity({t.node})
        base: set[str] = set()
        child_sets = [go(c) for c in t.children]
        for prod in g.productions:
            if prod.ctor != t.node or len(prod.rhs) != len(t.children):
                continue
            if all(s in cs for s, cs in zip(prod.rhs, child_sets)):
                base.add(prod.lhs)
        return close_identity(base)

    return go(p)


def conforms(g: Grammar, p: ProgramAst, symbol: str | None = None) -> bool:
    return (symbol or g.start) in derivable_symbols(g, p)


# ---------------------------------------------------------------------------
# Program text parsing (the pretty-printer's inverse)
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<char>'(?:\\.|[^'\\])')
      | (?P<int>-?\d+)
      | (?P<name>[A-Za-z_]\w*)
      | (?P<punct>[(),])
    )""",
    re.VERBOSE,
)


def _tokenize(text: str) -> list[str]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:].strip()
            if not rest:
                break
            raise DslSyntaxError(f"cannot tokenize program text at: {rest[:20]!r}")
        out.append(m.group().strip())
        pos = m.end()
    return out


def parse_program(g: Grammar, text: str) -> ProgramAst:
    """Parse constructor syntax like ``enc16(reshape(x,4))`` and attribute it."""
    tokens = _tokenize(text)
    pos = 0

    def peek() -> str | None:
        return tokens[pos] if pos < len(tokens) else None

    def expect(tok: str) -> None:
        nonlocal pos
        if peek() != tok:
            raise DslSyntaxError(f"expected {tok!r}, found {peek()!r}")
        pos += 1

    def parse_term() -> tuple[str, tuple, ...]:
        nonlocal pos
        head = peek()
        if head is None or head in "(),":
            raise DslSyntaxError(f"unexpected token {head!r}")
        pos += 1
        children: list = []
        if peek() == "(":
            pos += 1
            if peek() != ")":
                children.append(parse_term())
                while peek() == ",":
                    pos += 1
                    children.append(parse_term())
            expect(")")
        return (head, tuple(children))

    shape = parse_term()
    if pos != len(tokens):
        raise DslSyntaxError(f"trailing tokens: {tokens[pos:]}")
    return _attribute(g, shape)


def _attribute(g: Grammar, shape: tuple) -> ProgramAst:
    name, children = shape
    kids = tuple(_attribute(g, c) for c in children)
    if not kids and name in g.param_names:
        return ProgramAst(name, (), name)
    for prod in g.productions:
        if prod.ctor != name or len(prod.rhs) != len(kids):
            continue
        if all(s in derivable_symbols(g, k) for s, k in zip(prod.rhs, kids)):
            ast = ProgramAst(name, kids, prod.lhs)
            return ast
    if not any(p.ctor == name for p in g.productions):
        raise UnknownConstructor(f"{name!r} is not a constructor of grammar {g.name}")
    raise DslSyntaxError(f"no production of {g.name} derives {name}({len(kids)} args)")


# ---------------------------------------------------------------------------
# Builtin semantics: encoders
# ---------------------------------------------------------------------------


def _want(v: Value, tag: str) -> bool:
    return v.tag == tag


@register("codePoint", 1)
def _code_point(s: Value) -> Value:
    if not _want(s, "Str"):
        return verr("type")
    return vint_array(ord(ch) for ch in s.data)


def _encode_codepoints(cps: Value, codec: str) -> Value:
    if not _want(cps, "IntArray"):
        return verr("type")
    try:
        text = "".join(chr(c) for c in cps.data)
        raw = text.encode(codec)
    except (ValueError, OverflowError, UnicodeEncodeError):
        return verr("codepoint")
    return vint_array(raw)


@register("encUTF8", 1)
def _enc_utf8(cps: Value) -> Value:
    return _encode_codepoints(cps, "utf-8")


@register("encUTF16", 1)
def _enc_utf16(cps: Value) -> Value:
    return _encode_codepoints(cps, "utf-16-be")


@register("encUTF32", 1)
def _enc_utf32(cps: Value) -> Value:
    return _encode_codepoints(cps, "utf-32-be")


@register("reshape", 2)
def _reshape(data: Value, width: Value) -> Value:
    """Regroup a byte sequence into ``width``-bit groups, MSB first.

    The final group is zero-padded on the right: reshape([0xFF],4) = [15,15],
    reshape([0xFE],2) = [3,3,3,2].
    """
    if not (_want(data, "IntArray") and _want(width, "Int")):
        return verr("type")
    n = width.data
    if not 1 <= n <= 8:
        return verr("range")
    if any(not 0 <= b <= 0xFF for b in data.data):
        return verr("range")
    bits = "".join(f"{b:08b}" for b in data.data)
    pad = (-len(bits)) % n
    bits += "0" * pad
    return vint_array(int(bits[i : i + n], 2) for i in range(0, len(bits), n))


@register("invReshape", 2)
def _inv_reshape(groups: Value, width: Value) -> Value:
    """Concatenate ``width``-bit groups and regroup into bytes, discarding any
    incomplete trailing byte: invReshape([0x0E,0x0F],4) = [0xEF]."""
    if not (_want(groups, "IntArray") and _want(width, "Int")):
        return verr("type")
    n = width.data
    if not 1 <= n <= 8:
        return verr("range")
    if any(not 0 <= g < (1 << n) for g in groups.data):
        return verr("range")
    bits = "".join(f"{g:0{n}b}" for g in groups.data)
    usable = len(bits) - len(bits) % 8
    return vint_array(int(bits[i : i + 8], 2) for i in range(0, usable, 8))


_B16 = "0123456789ABCDEF"
_B32 = "ABCDEFGHIJKLMNOPQRSTUVWXYZ234567"
_B32HEX = "0123456789ABCDEFGHIJKLMNOPQRSTUV"
_B64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/"
_B64XML = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_"


def _mapper(alphabet: str) -> Callable[[Value], Value]:
    def enc(groups: Value) -> Value:
        if not _want(groups, "IntArray"):
            return verr("type")
        if any(not 0 <= g < len(alphabet) for g in groups.data):
            return verr("range")
        return vstr("".join(alphabet[g] for g in groups.data))

    return enc


def _unmapper(alphabet: str) -> Callable[[Value], Value]:
    table = {ch: i for i, ch in enumerate(alphabet)}

    def dec(s: Value) -> Value:
        if not _want(s, "Str"):
            return verr("type")
        try:
            return vint_array(table[ch] for ch in s.data)
        except KeyError:
            return verr("alphabet")

    return dec


for _name, _alpha in (
    ("enc16", _B16),
    ("enc32", _B32),
    ("enc32Hex", _B32HEX),
    ("enc64", _B64),
    ("enc64XML", _B64XML),
):
    REGISTRY[(_name, 1)] = _mapper(_alpha)
    REGISTRY[("dec" + _name[3:], 1)] = _unmapper(_alpha)


@register("encUU", 1)
def _enc_uu(groups: Value) -> Value:
    """uuencode body alphabet with the grave-for-zero convention."""
    if not _want(groups, "IntArray"):
        return verr("type")
    if any(not 0 <= g < 64 for g in groups.data):
        return verr("range")
    return vstr("".join("`" if g == 0 else chr(32 + g) for g in groups.data))


@register("decUU", 1)
def _dec_uu(s: Value) -> Value:
    if not _want(s, "Str"):
        return verr("type")
    out = []
    for ch in s.data:
        if ch in ("`", " "):
            out.append(0)
        elif 33 <= ord(ch) <= 95:
            out.append(ord(ch) - 32)
        else:
            return verr("alphabet")
    return vint_array(out)


@register("padToMultiple", 3)
def _pad_to_multiple(s: Value, n: Value, c: Value) -> Value:
    if not (_want(s, "Str") and _want(n, "Int") and _want(c, "Char")):
        return verr("type")
    if n.data < 1:
        return verr("range")
    text = s.data
    short = (-len(text)) % n.data
    return vstr(text + c.data * short)


@register("header", 1)
def _header(s: Value) -> Value:
    if not _want(s, "Str"):
        return verr("type")
    return vstr(f"{len(s.data)}:{s.data}")


# ---------------------------------------------------------------------------
# Builtin semantics: decoders
# ---------------------------------------------------------------------------


def _decode_bytes(data: Value, codec: str) -> Value:
    if not _want(data, "IntArray"):
        return verr("type")
    if any(not 0 <= b <= 0xFF for b in data.data):
        return verr("range")
    try:
        text = bytes(data.data).decode(codec)
    except UnicodeDecodeError:
        return verr("decode")
    return vint_array(ord(ch) for ch in text)


@register("decUTF8", 1)
def _dec_utf8(data: Value) -> Value:
    return _decode_bytes(data, "utf-8")


@register("decUTF16", 1)
def _dec_utf16(data: Value) -> Value:
    return _decode_bytes(data, "utf-16-be")


@register("decUTF32", 1)
def _dec_utf32(data: Value) -> Value:
    return _decode_bytes(data, "utf-32-be")


@register("asUnicode", 1)
def _as_unicode(cps: Value) -> Value:
    if not _want(cps, "IntArray"):
        return verr("type")
    try:
        return vstr("".join(chr(c) for c in cps.data))
    except (ValueError, OverflowError):
        return verr("codepoint")


@register("removePad", 2)
def _remove_pad(s: Value, c: Value) -> Value:
    if not (_want(s, "Str") and _want(c, "Char")):
        return verr("type")
    return vstr(s.data.rstrip(c.data))


@register("substr", 2)
def _substr_suffix(s: Value, k: Value) -> Value:
    """Decoder-domain substring: drop the first ``k`` characters."""
    if not (_want(s, "Str") and _want(k, "Int")):
        return verr("type")
    if not 0 <= k.data <= len(s.data):
        return verr("substr")
    return vstr(s.data[k.data :])


# ---------------------------------------------------------------------------
# Builtin semantics: comparators
# ---------------------------------------------------------------------------


@register("chain", 2)
def _chain(a: Value, b: Value) -> Value:
    """First comparator result that is nonzero."""
    if not (_want(a, "Int") and _want(b, "Int")):
        return verr("type")
    return a if a.data != 0 else b


@register("intCompare", 2)
def _int_compare(a: Value, b: Value) -> Value:
    if not (_want(a, "Int") and _want(b, "Int")):
        return verr("type")
    return vint((a.data > b.data) - (a.data < b.data))


@register("strCompare", 2)
def _str_compare(a: Value, b: Value) -> Value:
    if not (_want(a, "Str") and _want(b, "Str")):
        return verr("type")
    return vint((a.data > b.data) - (a.data < b.data))


@register("countChar", 2)
def _count_char(s: Value, c: Value) -> Value:
    if not (_want(s, "Str") and _want(c, "Char")):
        return verr("type")
    return vint(s.data.count(c.data))


@register("length", 1)
def _length(s: Value) -> Value:
    if not _want(s, "Str"):
        return verr("type")
    return vint(len(s.data))


_TO_INT_RE = re.compile(r"-?\d+$")


@register("toInt", 1)
def _to_int(s: Value) -> Value:
    if not _want(s, "Str"):
        return verr("type")
    if not _TO_INT_RE.match(s.data):
        return verr("toInt")
    return vint(int(s.data))


@register("substr", 3)
def _substr_range(s: Value, i: Value, j: Value) -> Value:
    """Comparator-domain substring: [start, end) character range."""
    if not (_want(s, "Str") and _want(i, "Int") and _want(j, "Int")):
        return verr("type")
    lo, hi = i.data, j.data
    if not (0 <= lo <= hi <= len(s.data)):
        return verr("substr")
    return vstr(s.data[lo:hi])


_TOKEN_PATTERNS = {
    "Number": r"\d+",
    "Alpha": "[A-Za-z]+",
    "Whitespace": r"\s+",
    "AlphaNum": "[A-Za-z0-9]+",
}


@register("pos", 4)
def _pos(s: Value, tok: Value, k: Value, d: Value) -> Value:
    """Start/end index of the k'th match of a token (negative k from the end).

    pos("12ab", Number, 1, Start) = 0 and pos("12ab", Number, 1, End) = 2.
    """
    if not (_want(s, "Str") and _want(k, "Int") and _want(d, "Str")):
        return verr("type")
    if tok.tag == "Str":
        pattern = _TOKEN_PATTERNS.get(tok.data)
        if pattern is None:
            return verr("token")
    elif tok.tag == "Char":
        pattern = re.escape(tok.data)
    else:
        return verr("type")
    matches = list(re.finditer(pattern, s.data))
    idx = k.data
    if idx == 0 or abs(idx) > len(matches):
        return verr("pos")
    m = matches[idx - 1] if idx > 0 else matches[idx]
    if d.data == "Start":
        return vint(m.start())
    if d.data == "End":
        return vint(m.end())
    return verr("direction")


@register("constPos", 1)
def _const_pos(k: Value) -> Value:
    if not _want(k, "Int"):
        return verr("type")
    return k


# Token and direction constants used by the comparator grammar.
for _tok in ("Number", "Alpha", "Whitespace", "AlphaNum", "Start", "End"):
    REGISTRY[(_tok, 0)] = (lambda t=_tok: vstr(t))
