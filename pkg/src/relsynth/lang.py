"""Relational specifications: terms, formulas, parsing, and relaxation.

A specification declares one or more target functions (each with a grammar),
ground example formulas, and universally quantified property clauses.  The
CEGIS loop instantiates properties at concrete inputs to obtain ground
counterexample formulas, and `relax` renames every occurrence of a target
function to a fresh occurrence symbol (f -> f#1, f#2, ...) so that each
symbol occurs exactly once — the shape the version-space builder consumes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

from .dsl import Grammar, ProgramAst, eval_program
from .values import (
    DEFAULT_INTERPRETED,
    InterpretedFn,
    Value,
    is_err,
    render_literal,
    value_equals,
    vbool,
    vchar,
    vint,
    vstr,
)


class SpecError(Exception):
    pass


class SpecSyntaxError(SpecError):
    pass


class UnknownSymbol(SpecError):
    pass


class ArityMismatch(SpecError):
    pass


class EmptySpec(SpecError):
    pass


# ---------------------------------------------------------------------------
# Terms and formulas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: Value


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Apply:
    fn: str
    args: tuple["Term", ...]


Term = Union[Const, Var, Apply]

REL_OPS = ("==", "!=", "<=", ">=", "<", ">")
BIN_OPS = ("&&", "||", "=>", "<=>")


@dataclass(frozen=True)
class Atom:
    lhs: Term
    op: str
    rhs: Term


@dataclass(frozen=True)
class Binary:
    lhs: "Formula"
    op: str
    rhs: "Formula"


@dataclass(frozen=True)
class Neg:
    body: "Formula"


Formula = Union[Atom, Binary, Neg]


@dataclass(frozen=True)
class FunDecl:
    name: str
    arg_sorts: tuple[str, ...]
    ret_sort: str
    grammar_path: str


@dataclass(frozen=True)
class PropertyClause:
    bindings: tuple[tuple[str, str], ...]  # (variable, sort)
    body: Formula


@dataclass(frozen=True)
class RelationalSpec:
    funs: tuple[FunDecl, ...]
    examples: tuple[Formula, ...]
    properties: tuple[PropertyClause, ...]

    def fun(self, name: str) -> FunDecl:
        for f in self.funs:
            if f.name == name:
                return f
        raise UnknownSymbol(name)


def formula_size(phi: Formula) -> int:
    if isinstance(phi, Atom):
        return 1 + term_size(phi.lhs) + term_size(phi.rhs)
    if isinstance(phi, Neg):
        return 1 + formula_size(phi.body)
    return 1 + formula_size(phi.lhs) + formula_size(phi.rhs)


def term_size(t: Term) -> int:
    if isinstance(t, Apply):
        return 1 + sum(term_size(a) for a in t.args)
    return 1


def conjoin(clauses: Iterable[Formula]) -> Formula | None:
    """Left-associated conjunction of ground clauses; None when empty."""
    out: Formula | None = None
    for c in clauses:
        out = c if out is None else Binary(out, "&&", c)
    return out


# ---------------------------------------------------------------------------
# Rendering (diagnostics and counterexample printing)
# ---------------------------------------------------------------------------


def render_term(t: Term) -> str:
    if isinstance(t, Const):
        return render_literal(t.value)
    if isinstance(t, Var):
        return t.name
    return f"{t.fn}({', '.join(render_term(a) for a in t.args)})"


def render_formula(phi: Formula) -> str:
    if isinstance(phi, Atom):
        return f"{render_term(phi.lhs)} {phi.op} {render_term(phi.rhs)}"
    if isinstance(phi, Neg):
        return f"!({render_formula(phi.body)})"
    return f"({render_formula(phi.lhs)}) {phi.op} ({render_formula(phi.rhs)})"


# ---------------------------------------------------------------------------
# Tokenizer / parser for the spec-file format
# ---------------------------------------------------------------------------

_TOKEN_SPEC = [
    ("WS", r"[ \t\r\n]+"),
    ("COMMENT", r"#[^\n]*"),
    ("STR", r'"(?:\\.|[^"\\])*"'),
    ("CHAR", r"'(?:\\.|[^'\\])'"),
    ("INT", r"\d+"),
    ("OP", r"<=>|=>|==|!=|<=|>=|&&|\|\||->|[-<>!(),.:;/]"),
    ("NAME", r"[A-Za-z_]\w*"),
]
_TOKEN_RE = re.compile("|".join(f"(?P<{n}>{p})" for n, p in _TOKEN_SPEC))


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise SpecSyntaxError(f"line {line}, col {col}: cannot read {text[pos:pos+10]!r}")
        kind = m.lastgroup or ""
        chunk = m.group()
        if kind not in ("WS", "COMMENT"):
            toks.append(_Tok(kind, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    return toks


_STR_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t", "'": "'", " ": " "}


def _unescape_str(body: str) -> str:
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            nxt = body[i + 1]
            if nxt == "u":
                out.append(chr(int(body[i + 2 : i + 6], 16)))
                i += 6
                continue
            if nxt not in _STR_ESCAPES:
                raise SpecSyntaxError(f"bad escape \\{nxt}")
            out.append(_STR_ESCAPES[nxt])
            i += 2
            continue
        out.append(ch)
        i += 1
    return "".join(out)


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.pos = 0

    def peek(self) -> _Tok | None:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self) -> _Tok:
        t = self.peek()
        if t is None:
            raise SpecSyntaxError("unexpected end of input")
        self.pos += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.next()
        if t.text != text:
            raise SpecSyntaxError(f"line {t.line}, col {t.col}: expected {text!r}, got {t.text!r}")
        return t

    def at(self, text: str) -> bool:
        t = self.peek()
        return t is not None and t.text == text

    # -- formulas ----------------------------------------------------------

    def formula(self) -> Formula:
        return self._iff()

    def _iff(self) -> Formula:
        lhs = self._implies()
        while self.at("<=>"):
            self.next()
            lhs = Binary(lhs, "<=>", self._implies())
        return lhs

    def _implies(self) -> Formula:
        lhs = self._or()
        if self.at("=>"):
            self.next()
            return Binary(lhs, "=>", self._implies())
        return lhs

    def _or(self) -> Formula:
        lhs = self._and()
        while self.at("||"):
            self.next()
            lhs = Binary(lhs, "||", self._and())
        return lhs

    def _and(self) -> Formula:
        lhs = self._not()
        while self.at("&&"):
            self.next()
            lhs = Binary(lhs, "&&", self._not())
        return lhs

    def _not(self) -> Formula:
        if self.at("!"):
            self.next()
            return Neg(self._not())
        if self.at("("):
            self.next()
            inner = self.formula()
            self.expect(")")
            return inner
        return self._atom()

    def _atom(self) -> Formula:
        lhs = self.term()
        t = self.next()
        if t.text not in REL_OPS:
            raise SpecSyntaxError(
                f"line {t.line}, col {t.col}: expected a relation, got {t.text!r}"
            )
        rhs = self.term()
        return Atom(lhs, t.text, rhs)

    # -- terms -------------------------------------------------------------

    def term(self) -> Term:
        t = self.next()
        if t.text == "-":
            nxt = self.peek()
            if nxt is not None and nxt.kind == "INT":
                self.next()
                return Const(vint(-int(nxt.text)))
            return Apply("neg", (self.term(),))
        if t.kind == "INT":
            return Const(vint(int(t.text)))
        if t.kind == "STR":
            return Const(vstr(_unescape_str(t.text[1:-1])))
        if t.kind == "CHAR":
            return Const(vchar(_unescape_str(t.text[1:-1])))
        if t.kind == "NAME":
            if t.text == "true":
                return Const(vbool(True))
            if t.text == "false":
                return Const(vbool(False))
            if self.at("("):
                self.next()
                args = []
                if not self.at(")"):
                    args.append(self.term())
                    while self.at(","):
                        self.next()
                        args.append(self.term())
                self.expect(")")
                return Apply(t.text, tuple(args))
            return Var(t.text)
        raise SpecSyntaxError(f"line {t.line}, col {t.col}: unexpected {t.text!r} in term")


SORT_NAMES = ("Bool", "Int", "Char", "Str", "Bytes", "IntArray", "CharArray")


def parse_spec(
    text: str, interpreted: Mapping[str, InterpretedFn] = DEFAULT_INTERPRETED
) -> RelationalSpec:
    p = _Parser(_tokenize(text))
    funs: list[FunDecl] = []
    examples: list[Formula] = []
    properties: list[PropertyClause] = []

    while p.peek() is not None:
        head = p.next()
        if head.text == "fun":
            name = p.next()
            p.expect(":")
            sorts = [p.next().text]
            while p.at(","):
                p.next()
                sorts.append(p.next().text)
            p.expect("->")
            ret = p.next().text
            kw = p.next()
            if kw.text != "grammar":
                raise SpecSyntaxError(f"line {kw.line}: expected 'grammar', got {kw.text!r}")
            path_parts = []
            while not p.at(";"):
                path_parts.append(p.next().text)
            p.expect(";")
            for s in (*sorts, ret):
                if s not in SORT_NAMES:
                    raise SpecSyntaxError(f"line {head.line}: unknown sort {s!r}")
            funs.append(FunDecl(name.text, tuple(sorts), ret, "".join(path_parts)))
        elif head.text == "example":
            examples.append(p.formula())
            p.expect(";")
        elif head.text == "property":
            kw = p.next()
            if kw.text != "forall":
                raise SpecSyntaxError(f"line {kw.line}: expected 'forall', got {kw.text!r}")
            bindings = []
            while True:
                v = p.next()
                p.expect(":")
                sort = p.next().text
                if sort not in SORT_NAMES:
                    raise SpecSyntaxError(f"line {v.line}: unknown sort {sort!r}")
                bindings.append((v.text, sort))
                if p.at(","):
                    p.next()
                    continue
                break
            p.expect(".")
            body = p.formula()
            p.expect(";")
            properties.append(PropertyClause(tuple(bindings), body))
        else:
            raise SpecSyntaxError(
                f"line {head.line}: expected fun/example/property, got {head.text!r}"
            )

    if not funs and not examples and not properties:
        raise EmptySpec("specification declares nothing")

    spec = RelationalSpec(tuple(funs), tuple(examples), tuple(properties))
    _check_spec(spec, interpreted)
    return spec


def _check_spec(spec: RelationalSpec, interpreted: Mapping[str, InterpretedFn]) -> None:
    arities = {f.name: len(f.arg_sorts) for f in spec.funs}

    def check_term(t: Term, bound: frozenset[str]) -> None:
        if isinstance(t, Var):
            if t.name not in bound:
                raise UnknownSymbol(f"unbound variable {t.name!r}")
            return
        if isinstance(t, Apply):
            if t.fn in arities:
                want = arities[t.fn]
            elif t.fn in interpreted:
                want = interpreted[t.fn].arity
            else:
                raise UnknownSymbol(f"unknown function {t.fn!r}")
            if len(t.args) != want:
                raise ArityMismatch(f"{t.fn} expects {want} arguments, got {len(t.args)}")
            for a in t.args:
                check_term(a, bound)

    def check_formula(phi: Formula, bound: frozenset[str]) -> None:
        if isinstance(phi, Atom):
            check_term(phi.lhs, bound)
            check_term(phi.rhs, bound)
        elif isinstance(phi, Neg):
            check_formula(phi.body, bound)
        else:
            check_formula(phi.lhs, bound)
            check_formula(phi.rhs, bound)

    for ex in spec.examples:
        check_formula(ex, frozenset())
    for prop in spec.properties:
        check_formula(prop.body, frozenset(v for v, _ in prop.bindings))


# ---------------------------------------------------------------------------
# Instantiation and evaluation
# ---------------------------------------------------------------------------


def instantiate(clause: PropertyClause, witness: Mapping[str, Value]) -> Formula:
    """Substitute concrete values for the clause's quantified variables."""

    def sub_term(t: Term) -> Term:
        if isinstance(t, Var):
            return Const(witness[t.name])
        if isinstance(t, Apply):
            return Apply(t.fn, tuple(sub_term(a) for a in t.args))
        return t

    def sub(phi: Formula) -> Formula:
        if isinstance(phi, Atom):
            return Atom(sub_term(phi.lhs), phi.op, sub_term(phi.rhs))
        if isinstance(phi, Neg):
            return Neg(sub(phi.body))
        return Binary(sub(phi.lhs), phi.op, sub(phi.rhs))

    return sub(clause.body)


@dataclass(frozen=True)
class BoundProgram:
    """A program together with the grammar that gives its parameters meaning."""

    grammar: Grammar
    ast: ProgramAst

    def __call__(self, *args: Value) -> Value:
        return eval_program(self.grammar, self.ast, args)


def eval_term(
    t: Term,
    programs: Mapping[str, BoundProgram],
    interpreted: Mapping[str, InterpretedFn] = DEFAULT_INTERPRETED,
) -> Value:
    if isinstance(t, Const):
        return t.value
    if isinstance(t, Var):
        raise SpecError(f"cannot evaluate open term (variable {t.name!r})")
    args = tuple(eval_term(a, programs, interpreted) for a in t.args)
    for a in args:
        if is_err(a):
            return a
    if t.fn in programs:
        return programs[t.fn](*args)
    if t.fn in interpreted:
        return interpreted[t.fn].apply(*args)
    raise UnknownSymbol(t.fn)


_ORDERABLE = {"Int", "Char", "Str", "Bytes", "IntArray", "CharArray"}


def eval_atom(a: Value, op: str, b: Value) -> bool:
    """Relation constants over values; any Err operand makes the atom false."""
    if is_err(a) or is_err(b):
        return False
    if op == "==":
        return value_equals(a, b)
    if op == "!=":
        return not value_equals(a, b)
    if a.tag != b.tag or a.tag not in _ORDERABLE:
        return False
    if op == "<":
        return a.data < b.data
    if op == "<=":
        return a.data <= b.data
    if op == ">":
        return a.data > b.data
    if op == ">=":
        return a.data >= b.data
    raise SpecError(f"unknown relation {op!r}")


def evaluate_ground(
    phi: Formula,
    programs: Mapping[str, BoundProgram],
    interpreted: Mapping[str, InterpretedFn] = DEFAULT_INTERPRETED,
) -> bool:
    """Truth value of a ground formula under the given program assignment.

    This direct recursive evaluator is the oracle against which the automaton
    machinery is tested.
    """
    if isinstance(phi, Atom):
        a = eval_term(phi.lhs, programs, interpreted)
        b = eval_term(phi.rhs, programs, interpreted)
        return eval_atom(a, phi.op, b)
    if isinstance(phi, Neg):
        return not evaluate_ground(phi.body, programs, interpreted)
    lhs = evaluate_ground(phi.lhs, programs, interpreted)
    rhs = evaluate_ground(phi.rhs, programs, interpreted)
    if phi.op == "&&":
        return lhs and rhs
    if phi.op == "||":
        return lhs or rhs
    if phi.op == "=>":
        return (not lhs) or rhs
    if phi.op == "<=>":
        return lhs == rhs
    raise SpecError(f"unknown connective {phi.op!r}")


# ---------------------------------------------------------------------------
# Relaxation: one fresh symbol per occurrence of each target function
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OccurrenceMap:
    forward: Mapping[str, tuple[str, ...]]
    inverse: Mapping[str, str]

    def occurrences(self, f: str) -> tuple[str, ...]:
        return self.forward.get(f, ())

    def original(self, occ: str) -> str:
        return self.inverse[occ]


OCC_SEP = "#"


def relax(phi: Formula, targets: Iterable[str]) -> tuple[Formula, OccurrenceMap]:
    """Rename each occurrence of a target symbol to f#1, f#2, ... left-to-right.

    Interpreted functions are left untouched.  Erasing the #k suffixes from the
    result recovers the input formula exactly.
    """
    target_set = frozenset(targets)
    counters: dict[str, int] = {}
    forward: dict[str, list[str]] = {}

    def walk_term(t: Term) -> Term:
        if isinstance(t, Apply):
            args = tuple(walk_term(a) for a in t.args)
            if t.fn in target_set:
                counters[t.fn] = counters.get(t.fn, 0) + 1
                occ = f"{t.fn}{OCC_SEP}{counters[t.fn]}"
                forward.setdefault(t.fn, []).append(occ)
                return Apply(occ, args)
            return Apply(t.fn, args)
        return t

    def walk(f: Formula) -> Formula:
        if isinstance(f, Atom):
            return Atom(walk_term(f.lhs), f.op, walk_term(f.rhs))
        if isinstance(f, Neg):
            return Neg(walk(f.body))
        return Binary(walk(f.lhs), f.op, walk(f.rhs))

    out = walk(phi)
    fwd = {f: tuple(occs) for f, occs in forward.items()}
    inv = {occ: f for f, occs in fwd.items() for occ in occs}
    return out, OccurrenceMap(fwd, inv)


def erase_indices(phi: Formula) -> Formula:
    def walk_term(t: Term) -> Term:
        if isinstance(t, Apply):
            base = t.fn.split(OCC_SEP, 1)[0]
            return Apply(base, tuple(walk_term(a) for a in t.args))
        return t

    def walk(f: Formula) -> Formula:
        if isinstance(f, Atom):
            return Atom(walk_term(f.lhs), f.op, walk_term(f.rhs))
        if isinstance(f, Neg):
            return Neg(walk(f.body))
        return Binary(walk(f.lhs), f.op, walk(f.rhs))

    return walk(phi)


def merge_occurrence_maps(m1: OccurrenceMap, m2: OccurrenceMap) -> OccurrenceMap:
    """Pointwise union: occurrences present in either map are kept."""
    forward: dict[str, tuple[str, ...]] = dict(m1.forward)
    for f, occs in m2.forward.items():
        forward[f] = forward.get(f, ()) + tuple(o for o in occs if o not in forward.get(f, ()))
    inverse = {occ: f for f, occs in forward.items() for occ in occs}
    return OccurrenceMap(forward, inverse)
