"""Spec parsing, relaxation, and ground-formula evaluation."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from relsynth import (
    Apply,
    Atom,
    Binary,
    Const,
    Neg,
    conjoin,
    evaluate_ground,
    instantiate,
    parse_program,
    parse_spec,
    relax,
    render_formula,
    vint,
    vstr,
)
from relsynth.lang import BoundProgram, SpecSyntaxError, SpecError, formula_size

from oracles import DOUBLING_GRAMMAR, LINEAR_GRAMMAR


def bound(g, text: str) -> BoundProgram:
    return BoundProgram(g, parse_program(g, text))


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def test_parse_example_clause():
    spec = parse_spec(
        'fun encode : Str -> Str grammar enc.grammar;\n'
        'example encode("M") == "TQ==";'
    )
    assert len(spec.examples) == 1
    atom = spec.examples[0]
    assert isinstance(atom, Atom)
    assert atom.lhs == Apply("encode", (Const(vstr("M")),))
    assert atom.rhs == Const(vstr("TQ=="))


def test_parse_quantified_property():
    spec = parse_spec(
        'fun encode : Str -> Str grammar enc.grammar;\n'
        'fun decode : Str -> Str grammar dec.grammar;\n'
        'property forall x : Str . decode(encode(x)) == x;'
    )
    (clause,) = spec.properties
    assert clause.bindings == (("x", "Str"),)
    assert render_formula(clause.body) == 'decode(encode(x)) == x'


def test_empty_spec_rejected():
    with pytest.raises(SpecError):
        parse_spec("")


def test_unknown_symbol_rejected():
    with pytest.raises(SpecError):
        parse_spec('fun f : Int -> Int grammar g;\nexample h(1) == 1;')


def test_arity_mismatch_rejected():
    with pytest.raises(SpecError):
        parse_spec('fun f : Int -> Int grammar g;\nexample f(1, 2) == 1;')


def test_syntax_error_carries_location():
    with pytest.raises(SpecSyntaxError) as exc:
        parse_spec('fun f : Int -> Int grammar g;\nexample f(1 == 1;')
    assert "2" in str(exc.value)


# ---------------------------------------------------------------------------
# Relaxation
# ---------------------------------------------------------------------------


def _erase(phi):
    """Strip occurrence suffixes (f#k -> f) from every application."""
    if isinstance(phi, Atom):
        return Atom(_erase_term(phi.lhs), phi.op, _erase_term(phi.rhs))
    if isinstance(phi, Binary):
        return Binary(_erase(phi.lhs), phi.op, _erase(phi.rhs))
    if isinstance(phi, Neg):
        return Neg(_erase(phi.body))
    return phi


def _erase_term(t):
    if isinstance(t, Apply):
        return Apply(t.fn.split("#")[0], tuple(_erase_term(a) for a in t.args))
    return t


def _occurrence_symbols(phi, acc):
    if isinstance(phi, Atom):
        _occ_term(phi.lhs, acc)
        _occ_term(phi.rhs, acc)
    elif isinstance(phi, Binary):
        _occurrence_symbols(phi.lhs, acc)
        _occurrence_symbols(phi.rhs, acc)
    elif isinstance(phi, Neg):
        _occurrence_symbols(phi.body, acc)
    return acc


def _occ_term(t, acc):
    if isinstance(t, Apply):
        acc.append(t.fn)
        for a in t.args:
            _occ_term(a, acc)


def test_relax_shared_subterm():
    # f(2) == g(f(1)) splits f into two occurrences and leaves g with one.
    phi = Atom(
        Apply("f", (Const(vint(2)),)),
        "==",
        Apply("g", (Apply("f", (Const(vint(1)),)),)),
    )
    relaxed, m = relax(phi, {"f", "g"})
    assert sorted(m.occurrences("f")) == ["f#1", "f#2"]
    assert m.occurrences("g") == ("g#1",)
    assert m.original("f#2") == "f"
    assert _erase(relaxed) == phi
    occs = _occurrence_symbols(relaxed, [])
    assert sorted(occs) == ["f#1", "f#2", "g#1"]


def test_relax_constant_atom_is_identity():
    phi = Atom(Const(vint(3)), "==", Const(vint(3)))
    relaxed, m = relax(phi, {"f"})
    assert relaxed == phi
    assert m.occurrences("f") == ()


def test_relax_conjunction():
    phi = Binary(
        Atom(Apply("f", (Const(vint(1)),)), "==", Const(vint(1))),
        "&&",
        Atom(Apply("f", (Const(vint(2)),)), "==", Const(vint(2))),
    )
    relaxed, m = relax(phi, {"f"})
    assert sorted(m.occurrences("f")) == ["f#1", "f#2"]
    assert _erase(relaxed) == phi


def test_relax_leaves_interpreted_functions_alone():
    phi = Atom(
        Apply("sgn", (Apply("f", (Const(vint(1)),)),)),
        "==",
        Const(vint(1)),
    )
    relaxed, m = relax(phi, {"f"})
    occs = _occurrence_symbols(relaxed, [])
    assert "sgn" in occs
    assert m.occurrences("f") == ("f#1",)


# Random ground formulas over applications of f and g.


def terms(depth: int):
    if depth == 0:
        return st.integers(0, 3).map(lambda n: Const(vint(n)))
    sub = terms(depth - 1)
    return st.one_of(
        st.integers(0, 3).map(lambda n: Const(vint(n))),
        st.tuples(st.sampled_from(["f", "g"]), sub).map(
            lambda p: Apply(p[0], (p[1],))
        ),
    )


def formulas(depth: int):
    atom = st.tuples(terms(2), st.sampled_from(["==", "!=", "<", "<="]), terms(2)).map(
        lambda t: Atom(t[0], t[1], t[2])
    )
    if depth == 0:
        return atom
    sub = formulas(depth - 1)
    return st.one_of(
        atom,
        st.tuples(sub, st.sampled_from(["&&", "||", "=>", "<=>"]), sub).map(
            lambda t: Binary(t[0], t[1], t[2])
        ),
        sub.map(Neg),
    )


@given(formulas(2))
def test_relax_round_trip_and_single_occurrence(phi):
    relaxed, m = relax(phi, {"f", "g"})
    assert _erase(relaxed) == phi
    occs = [o for o in _occurrence_symbols(relaxed, []) if "#" in o]
    assert len(occs) == len(set(occs))
    for o in occs:
        base = o.split("#")[0]
        assert o in m.occurrences(base)
        assert m.original(o) == base


@given(formulas(2))
def test_relax_preserves_semantics(phi):
    programs = {
        "f": bound(LINEAR_GRAMMAR, "inc(x)"),
        "g": bound(DOUBLING_GRAMMAR, "dbl(y)"),
    }
    relaxed, m = relax(phi, {"f", "g"})
    relaxed_programs = {}
    for f in ("f", "g"):
        for occ in m.occurrences(f):
            relaxed_programs[occ] = programs[f]
    assert evaluate_ground(phi, programs) == evaluate_ground(relaxed, relaxed_programs)


# ---------------------------------------------------------------------------
# Ground evaluation
# ---------------------------------------------------------------------------


def _shared_phi():
    return Atom(
        Apply("f", (Const(vint(2)),)),
        "==",
        Apply("g", (Apply("f", (Const(vint(1)),)),)),
    )


def test_evaluate_ground_accepts_the_known_solution():
    programs = {
        "f": bound(LINEAR_GRAMMAR, "x"),
        "g": bound(DOUBLING_GRAMMAR, "dbl(y)"),
    }
    assert evaluate_ground(_shared_phi(), programs)


def test_evaluate_ground_rejects_near_miss():
    programs = {
        "f": bound(LINEAR_GRAMMAR, "inc(x)"),
        "g": bound(DOUBLING_GRAMMAR, "dbl(y)"),
    }
    assert not evaluate_ground(_shared_phi(), programs)


def test_evaluate_ground_negation():
    phi = Neg(Atom(Const(vint(1)), "==", Const(vint(1))))
    assert not evaluate_ground(phi, {})


def test_atoms_on_error_values_are_false():
    # toInt("abc") fails; both the atom and its negation's body are false.
    from relsynth.dsl import load_grammar
    from pathlib import Path

    cmp_g = load_grammar(Path(__file__).resolve().parent.parent / "benchmarks" / "comparator.grammar")
    programs = {"c": bound(cmp_g, "intCompare(toInt(x),toInt(y))")}
    phi = Atom(
        Apply("c", (Const(vstr("abc")), Const(vstr("1")))),
        "==",
        Const(vint(0)),
    )
    assert not evaluate_ground(phi, programs)
    phi_ne = Atom(
        Apply("c", (Const(vstr("abc")), Const(vstr("1")))),
        "!=",
        Const(vint(0)),
    )
    assert not evaluate_ground(phi_ne, programs)


def test_cross_type_comparison_is_false():
    phi = Atom(Const(vint(5)), "==", Const(vstr("5")))
    assert not evaluate_ground(phi, {})


def test_interpreted_functions_in_atoms():
    phi = Atom(
        Apply("sgn", (Apply("f", (Const(vint(0)),)),)),
        "==",
        Apply("neg", (Apply("sgn", (Apply("f", (Const(vint(0)),)),)),)),
    )
    programs = {"f": bound(LINEAR_GRAMMAR, "x")}
    # sgn(0) == neg(sgn(0)) holds; with f = inc(x) it fails (1 != -1).
    assert evaluate_ground(phi, programs)
    programs = {"f": bound(LINEAR_GRAMMAR, "inc(x)")}
    assert not evaluate_ground(phi, programs)


# ---------------------------------------------------------------------------
# Clause instantiation and conjunction
# ---------------------------------------------------------------------------


def test_instantiate_substitutes_witness():
    spec = parse_spec(
        'fun f : Int -> Int grammar g;\n'
        'property forall a : Int . f(a) == a;'
    )
    (clause,) = spec.properties
    ground = instantiate(clause, {"a": vint(7)})
    assert render_formula(ground) == "f(7) == 7"


def test_conjoin():
    a = Atom(Const(vint(1)), "==", Const(vint(1)))
    b = Atom(Const(vint(2)), "==", Const(vint(2)))
    assert conjoin([]) is None
    assert conjoin([a]) == a
    both = conjoin([a, b])
    assert isinstance(both, Binary) and both.op == "&&"
    assert formula_size(both) == formula_size(a) + formula_size(b) + 1
