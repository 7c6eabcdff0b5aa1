"""The dynamic value domain: equality, canonical order, sign builtins."""

from __future__ import annotations

import itertools

from hypothesis import given, strategies as st

from relsynth import (
    compare_values,
    value_equals,
    vbool,
    vbytes,
    vchar,
    vchar_array,
    verr,
    vint,
    vint_array,
    vstr,
)
from relsynth.values import DEFAULT_INTERPRETED, builtin_neg, builtin_sgn


def test_equality_basic():
    assert value_equals(vint(3), vint(3))
    assert value_equals(vstr("TWFu"), vstr("TWFu"))
    assert not value_equals(vint(5), vstr("5"))


def test_err_equality_by_label():
    assert value_equals(verr("type"), verr("type"))
    assert not value_equals(verr("type"), verr("overflow"))
    assert not value_equals(verr("type"), vint(0))


def test_sgn():
    assert builtin_sgn(vint(-7)) == vint(-1)
    assert builtin_sgn(vint(0)) == vint(0)
    assert builtin_sgn(vint(12)) == vint(1)
    assert builtin_sgn(verr("type")) == verr("type")
    assert builtin_sgn(vstr("x")).tag == "Err"


def test_neg():
    assert builtin_neg(vint(-1)) == vint(1)
    assert builtin_neg(vint(0)) == vint(0)
    assert builtin_neg(verr("boom")) == verr("boom")


def test_default_interpreted_registry():
    assert set(DEFAULT_INTERPRETED) == {"sgn", "neg"}
    assert DEFAULT_INTERPRETED["sgn"].arity == 1
    assert DEFAULT_INTERPRETED["sgn"].apply(vint(-3)) == vint(-1)


value_strategy = st.one_of(
    st.booleans().map(vbool),
    st.integers(-(2**40), 2**40).map(vint),
    st.characters(codec="utf-8").map(vchar),
    st.text(max_size=6).map(vstr),
    st.binary(max_size=6).map(vbytes),
    st.lists(st.integers(-9, 9), max_size=4).map(vint_array),
    st.text(max_size=4).map(vchar_array),
    st.sampled_from(["type", "overflow", "toInt"]).map(verr),
)


@given(value_strategy, value_strategy, value_strategy)
def test_equality_is_an_equivalence(a, b, c):
    assert value_equals(a, a)
    assert value_equals(a, b) == value_equals(b, a)
    if value_equals(a, b) and value_equals(b, c):
        assert value_equals(a, c)


@given(value_strategy, value_strategy)
def test_order_consistent_with_equality(a, b):
    cmp = compare_values(a, b)
    assert cmp in (-1, 0, 1)
    assert (cmp == 0) == value_equals(a, b)
    assert compare_values(b, a) == -cmp


@given(st.lists(value_strategy, min_size=3, max_size=3))
def test_order_is_transitive(vals):
    a, b, c = vals
    if compare_values(a, b) <= 0 and compare_values(b, c) <= 0:
        assert compare_values(a, c) <= 0


def test_order_groups_by_tag():
    ordered = [
        vbool(True),
        vint(7),
        vchar("a"),
        vstr("a"),
        vbytes(b"a"),
        vint_array([1]),
        vchar_array("a"),
        verr("type"),
    ]
    for left, right in itertools.combinations(ordered, 2):
        assert compare_values(left, right) == -1
