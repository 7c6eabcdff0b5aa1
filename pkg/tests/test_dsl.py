"""Grammars, the interpreter, builtin codec semantics, and the cost model.

Codec constructors are checked against the Python standard library
(`base64`, `codecs`) as an independent oracle; pipeline values that the
engine's own documentation fixes (reshape bit groups, canonical Base64
vectors) are asserted directly.
"""

from __future__ import annotations

import base64
import binascii
import itertools
from pathlib import Path

import pytest

from relsynth import (
    CostModel,
    conforms,
    eval_program,
    load_grammar,
    parse_grammar,
    parse_program,
    program_cost,
    render_program,
    vint,
    vint_array,
    vstr,
)
from relsynth.dsl import DslSyntaxError, UnknownConstructor

from oracles import (
    LINEAR_GRAMMAR,
    SUM_GRAMMAR,
    ref_base16,
    ref_base32,
    ref_base32hex,
    ref_base64,
    ref_base64url,
    ref_utf8,
    ref_utf16,
    ref_utf32,
)

BENCH = Path(__file__).resolve().parent.parent / "benchmarks"
ENC = load_grammar(BENCH / "encoder.grammar")
DEC = load_grammar(BENCH / "decoder.grammar")
CMP = load_grammar(BENCH / "comparator.grammar")


def run_enc(text: str, program: str):
    return eval_program(ENC, parse_program(ENC, program), [vstr(text)])


def run_dec(text: str, program: str):
    return eval_program(DEC, parse_program(DEC, program), [vstr(text)])


def run_cmp(a: str, b: str, program: str):
    return eval_program(CMP, parse_program(CMP, program), [vstr(a), vstr(b)])


# ---------------------------------------------------------------------------
# Grammar loading and program parsing
# ---------------------------------------------------------------------------


def test_load_encoder_grammar():
    assert ENC.start == "E"
    assert [p for p, _sort in ENC.params] == ["x"]


def test_load_comparator_grammar():
    assert CMP.start == "Cmp"
    assert [p for p, _sort in CMP.params] == ["x", "y"]


def test_unknown_constructor_rejected():
    with pytest.raises(UnknownConstructor):
        parse_grammar("param x : Str\nstart S\nS -> frobnicate(x)", "bad")


def test_malformed_production_rejected():
    with pytest.raises(DslSyntaxError):
        parse_grammar("param x : Str\nstart S\nS x", "bad")


def test_program_render_parse_round_trip():
    text = "padToMultiple(enc64(reshape(encUTF8(codePoint(x)),6)),4,'=')"
    p = parse_program(ENC, text)
    assert render_program(p) == text
    assert conforms(ENC, p)


def test_program_not_in_grammar_fails_conformance():
    p = parse_program(LINEAR_GRAMMAR, "inc(inc(x))")
    assert conforms(LINEAR_GRAMMAR, p)
    assert not conforms(SUM_GRAMMAR, p)


# ---------------------------------------------------------------------------
# Interpreter basics
# ---------------------------------------------------------------------------


def test_eval_sum_example():
    p = parse_program(SUM_GRAMMAR, "add(x1,x2)")
    assert eval_program(SUM_GRAMMAR, p, [vint(1), vint(3)]) == vint(4)


def test_eval_parameter_identity():
    p = parse_program(LINEAR_GRAMMAR, "x")
    assert eval_program(LINEAR_GRAMMAR, p, [vint(42)]) == vint(42)


def test_eval_is_deterministic():
    p = parse_program(ENC, "enc64(reshape(encUTF8(codePoint(x)),6))")
    first = eval_program(ENC, p, [vstr("Man")])
    for _ in range(3):
        assert eval_program(ENC, p, [vstr("Man")]) == first


# ---------------------------------------------------------------------------
# Bit-group reshaping (documented fixed points)
# ---------------------------------------------------------------------------


def test_reshape_documented_values():
    from relsynth.dsl import REGISTRY

    reshape = REGISTRY[("reshape", 2)]
    inv = REGISTRY[("invReshape", 2)]
    assert reshape(vint_array([0xFF]), vint(4)) == vint_array([0x0F, 0x0F])
    assert reshape(vint_array([0xFE]), vint(2)) == vint_array([0x03, 0x03, 0x03, 0x02])
    assert inv(vint_array([0x0E, 0x0F]), vint(4)) == vint_array([0xEF])


def test_reshape_inverts_for_all_group_sizes():
    from relsynth.dsl import REGISTRY

    reshape = REGISTRY[("reshape", 2)]
    inv = REGISTRY[("invReshape", 2)]
    data = vint_array([0x4D, 0x61, 0x6E, 0x00, 0xFF])
    for n in (1, 2, 3, 4, 5, 6, 7, 8):
        groups = reshape(data, vint(n))
        assert inv(groups, vint(n)) == data


# ---------------------------------------------------------------------------
# Encoder pipelines against the standard library
# ---------------------------------------------------------------------------

SAMPLES = ["M", "Ma", "Man", "hello", "ABCD", "¢", "€", "a b c", ""]


def test_base16_pipeline_matches_stdlib():
    prog = "enc16(reshape(encUTF8(codePoint(x)),4))"
    for s in SAMPLES:
        assert run_enc(s, prog) == vstr(ref_base16(ref_utf8(s)))


def test_base64_pipeline_matches_stdlib():
    prog = "padToMultiple(enc64(reshape(encUTF8(codePoint(x)),6)),4,'=')"
    for s in SAMPLES:
        assert run_enc(s, prog) == vstr(ref_base64(ref_utf8(s)))


def test_base64_canonical_vectors():
    prog = "padToMultiple(enc64(reshape(encUTF8(codePoint(x)),6)),4,'=')"
    assert run_enc("Man", prog) == vstr("TWFu")
    assert run_enc("Ma", prog) == vstr("TWE=")
    assert run_enc("M", prog) == vstr("TQ==")


def test_base32_pipelines_match_stdlib():
    b32 = "padToMultiple(enc32(reshape(encUTF8(codePoint(x)),5)),8,'=')"
    b32hex = "padToMultiple(enc32Hex(reshape(encUTF8(codePoint(x)),5)),8,'=')"
    for s in SAMPLES:
        assert run_enc(s, b32) == vstr(ref_base32(ref_utf8(s)))
        assert run_enc(s, b32hex) == vstr(ref_base32hex(ref_utf8(s)))


def test_base64_url_alphabet_matches_stdlib():
    prog = "enc64XML(reshape(encUTF8(codePoint(x)),6))"
    for s in SAMPLES:
        expected = ref_base64url(ref_utf8(s)).rstrip("=")
        assert run_enc(s, prog) == vstr(expected)


def test_utf_encodings_match_stdlib():
    cases = [
        ("enc16(reshape(encUTF8(codePoint(x)),4))", ref_utf8),
        ("enc16(reshape(encUTF16(codePoint(x)),4))", ref_utf16),
        ("enc16(reshape(encUTF32(codePoint(x)),4))", ref_utf32),
    ]
    for s in ["$", "¢", "€", "\U00010437", "Man"]:
        for prog, ref in cases:
            assert run_enc(s, prog) == vstr(ref_base16(ref(s)))


def test_uuencode_payload_matches_stdlib():
    # Compare against binascii on 3-byte multiples, where no tail padding is
    # involved; zero groups map to '`' in both implementations.
    prog = "encUU(reshape(encUTF8(codePoint(x)),6))"
    for s in ["Cat", "Manate", "AAABBB", "\x01\x02\x03"]:
        expected = binascii.b2a_uu(ref_utf8(s), backtick=True)[1:-1].decode("ascii")
        assert run_enc(s, prog) == vstr(expected)


def test_decoder_pipelines_invert_references():
    pairs = [
        (
            "enc16(reshape(encUTF8(codePoint(x)),4))",
            "asUnicode(decUTF8(invReshape(dec16(y),4)))",
        ),
        (
            "padToMultiple(enc64(reshape(encUTF8(codePoint(x)),6)),4,'=')",
            "asUnicode(decUTF8(invReshape(dec64(removePad(y,'=')),6)))",
        ),
        (
            "enc16(reshape(encUTF16(codePoint(x)),4))",
            "asUnicode(decUTF16(invReshape(dec16(y),4)))",
        ),
    ]
    for s in SAMPLES:
        for e_prog, d_prog in pairs:
            encoded = run_enc(s, e_prog)
            assert run_dec(encoded.data, d_prog) == vstr(s)


def test_decode_canonical_vector():
    prog = "asUnicode(decUTF8(invReshape(dec64(removePad(y,'=')),6)))"
    assert run_dec("TQ==", prog) == vstr("M")
    assert run_dec("TWE=", prog) == vstr("Ma")


def test_remove_pad():
    prog = "removePad(y,'=')"
    assert run_dec("TWE=", prog) == vstr("TWE")
    assert run_dec("TQ==", prog) == vstr("TQ")
    assert run_dec("TWFu", prog) == vstr("TWFu")
    assert base64.b64decode("TWE=") == b"Ma"  # oracle for the stripped form


def test_decode_rejects_out_of_alphabet_characters():
    assert run_dec("T@!", "dec64(y)").tag == "Err"
    assert run_dec("ZZ", "dec16(y)").tag == "Err"


def test_header_prepends_decimal_length():
    prog = "header(padToMultiple(encUU(reshape(encUTF8(codePoint(x)),6)),4,' '))"
    out = run_enc("Cat", prog)
    assert out == vstr("4:0V%T")


def test_err_absorption_through_pipelines():
    # dec16 fails on odd-length input; every surrounding constructor must
    # propagate that failure unchanged.
    prog = "asUnicode(decUTF8(invReshape(dec16(y),4)))"
    assert run_dec("ABC", prog).tag == "Err"


# ---------------------------------------------------------------------------
# Reference-pair duality, brute force
# ---------------------------------------------------------------------------


def test_encoder_decoder_duality_brute_force():
    pairs = [
        (
            "enc16(reshape(encUTF8(codePoint(x)),4))",
            "asUnicode(decUTF8(invReshape(dec16(y),4)))",
        ),
        (
            "padToMultiple(enc64(reshape(encUTF8(codePoint(x)),6)),4,'=')",
            "asUnicode(decUTF8(invReshape(dec64(removePad(y,'=')),6)))",
        ),
    ]
    programs = [
        (parse_program(ENC, e), parse_program(DEC, d)) for e, d in pairs
    ]
    alphabet = "ABCDEFGHIJKLMNOP"
    for length in range(1, 5):
        for tup in itertools.product(alphabet, repeat=length):
            s = vstr("".join(tup))
            for pe, pd in programs:
                assert eval_program(DEC, pd, [eval_program(ENC, pe, [s])]) == s


# ---------------------------------------------------------------------------
# Comparator semantics
# ---------------------------------------------------------------------------


def test_token_position():
    from relsynth.dsl import REGISTRY

    pos = REGISTRY[("pos", 4)]
    assert pos(vstr("12ab"), vstr("Number"), vint(1), vstr("Start")) == vint(0)
    assert pos(vstr("12ab"), vstr("Number"), vint(1), vstr("End")) == vint(2)
    assert pos(vstr("12ab"), vstr("Alpha"), vint(1), vstr("Start")) == vint(2)
    assert pos(vstr("12ab"), vstr("Number"), vint(2), vstr("Start")).tag == "Err"


def test_substr_with_token_positions():
    prog = "strCompare(substr(x,pos(x,Number,1,Start),pos(x,Number,1,End)),y)"
    assert run_cmp("12ab", "12", prog) == vint(0)
    assert run_cmp("12ab", "11", prog) == vint(1)


def test_to_int_failure_is_a_value():
    assert run_cmp("abc", "0", "intCompare(toInt(x),toInt(y))").tag == "Err"
    from relsynth.dsl import REGISTRY

    assert REGISTRY[("toInt", 1)](vstr("abc")).tag == "Err"
    assert REGISTRY[("toInt", 1)](vstr("128")) == vint(128)


def test_chain_comparator_example():
    prog = "chain(intCompare(countChar(x,'5'),countChar(y,'5')),intCompare(toInt(x),toInt(y)))"
    assert run_cmp("24", "15", prog) == vint(-1)
    assert run_cmp("15", "24", prog) == vint(1)
    assert run_cmp("24", "24", prog) == vint(0)


def test_chain_takes_first_nonzero():
    prog = "chain(intCompare(length(x),length(y)),strCompare(x,y))"
    assert run_cmp("b", "aa", prog) == vint(-1)
    assert run_cmp("ab", "aa", prog) == vint(1)
    assert run_cmp("aa", "aa", prog) == vint(0)


def test_comparator_outputs_are_signs():
    prog = "intCompare(toInt(x),toInt(y))"
    assert run_cmp("500", "3", prog) == vint(1)
    assert run_cmp("3", "500", prog) == vint(-1)


# ---------------------------------------------------------------------------
# Cost model
# ---------------------------------------------------------------------------


def test_unit_costs():
    assert program_cost(parse_program(LINEAR_GRAMMAR, "x")) == 1
    assert program_cost(parse_program(SUM_GRAMMAR, "add(x1,x2)")) == 3
    enc = parse_program(ENC, "padToMultiple(enc64(reshape(encUTF8(codePoint(x)),6)),4,'=')")
    assert program_cost(enc) == 9


def test_cost_model_overrides():
    m = CostModel({"add": 5.0}, default=2.0)
    assert program_cost(parse_program(SUM_GRAMMAR, "add(x1,x2)"), m) == 9.0
    assert m.max_cost() == 5.0


def test_costs_must_not_be_negative():
    with pytest.raises(ValueError):
        CostModel({"add": -1.0}).node_cost("add")
    with pytest.raises(ValueError):
        CostModel({"add": 0.0}).require_positive()
