import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ndml.syntax import (
    ANT,
    CON,
    PRE,
    SUC,
    Box,
    Dia,
    FreshSupply,
    ParseError,
    RenamingError,
    S,
    Sequent,
    WellFormednessError,
    alpha_equivalent,
    exact_two,
    lab_j,
    lab_m,
    parse_loc,
    parse_sequent,
    position_of,
    print_sequent,
    prop,
    rename,
    var,
    var_profile,
)
from strategies import formulas, sequents


def test_parse_identity_sequent():
    s = S("j1 <= []p0 |- j1 <= []p0")
    assert s == Sequent([lab_j(1, Box(prop(0)))], [lab_j(1, Box(prop(0)))])


def test_parse_box_p_conclusion():
    s = S("j1 <= []p0, p0 <= m0 |- j1 <= []m0")
    assert [x.kind for x in s.ant] == ["LabJ", "LabM"]
    assert s.con[0].kind == "PureJ"


def test_own_term_is_wellformedness_error():
    with pytest.raises(WellFormednessError):
        S("j1 <= <>j1 |- j1 <= m0")


def test_syntax_error_reports_position():
    with pytest.raises(ParseError, match="at 17"):
        S("j1 <= p0 |- j1 <=")


def test_print_dia_dia():
    s = Sequent([lab_m(Dia(prop(0)), 0)], [lab_m(Dia(Dia(prop(0))), 0)])
    assert print_sequent(s) == "<>p0 <= m0 |- <><>p0 <= m0"


def test_print_empty_antecedent():
    assert print_sequent(S("|- p0 <= m0")) == "|- p0 <= m0"


@pytest.mark.parametrize(
    "text,loc,pos",
    [
        ("j1 <= p0 |-", "ant:0", PRE),
        ("|- j1 <= p0", "con:0", SUC),
        ("p0 <= m0 |-", "ant:0", SUC),
        ("|- p0 <= m0", "con:0", PRE),
        ("j1 <= []m0 |-", "ant:0", PRE),
        ("|- j1 <= []m0", "con:0", SUC),
        ("<>j1 <= m0 |-", "ant:0", SUC),
        ("|- <>j1 <= m0", "con:0", PRE),
    ],
)
def test_position_table(text, loc, pos):
    assert position_of(S(text), loc) == pos


def test_var_profile_identity():
    prof = var_profile(S("j1 <= p0 |- j1 <= p0"))
    assert prof == {var("j1"): [((ANT, 0), PRE), ((CON, 0), SUC)]}


def test_exact_two_rule_4_conclusion():
    s = S("j1 <= p0, <>p0 <= m0, j3 <= <>j1 |- <>j3 <= m0")
    assert exact_two(s)
    assert sorted(p for _, p in var_profile(s)[var("j3")]) == [PRE, SUC]


def test_exact_two_violation_same_polarity():
    assert not exact_two(S("j1 <= p0, j1 <= q0 |- p0 <= m0"))


def test_rename_simple():
    assert rename(S("j3 <= []p0 |- p0 <= m0"), {var("j3"): var("j1")}) == S("j1 <= []p0 |- p0 <= m0")


def test_rename_swap_pi2_end():
    pi2 = S("j3 <= <#>j1, j1 <= [][]p0, <>p0 <= m0, [#]m0 <= m2 |- j3 <= []m2")
    pi2p = S("j1 <= <#>j3, j3 <= [][]p0, <>p0 <= m0, [#]m0 <= m2 |- j1 <= []m2")
    assert rename(pi2, {var("j3"): var("j1"), var("j1"): var("j3")}) == pi2p


def test_rename_collision():
    with pytest.raises(RenamingError):
        rename(S("j1 <= p0, j3 <= p0 |- j1 <= p0"), {var("j1"): var("j3")})


def test_fresh_supply_parity():
    sup = FreshSupply([var("j1"), var("m0")])
    got = [sup("j"), sup("m"), sup("j"), sup("m")]
    assert [str(v) for v in got] == ["j3", "m2", "j5", "m4"]


def test_parse_loc_forms():
    assert parse_loc("con:1") == (CON, 1)
    assert parse_loc(2) == (ANT, 2)
    assert parse_loc(("ant", 0)) == (ANT, 0)


@settings(max_examples=1000)
@given(sequents)
def test_print_parse_roundtrip(s):
    text = print_sequent(s)
    again = parse_sequent(text)
    assert again == s
    assert print_sequent(again) == text


@given(formulas, st.sampled_from([1, 3]))
def test_rename_is_an_action(f, k):
    s = Sequent([lab_j(k, f)], [lab_m(f, 0)])
    a, b, c = var(f"j{k}"), var("j9"), var("j11")
    assert rename(rename(s, {a: b}), {b: c}) == rename(s, {a: c})


@given(sequents)
def test_alpha_equivalence_of_fresh_renaming(s):
    vs = sorted(s.term_vars(), key=lambda v: (v.kind, v.index))
    sigma = {v: var(f"{v.kind}{v.index + 20}") for v in vs}
    assert alpha_equivalent(s, rename(s, sigma))
