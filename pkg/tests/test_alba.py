import pytest

from ndml.alba import (
    AXIOMS,
    TABLE_RULE,
    AckermannBlocked,
    OutOfFragment,
    approximate,
    eliminate,
    matches_rule,
    rule_texts,
    run,
    same_rule,
    table_rule,
)
from ndml.calculus import RULES, CalcConfig, backward
from ndml.semantics import enumerate_models, quasi_valid
from ndml.syntax import S

GOLDEN = {
    "T": ("Aj1 Am0. j1 <= []m0 => j1 <= m0", ("Γ |- j<=[]m, Δ", "Γ |- j<=m, Δ"), ()),
    "4": ("Aj1 Am0. <>j1 <= m0 => <><>j1 <= m0", ("Γ |- <>j<=m, Δ", "Γ, h<=<>j |- <>h<=m, Δ"), ()),
    "B": ("Aj1 Am0. <>j1 <= m0 => j1 <= []m0", ("Γ |- <>j<=m, Δ", "Γ |- j<=[]m, Δ"), ()),
    "D": ("Aj1 Am0. <><#>j1 <= m0 => j1 <= m0", ("Γ, k<=<#>j |- <>k<=m, Δ", "Γ |- j<=m, Δ"), ("j3",)),
    "C": ("Aj1 Am0. <><#>j1 <= m0 => <#><>j1 <= m0", ("Γ, k<=<#>j |- <>k<=m, Δ", "Γ, h<=<>j |- <#>h<=m, Δ"), ("j5",)),
}


def test_first_approximation_T():
    q = approximate(AXIOMS["T"])
    assert str(q) == "Ap0 Aj1 Am0. (j1 <= []p0 & p0 <= m0) => j1 <= m0"


@pytest.mark.parametrize("ax", sorted(AXIOMS))
def test_eliminated_form(ax):
    assert str(eliminate(approximate(AXIOMS[ax]))) == GOLDEN[ax][0]


@pytest.mark.parametrize("ax", sorted(AXIOMS))
def test_rule_golden(ax):
    c = run(AXIOMS[ax])
    assert c.rule.schema() == GOLDEN[ax][1]
    assert tuple(map(str, c.rule.eigenvariables)) == GOLDEN[ax][2]
    assert not any(v.is_prop for _, v in c.correspondent.prefix)


@pytest.mark.parametrize("ax", sorted(AXIOMS))
def test_rule_matches_calculus(ax):
    c = run(AXIOMS[ax])
    assert matches_rule(c.rule, RULES[TABLE_RULE[ax]])
    assert table_rule(c.rule) == TABLE_RULE[ax]


def test_same_rule_up_to_renaming():
    a = ("Γ, k<=<#>j |- <>k<=m, Δ", "Γ |- j<=m, Δ")
    b = ("Γ, h<=<#>i |- <>h<=n, Δ", "Γ |- i<=n, Δ")
    assert same_rule(a, b, ["k"], ["h"])
    assert not same_rule(a, b, ["k"], ["i"])
    assert not same_rule(a, ("Γ |- <>j<=m, Δ", "Γ |- j<=m, Δ"))
    assert rule_texts(RULES["AxT"]) == (" |- j<=[]m", " |- j<=m")


def test_blocked_and_out_of_fragment():
    with pytest.raises(AckermannBlocked):
        run("[]<>p0 <= <>[]p0")
    with pytest.raises(OutOfFragment):
        run("p0 & q0 <= p0")
    with pytest.raises(OutOfFragment):
        run("[]p0 <= <>q0")
    with pytest.raises(OutOfFragment):
        run("p0")


def test_variant_not_in_table():
    c = run("[][]p0 <= []p0")
    assert table_rule(c.rule) is None
    assert len(c.rule.eigenvariables) == 1


@pytest.mark.parametrize("ax", sorted(AXIOMS))
def test_chain_steps_equivalent(ax):
    # every step of the chain is equivalent on finite models
    c = run(AXIOMS[ax])
    models = list(enumerate_models(5, 0, 30))
    for m in models:
        vals = {quasi_valid(m, s.q) for s in c.chain}
        assert len(vals) == 1, m.name


def test_installed_rule_acts_like_table_rule():
    c = run(AXIOMS["D"])
    c.rule.install("AxD_emitted", "D")
    try:
        cfg = CalcConfig.make("D")
        g = S("j1 <= p0 |- j1 <= m0")
        [(_, ours, _)] = backward(cfg, g, ["AxD_emitted"])
        [(_, theirs, _)] = backward(cfg, g, ["AxD"])
        assert ours[0].multiset_eq(theirs[0])
    finally:
        del RULES["AxD_emitted"]
