import pytest
from hypothesis import given, settings

from ndml.calculus import (
    ADJUNCTIONS,
    INVERSE,
    INVERTIBLE,
    INVERTIBLE_SWITCHES,
    RULES,
    CalcConfig,
    DisplayViolation,
    FreshnessViolation,
    SigmaDisabled,
    apply,
    backward,
    check_instance,
    forward_instances,
    match_instance,
)
from ndml.syntax import S, alpha_equivalent, exact_two
from strategies import cycles

CFG = CalcConfig.make()


def test_rule_table_covers_names():
    names = (
        "Id_jp Id_pm Id_Bot Id_Top Bot_j Bot_m Top_m Top_j Cut_j Cut_m S_m S_j S_mm S_jj S_mT S_jT S_Tm S_Tj "
        "S_TTm S_jTT Adj_DiaBb Adj_DiaBb_inv Adj_BdBox Adj_BdBox_inv TopBox BotDia And_P And_S Or_P Or_S "
        "Box_P Box_S Dia_P Dia_S Ax4 AxT AxB AxD AxC And_P_inv Or_S_inv Box_P_inv Dia_S_inv"
    ).split()
    assert set(names) <= set(RULES)
    assert RULES["Cut_j"].arity == 2 and RULES["Id_jp"].arity == 0 and RULES["Box_P"].arity == 1


def test_box_p_forward():
    inst = apply(CFG, "Box_P", [S("p0 <= m0 |- p0 <= m0")], {"A": "p0", "m": "m0", "j": "j1"})
    assert inst.conclusion == S("j1 <= []p0, p0 <= m0 |- j1 <= []m0")


def test_s_j_forward():
    inst = apply(CalcConfig.make("T"), "S_j", [S("j1 <= []p0, p0 <= m0 |- j1 <= m0")], {"A": "p0", "j": "j1", "m": "m0"})
    assert inst.conclusion == S("j1 <= []p0 |- j1 <= p0")


def test_box_s_freshness():
    with pytest.raises(FreshnessViolation, match="m0"):
        apply(CFG, "Box_S", [S("p0 <= m0 |- j1 <= []m0, <>p0 <= m0")])


def test_ax4_forward_and_sigma_gate():
    prem = S("j1 <= p0, <>p0 <= m0 |- <>j1 <= m0")
    inst = apply(CalcConfig.make("4"), "Ax4", [prem], {"h": "j3"})
    assert inst.conclusion.multiset_eq(S("j1 <= p0, <>p0 <= m0, j3 <= <>j1 |- <>j3 <= m0"))
    with pytest.raises(SigmaDisabled):
        apply(CFG, "Ax4", [prem], {"h": "j3"})


def test_backward_t():
    out = [(r, [str(p) for p in ps]) for r, ps, _ in backward(CalcConfig.make("T"), S("j1 <= []p0 |- j1 <= p0"))]
    assert ("S_j", ["j1 <= []p0, p0 <= m0 |- j1 <= m0"]) in out


def test_backward_empty_goal():
    assert backward(CFG, S("|-")) == []


def test_backward_and_p():
    out = [(r, [str(p) for p in ps]) for r, ps, _ in backward(CFG, S("j1 <= p0&q0 |- j1 <= p0"))]
    assert ("And_P", ["j1 <= p0 |- j1 <= p0"]) in out


def test_cut_display_violation():
    # j1 also occurs under a diamond, so j1 <= p0 is not in display
    left = S("|- j1 <= p0, j3 <= <>j1")
    with pytest.raises(DisplayViolation):
        apply(CFG, "Cut_j", [left, S("j1 <= p0 |- j1 <= p0")], hints=[[("con", 0)], [("ant", 0)]])


def test_switch_freshness_in_context():
    # S_mm must not reuse a conominal of the context
    prem = S("j1 <= p0, p0 <= m0 |- j1 <= p0")
    for inst in forward_instances(CFG, "S_mm", [prem]):
        assert inst.bindings["m"] != S("|- p0 <= m0").con[0].label


def test_apply_roundtrip_check_instance():
    inst = apply(CFG, "Box_P", [S("p0 <= m0 |- p0 <= m0")], {"A": "p0", "m": "m0", "j": "j1"})
    assert check_instance(CFG, inst) == []


def test_invertible_mode_swaps_logical_rules():
    inv = CalcConfig.make("", INVERTIBLE)
    with pytest.raises(Exception, match="not part"):
        apply(inv, "Box_P", [S("p0 <= m0 |- p0 <= m0")])


def test_s_ttm_then_s_jtt():
    s = S("j1 <= <#>j3, j3 <= []m0 |- j1 <= []m0")
    for inst in forward_instances(CFG, "S_TTm", [s]):
        back = next(forward_instances(CFG, "S_jTT", [inst.conclusion], hints=[inst.nonparametric()["conclusion"]]))
        assert alpha_equivalent(back.conclusion, s)


def _roundtrips(s):
    n = 0
    for rule in ADJUNCTIONS + INVERTIBLE_SWITCHES:
        for inst in forward_instances(CFG, rule, [s]):
            hints = [inst.nonparametric()["conclusion"]]
            back = [b.conclusion for b in forward_instances(CFG, INVERSE[rule], [inst.conclusion], hints=hints)]
            assert any(alpha_equivalent(b, s) for b in back), (rule, str(s), str(inst.conclusion))
            assert exact_two(inst.conclusion)
            # the inverse instance also matches as an explicit instance
            match_instance(CFG, INVERSE[rule], [inst.conclusion], back[0])
            n += 1
    return n


@settings(max_examples=300, deadline=None)
@given(cycles())
def test_step_inverse_roundtrip(s):
    _roundtrips(s)


@settings(max_examples=200, deadline=None)
@given(cycles())
def test_backward_complete_for_forward(s):
    for rule in INVERTIBLE_SWITCHES:
        for inst in forward_instances(CFG, rule, [s]):
            found = backward(CFG, inst.conclusion, [rule])
            assert any(alpha_equivalent(ps[0], s) for _, ps, _ in found)
