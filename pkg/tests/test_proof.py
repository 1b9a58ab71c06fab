import pytest

from conftest import CORPUS_NAMES, corpus_entry
from ndml.calculus import INVERTIBLE, CalcConfig
from ndml.proof import (
    J_LABELLED,
    M_LABELLED,
    Derivation,
    check_derivation,
    classify_label,
    congruence,
    derive,
    dumps,
    from_json,
    leaf,
    lint_single_conclusion,
    prove,
    prove_with_fallback,
    to_json,
)
from ndml.syntax import S, alpha_equivalent, exact_two, var


@pytest.mark.parametrize("name", CORPUS_NAMES)
def test_corpus_checks(name):
    d, cfg = corpus_entry(name)
    rep = check_derivation(cfg, d)
    assert rep.ok, rep.violations


def test_t_derivation_has_four_nodes():
    d, cfg = corpus_entry("axT")
    assert d.size == 4 and check_derivation(cfg, d).ok


def test_json_roundtrip(corpus):
    for d, _ in corpus.values():
        assert to_json(from_json(to_json(d))) == to_json(d)


def test_cut_display_violation_at_cut_node(corpus):
    pi1, cfg = corpus["pi1"]
    left = pi1.at((0, 0, 0, 0, 0))  # j1 <= []p0 |- j1 <= []p0
    right = pi1.at((1, 0, 0, 0, 0, 0))  # j1 <= []p0, p0 <= m0 |- <#>j1 <= m0
    bad = Derivation(
        "Cut_j",
        S("j1 <= []p0, p0 <= m0 |- <#>j1 <= m0"),
        (left, right),
        {},
        {"conclusion": [], "premises": [["con:0"], ["ant:0"]]},
    )
    rep = check_derivation(cfg, bad)
    assert not rep.ok
    assert any(v.condition == "DisplayViolation" and v.path == () for v in rep.violations)


def test_congruence_parameter_edge():
    d, cfg = corpus_entry("axT")
    f = congruence(d, cfg)
    # p0 <= m0 in the Id_pm leaf and in the Box_P conclusion
    leafpath = next(p for p, n in d.walk() if n.rule == "Id_pm")
    boxpath = next(p for p, n in d.walk() if n.rule == "Box_P")
    assert f.related((leafpath, "ant", 0), (boxpath, "ant", 1))


def test_congruence_switch_edge(corpus):
    pi1, cfg = corpus["pi1"]
    f = congruence(pi1, cfg)
    assert f.related(((0, 0, 0, 0, 0), "con", 0), ((0, 0, 0, 0), "ant", 0))


def test_single_axiom_classes():
    d = leaf(CalcConfig.make(), "Id_pm", {"p": "p0", "m": "m0"})
    f = congruence(d)
    assert len(f.classes()) == 2


def test_classify_label_examples(corpus):
    pi1, cfg = corpus["pi1"]
    assert classify_label(pi1, ((0,), "con", 0), cfg) == J_LABELLED
    assert classify_label(pi1, ((1,), "ant", 0), cfg) == J_LABELLED
    d, cfg = corpus_entry("axT")
    assert classify_label(d, ((), "con", 0), cfg) == M_LABELLED


def test_single_conclusion_lint(corpus):
    for name, (d, cfg) in corpus.items():
        assert lint_single_conclusion(d) is None, name
    two = derive(CalcConfig.make(), "Id_pm", [], {"p": "p0", "m": "m0"})
    injected = Derivation("Id_pm", S("p0 <= m0 |- p0 <= m0, j1 <= q0"), (), two.bindings)
    assert lint_single_conclusion(injected) is not None


def test_exact_two_everywhere(corpus):
    for d, _ in corpus.values():
        for _, n in d.walk():
            assert exact_two(n.conclusion)


def test_rename_preserves_validity(corpus):
    d, cfg = corpus["pi2"]
    r = d.rename({var("j5"): var("j9"), var("m0"): var("m8")})
    assert check_derivation(cfg, r).ok
    assert alpha_equivalent(r.conclusion, d.conclusion)


def test_prove_and_p():
    d = prove(CalcConfig.make(), S("j1 <= p0&q0 |- j1 <= p0"), depth=4)
    assert d is not None and d.rule == "And_P"


def test_prove_fails_on_invalid():
    assert prove(CalcConfig.make(), S("j1 <= p0 |- j1 <= q0"), depth=6) is None


def test_prove_output_checks():
    cfg = CalcConfig.make("T", INVERTIBLE)
    d = prove(cfg, S("j1 <= []p0 |- j1 <= p0"), depth=8)
    assert d is not None and check_derivation(cfg, d).ok


def test_fallback_reports_relaxed_config():
    cfg = CalcConfig.make("C", INVERTIBLE)
    d, used = prove_with_fallback(cfg, S("j1 <= <>[]p0 |- j1 <= []<>p0"), depth=14, timeout=30)
    assert d is not None and used.relaxed_switch
    assert check_derivation(used, d).ok


def test_dumps_loads(tmp_path, corpus):
    d, cfg = corpus["ax4"]
    p = tmp_path / "x.json"
    p.write_text(dumps(d, sigma=sorted(cfg.sigma), mode=cfg.mode))
    from ndml.proof import load

    d2, meta = load(p)
    assert meta["sigma"] == ["4"] and to_json(d2) == to_json(d)
