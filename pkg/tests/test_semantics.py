import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CORPUS_NAMES, corpus_entry
from ndml.alba import AXIOMS, run
from ndml.semantics import (
    LatticeModel,
    ModelError,
    adjoints,
    boolean4,
    chain,
    countermodel,
    enumerate_models,
    fixed_family,
    irreducibles,
    load_model,
    m3,
    n5,
    quasi_valid,
    satisfies,
    satisfies_axiom,
    save_model,
    sequent_valid,
)
from ndml.syntax import S, var

MODELS = list(enumerate_models(6, 0, 100))


def test_chain_identity_operators():
    m = LatticeModel.make(chain(2), [0, 1], [0, 1])
    assert adjoints(m) == ((0, 1), (0, 1))
    assert irreducibles(m) == (frozenset({1}), frozenset({0}))


def test_boolean4_irreducibles():
    m = LatticeModel.make(boolean4(), [0, 1, 2, 3], [0, 1, 2, 3])
    assert irreducibles(m) == (frozenset({1, 2}), frozenset({1, 2}))
    assert m.is_distributive()


def test_m3_constant_operators():
    m = LatticeModel.make(m3(), [4] * 5, [0] * 5)
    assert adjoints(m) == ((0,) * 5, (4,) * 5)
    assert not m.is_distributive()


def test_n5_not_distributive():
    leq = n5()
    m = LatticeModel.make(leq, list(range(len(leq))), list(range(len(leq))))
    assert not m.is_distributive()


@pytest.mark.parametrize(
    "box,dia,msg",
    [([0, 0], [0, 1], "top"), ([0, 1], [1, 1], "bottom"), ([0], [0], "length")],
)
def test_invalid_operators_rejected(box, dia, msg):
    with pytest.raises(ModelError, match=msg):
        LatticeModel.make(chain(2), box, dia)


def test_invalid_order_rejected():
    with pytest.raises(ModelError):
        LatticeModel.make([[True, True], [True, True]], [0, 1], [0, 1])


def test_countermodel_for_reflexivity():
    s = S("j1 <= []p0 |- j1 <= p0")
    bad = LatticeModel.make(chain(2), [1, 1], [0, 0])
    cm = countermodel(bad, s)
    assert cm == {var("j1"): 1, var("p0"): 0}
    assert not satisfies_axiom(bad, "T")
    good = LatticeModel.make(chain(2), [0, 1], [0, 1])
    assert sequent_valid(good, s)


def test_enumeration_deterministic():
    again = list(enumerate_models(6, 0, 100))
    assert [x.to_json() for x in again] == [x.to_json() for x in MODELS]
    assert len(MODELS) == 339 and MODELS[0].name == "chain2#0"
    other = list(enumerate_models(6, 1, 100))
    assert [x.to_json() for x in other] != [x.to_json() for x in MODELS]


def test_enumeration_size_cap():
    with pytest.raises(ValueError):
        next(enumerate_models(8))
    assert all(m.size <= 4 for m in enumerate_models(4, 0, 20))


def test_fixed_family_valid():
    for m in fixed_family():
        m.validate()


def test_json_roundtrip(tmp_path):
    for m in MODELS[::37]:
        p = tmp_path / "m.json"
        save_model(m, p)
        assert load_model(p) == m


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(MODELS), st.data())
def test_adjunction_laws(m, data):
    r = range(m.size)
    u, v = data.draw(st.sampled_from(r)), data.draw(st.sampled_from(r))
    assert m.leq[m.bdia[u]][v] == m.leq[u][m.box[v]]
    assert m.leq[m.dia[v]][u] == m.leq[v][m.bbox[u]]


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(MODELS))
def test_irreducibles_generate(m):
    # every element is a join of join-irreducibles and a meet of meet-irreducibles
    for x in range(m.size):
        assert m.join_all(j for j in m.jinf if m.leq[j][x]) == x
        assert m.meet_all(n for n in m.minf if m.leq[x][n]) == x


@pytest.mark.parametrize("name", CORPUS_NAMES)
def test_corpus_sound(name):
    d, cfg = corpus_entry(name)
    for m in MODELS[:120]:
        if satisfies(m, cfg.sigma):
            assert sequent_valid(m, d.conclusion), m.name


@pytest.mark.parametrize("ax", ["T", "4", "B", "D", "C"])
def test_quasi_valid_matches_axiom(ax):
    c = run(AXIOMS[ax])
    for m in MODELS[:80]:
        assert quasi_valid(m, c.correspondent) == satisfies_axiom(m, ax), m.name


def test_quasi_valid_rejects_bad_prefix():
    class Q:
        prefix = [("sometimes", var("j1"))]
        body = None

    with pytest.raises(ValueError):
        quasi_valid(MODELS[0], Q())
