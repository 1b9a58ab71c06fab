import json
from pathlib import Path

import pytest

import ndml.corpus
from ndml.cli import main
from ndml.proof import check_derivation, config_from_meta, load

CORPUS = Path(ndml.corpus.__file__).parent


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_ok(capsys):
    code, out, _ = run(capsys, "check", str(CORPUS / "pi1.json"))
    assert code == 0 and out.startswith("valid:")


def test_check_wrong_sigma_fails(capsys):
    code, out, _ = run(capsys, "--json", "check", str(CORPUS / "axT.json"), "--sigma", "4")
    assert code == 1
    assert json.loads(out)["ok"] is False


def test_check_missing_file(capsys):
    code, _, err = run(capsys, "check", "/nonexistent/x.json")
    assert code == 2 and "no such file" in err


def test_prove_and_write(capsys, tmp_path):
    out_file = tmp_path / "t.json"
    code, out, _ = run(capsys, "prove", "j1 <= []p0 |- j1 <= p0", "--sigma", "T", "--out", str(out_file))
    assert code == 0 and "proved in" in out
    d, meta = load(out_file)
    assert check_derivation(config_from_meta(meta), d).ok


def test_prove_json(capsys):
    code, out, _ = run(capsys, "prove", "j1 <= p0 |- j1 <= p0", "--json")
    payload = json.loads(out)
    assert code == 0 and payload["found"] and payload["derivation"]


def test_prove_unprovable(capsys):
    code, out, _ = run(capsys, "prove", "j1 <= []p0 |- j1 <= p0", "--depth", "4")
    assert code == 1 and "no proof" in out


@pytest.mark.parametrize(
    "argv",
    [
        ["prove", "j1 <= "],
        ["prove", "j1 <= p0 |- j1 <= p0", "--sigma", "X"],
        ["prove", "j1 <= p0 |- j1 <= p0", "--mode", "sideways"],
        ["frobnicate"],
        [],
        ["validate", "j1 <= p0 |- j1 <= p0", "--max-size", "9"],
    ],
)
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_cutelim(capsys, tmp_path):
    out_file = tmp_path / "cf.json"
    code, out, _ = run(capsys, "cutelim", str(CORPUS / "pi2.json"), "--out", str(out_file))
    assert code == 0 and "1 cut(s) eliminated" in out
    d, _ = load(out_file)
    assert d.is_cut_free()


def test_cutelim_invertible_rejected(capsys):
    code, out, _ = run(capsys, "--json", "cutelim", str(CORPUS / "pi1.json"), "--mode", "Invertible")
    assert code == 1


def test_display(capsys):
    code, out, _ = run(capsys, "--json", "display", str(CORPUS / "pi1.json"), "--target", "ant:1")
    payload = json.loads(out)
    assert code == 0 and payload["ok"]
    assert payload["target"].split(":")[0] in ("ant", "con")
    assert "[][]p0" in payload["result"]


def test_display_bad_locator(capsys):
    assert run(capsys, "display", str(CORPUS / "pi1.json"), "--target", "ant:99")[0] == 2


def test_canon(capsys):
    code, out, _ = run(capsys, "canon", "[#]m2 <= m0, j3 <= [][]p0, <>p0 <= m2, j1 <= <#>j3 |- j1 <= []m0")
    assert code == 0
    assert out.strip() == "j1 <= <#>j3, j3 <= [][]p0, <>p0 <= m2, [#]m2 <= m0 |- j1 <= []m0"


def test_canon_not_cyclic(capsys):
    assert run(capsys, "canon", "j1 <= p0, j1 <= q0 |- p0 <= m0")[0] == 1


def test_alba(capsys):
    code, out, _ = run(capsys, "alba", "--json", "<><>p0 <= <>p0")
    payload = json.loads(out)
    assert code == 0 and payload["matches"] == "Ax4"
    assert payload["rule"]["conclusion"] == "Γ, h<=<>j |- <>h<=m, Δ"


def test_alba_blocked(capsys):
    assert run(capsys, "alba", "[]<>p0 <= <>[]p0")[0] == 1


def test_validate_countermodel(capsys):
    code, out, _ = run(capsys, "validate", "j1 <= []p0 |- j1 <= p0")
    assert code == 1 and "countermodel on chain2#" in out


def test_validate_with_sigma(capsys):
    code, out, _ = run(capsys, "--json", "validate", "j1 <= []p0 |- j1 <= p0", "--sigma", "T", "--models", "10")
    payload = json.loads(out)
    assert code == 0 and payload["valid"] and payload["checked"] > 0


def test_seed_changes_models(capsys, monkeypatch):
    monkeypatch.setenv("NDML_SEED", "7")
    a = run(capsys, "--json", "validate", "j1 <= p0 |- j1 <= p0", "--models", "5")
    assert a[0] == 0
    monkeypatch.setenv("NDML_SEED", "seven")
    assert run(capsys, "validate", "j1 <= p0 |- j1 <= p0")[0] == 2


def test_corpus(capsys):
    code, out, _ = run(capsys, "--json", "corpus", "--models", "5")
    payload = json.loads(out)
    assert code == 0 and payload["ok"]
    assert len(payload["entries"]) == 11


def test_corpus_bad_dir(capsys):
    assert run(capsys, "corpus", "/nonexistent")[0] == 2
