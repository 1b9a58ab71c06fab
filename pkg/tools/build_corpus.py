"""Rebuild the shipped corpus derivations by forward rule application.

Every tree is produced with ``derive`` (so each step passes the rule
checker) and written to ``src/ndml/corpus/<name>.json``.
Run: python3 tools/build_corpus.py
"""

from __future__ import annotations

import sys
from pathlib import Path

from ndml.calculus import CalcConfig
from ndml.proof import Derivation, check_derivation, derive, dumps

OUT = Path(__file__).resolve().parents[1] / "src" / "ndml" / "corpus"


def chain(cfg: CalcConfig, start: Derivation, *steps) -> Derivation:
    """Apply unary steps ``(rule, bindings)`` in order."""
    d = start
    for step in steps:
        rule, b = step if isinstance(step, tuple) else (step, None)
        d = derive(cfg, rule, [d], b)
    return d


def dia_or() -> tuple[Derivation, CalcConfig, str]:
    cfg = CalcConfig.make("")

    def branch(a: str) -> Derivation:
        d = derive(cfg, "Id_jp", [], {"j": "j1", "p": a})
        d = derive(cfg, "Dia_S", [d], {"m": "m0"})
        d = derive(cfg, "Or_S", [d], {"A": "<>p0", "B": "<>q0"})
        d = derive(cfg, "Adj_DiaBb", [d])
        return derive(cfg, "S_Tm", [d], {"m": "m2"})

    d = derive(cfg, "Or_P", [branch("p0"), branch("q0")])
    d = chain(cfg, d, ("S_jT", {"j": "j3"}), "Adj_DiaBb_inv", "Dia_P")
    return d, cfg, "diamond distributes over binary joins"


def dia_bot():
    cfg = CalcConfig.make("")
    d = derive(cfg, "Id_Bot", [], {"m": "m0"})
    d = chain(cfg, d, ("S_jj", {"j": "j1"}), ("BotDia", {"m": "m0"}), "Dia_P")
    return d, cfg, "diamond preserves bottom"


def ax4():
    cfg = CalcConfig.make("4")
    d = derive(cfg, "Id_jp", [], {"j": "j1", "p": "p0"})
    d = chain(
        cfg, d, ("Dia_S", {"m": "m0"}), ("Ax4", {"h": "j3"}), "Adj_DiaBb", ("S_TTm", {"m": "m2"}),
        "Dia_P", ("S_jT", {"j": "j5"}), "Adj_DiaBb_inv", "Dia_P",
    )
    return d, cfg, "axiom (4) from its structural rule"


def axT():
    cfg = CalcConfig.make("T")
    d = derive(cfg, "Id_pm", [], {"p": "p0", "m": "m0"})
    d = chain(cfg, d, ("Box_P", {"j": "j1"}), "AxT", "S_j")
    return d, cfg, "axiom (T) from its structural rule"


def axB():
    cfg = CalcConfig.make("B")
    d = derive(cfg, "Id_jp", [], {"j": "j1", "p": "p0"})
    d = chain(cfg, d, ("Dia_S", {"m": "m0"}), "AxB", "Box_S")
    return d, cfg, "axiom (B) from its structural rule"


def axD():
    cfg = CalcConfig.make("D")
    d = derive(cfg, "Id_pm", [], {"p": "p0", "m": "m0"})
    d = chain(
        cfg, d, ("Box_P", {"j": "j1"}), "Adj_BdBox", ("S_Tj", {"j": "j3"}), ("Dia_S", {"m": "m2"}),
        "AxD", "S_m",
    )
    return d, cfg, "axiom (D) from its structural rule"


def axC():
    cfg = CalcConfig.make("C")
    d = derive(cfg, "Id_pm", [], {"p": "p0", "m": "m0"})
    d = chain(
        cfg, d, ("Box_P", {"j": "j1"}), "Adj_BdBox", ("S_Tj", {"j": "j3"}), ("Dia_S", {"m": "m2"}),
        ("AxC", {"h": "j5"}), "Adj_BdBox_inv", ("S_TTm", {"m": "m4"}), "Dia_P", ("S_jT", {"j": "j7"}),
        "Box_S",
    )
    return d, cfg, "axiom (C) from its structural rule"


def _box_left(cfg, j_outer: str, j_mid: str, m_sw: str) -> Derivation:
    """Left premise shared by the pi derivations: ends in j_outer <= <#>j_mid, ... |- j_outer <= []p0."""
    d = derive(cfg, "Id_pm", [], {"p": "p0", "m": "m0"})
    return chain(
        cfg, d, ("Box_P", {"j": "j1"}), "Box_S", ("S_mm", {"m": m_sw}), ("Box_P", {"j": j_mid}),
        "Adj_BdBox", ("S_Tj", {"j": j_outer}),
    )


def _box_right(cfg, j_cut: str, j_in: str, m_dia: str, m_out: str) -> Derivation:
    d = derive(cfg, "Id_pm", [], {"p": "p0", "m": "m0"})
    return chain(
        cfg, d, ("Box_P", {"j": j_cut}), "Adj_BdBox", ("S_Tj", {"j": j_in}), ("Dia_S", {"m": m_dia}),
        "Adj_DiaBb", ("S_TTm", {"m": m_out}), "Adj_BdBox_inv",
    )


def _box_top(cfg) -> Derivation:
    d = derive(cfg, "Id_pm", [], {"p": "p0", "m": "m0"})
    return chain(cfg, d, ("Box_P", {"j": "j1"}), "Box_S")


def pi1():
    cfg = CalcConfig.make("")
    left = _box_left(cfg, "j1", "j3", "m0")
    right = _box_right(cfg, "j1", "j3", "m2", "m0")
    return derive(cfg, "Cut_j", [left, right]), cfg, "parametric cut on j1 <= []p0, fresh variables reused"


def pi1p():
    cfg = CalcConfig.make("")
    right = _box_right(cfg, "j1", "j3", "m2", "m0")
    d = derive(cfg, "Cut_j", [_box_top(cfg), right])
    d = chain(cfg, d, ("S_Tm", {"m": "m4"}), ("Box_P", {"j": "j3"}), "Adj_BdBox", ("S_jTT", {"j": "j1"}))
    return d, cfg, "the cut of pi1 moved up to the principal introduction"


def pi2():
    cfg = CalcConfig.make("")
    left = _box_left(cfg, "j3", "j1", "m2")
    right = _box_right(cfg, "j3", "j5", "m0", "m2")
    return derive(cfg, "Cut_j", [left, right]), cfg, "parametric cut on j3 <= []p0, fresh variables increasing"


def pi2p():
    cfg = CalcConfig.make("")
    right = _box_right(cfg, "j1", "j3", "m0", "m2")
    d = derive(cfg, "Cut_j", [_box_top(cfg), right])
    d = chain(cfg, d, ("S_Tm", {"m": "m4"}), ("Box_P", {"j": "j3"}), "Adj_BdBox", ("S_jTT", {"j": "j1"}))
    return d, cfg, "pi2 after the cut moved up, right branch renamed"


BUILDERS = {
    "dia_or": dia_or, "dia_bot": dia_bot, "ax4": ax4, "axT": axT, "axB": axB, "axD": axD, "axC": axC,
    "pi1": pi1, "pi1p": pi1p, "pi2": pi2, "pi2p": pi2p,
}


def main() -> int:
    OUT.mkdir(parents=True, exist_ok=True)
    bad = 0
    for name, build in BUILDERS.items():
        d, cfg, desc = build()
        rep = check_derivation(cfg, d)
        status = "ok" if rep.ok else "FAIL"
        print(f"{name:8s} {status:4s} {d.size:3d} nodes  {d.conclusion}")
        for v in rep.violations:
            print("   ", v)
        bad += not rep.ok
        text = dumps(d, name=name, description=desc, sigma=sorted(cfg.sigma), mode=cfg.mode)
        (OUT / f"{name}.json").write_text(text + "\n")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
