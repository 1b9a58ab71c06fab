"""Tour of the package: search, cut elimination, display, ALBA and models.

Run with ``python demos/walkthrough.py`` after installing the package.
"""

from importlib import resources

from ndml.alba import run
from ndml.calculus import INVERTIBLE, CalcConfig
from ndml.proof import check_derivation, config_from_meta, load, prove_with_fallback, render
from ndml.semantics import LatticeModel, chain, countermodel
from ndml.syntax import S
from ndml.transform import canonical_form, cut_eliminate, display


def section(title: str) -> None:
    print(f"\n== {title}")


section("backward search for the (T) axiom sequent")
goal = S("j1 <= []p0 |- j1 <= p0")
d, cfg = prove_with_fallback(CalcConfig.make("T", INVERTIBLE), goal, depth=10)
print(render(d))
print("checks:", check_derivation(cfg, d).ok)

section("cut elimination on a stored derivation with one cut")
pi1, meta = load(resources.files("ndml.corpus") / "pi1.json")
cfg = config_from_meta(meta)
free = cut_eliminate(cfg, pi1)
print(f"{len(pi1.cuts())} cut -> {len(free.cuts())} cuts, {free.size} nodes, checks: {check_derivation(cfg, free).ok}")

section("displaying a structure")
trace = display(cfg, pi1.conclusion, "ant:1")
for inst in trace.steps:
    print(f"  {inst.rule}: {inst.conclusion}")
print("canonical end-sequent:", canonical_form(pi1.conclusion))

section("correspondence for (C)")
print(run("<>[]p0 <= []<>p0").report())

section("a countermodel on the two-element chain")
m = LatticeModel.make(chain(2), [1, 1], [0, 0], "chain2, box constant top")
print(countermodel(m, goal))
