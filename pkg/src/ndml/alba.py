"""A small ALBA engine for one-variable modal inequalities.

It handles inequalities ``D(chi) <= B(psi)`` where ``D`` is a chain of
diamonds, ``B`` a chain of boxes, and ``chi``/``psi`` reduce to the single
proposition variable through boxes (resp. diamonds). The five axioms T, 4,
B, D, C and their same-shape variants fall in this class.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from .calculus import RULES, SP, RuleDef, install_rule
from .syntax import (
    CONOM,
    NOM,
    And,
    Atom,
    Bot,
    Box,
    Dia,
    Formula,
    Or,
    Structure,
    Term,
    Top,
    Var,
    fresh_var,
    parse_formula,
)


class OutOfFragment(ValueError):
    pass


class AckermannBlocked(ValueError):
    pass


class UnsupportedShape(ValueError):
    pass


FORALL, EXISTS = "forall", "exists"

# ------------------------------------------------------------ L+ expressions


@dataclass(frozen=True)
class Expr:
    def vars(self) -> set[Var]:
        raise NotImplementedError

    def value(self, m, env: Mapping[Var, int]) -> int:
        raise NotImplementedError

    def subst(self, v: Var, e: "Expr") -> "Expr":
        raise NotImplementedError


@dataclass(frozen=True)
class V(Expr):
    var: Var

    def vars(self):
        return {self.var}

    def value(self, m, env):
        return env[self.var]

    def subst(self, v, e):
        return e if v == self.var else self

    def __str__(self):
        return str(self.var)


@dataclass(frozen=True)
class K(Expr):
    """Constant: "T" or "F"."""

    name: str

    def vars(self):
        return set()

    def value(self, m, env):
        return m.top if self.name == "T" else m.bot

    def subst(self, v, e):
        return self

    def __str__(self):
        return self.name


_UNARY = {"[]": "box", "<>": "dia", "[#]": "bbox", "<#>": "bdia"}


@dataclass(frozen=True)
class U(Expr):
    op: str
    arg: Expr

    def vars(self):
        return self.arg.vars()

    def value(self, m, env):
        return getattr(m, _UNARY[self.op])[self.arg.value(m, env)]

    def subst(self, v, e):
        return U(self.op, self.arg.subst(v, e))

    def __str__(self):
        inner = str(self.arg)
        return f"{self.op}({inner})" if isinstance(self.arg, Bn) else f"{self.op}{inner}"


@dataclass(frozen=True)
class Bn(Expr):
    op: str  # "&" or "|"
    left: Expr
    right: Expr

    def vars(self):
        return self.left.vars() | self.right.vars()

    def value(self, m, env):
        a, b = self.left.value(m, env), self.right.value(m, env)
        return m.meet[a][b] if self.op == "&" else m.join[a][b]

    def subst(self, v, e):
        return Bn(self.op, self.left.subst(v, e), self.right.subst(v, e))

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


def from_formula(f: Formula) -> Expr:
    if isinstance(f, Atom):
        return V(f.var)
    if isinstance(f, Top):
        return K("T")
    if isinstance(f, Bot):
        return K("F")
    if isinstance(f, Box):
        return U("[]", from_formula(f.arg))
    if isinstance(f, Dia):
        return U("<>", from_formula(f.arg))
    if isinstance(f, And):
        return Bn("&", from_formula(f.left), from_formula(f.right))
    if isinstance(f, Or):
        return Bn("|", from_formula(f.left), from_formula(f.right))
    raise TypeError(f"not a formula: {f!r}")


def depth(e: Expr) -> int:
    return 1 + depth(e.arg) if isinstance(e, U) else 0


# ---------------------------------------------------------- quasi-inequalities


@dataclass(frozen=True)
class Ineq:
    lhs: Expr
    rhs: Expr

    def vars(self) -> set[Var]:
        return self.lhs.vars() | self.rhs.vars()

    def holds(self, m, env) -> bool:
        return m.leq[self.lhs.value(m, env)][self.rhs.value(m, env)]

    def subst(self, v: Var, e: Expr) -> "Ineq":
        return Ineq(self.lhs.subst(v, e), self.rhs.subst(v, e))

    def __str__(self):
        return f"{self.lhs} <= {self.rhs}"


@dataclass(frozen=True)
class Implies:
    hyps: tuple  # of Ineq | Implies
    concl: object  # Ineq | Implies

    def vars(self) -> set[Var]:
        out = set(self.concl.vars())
        for h in self.hyps:
            out |= h.vars()
        return out

    def holds(self, m, env) -> bool:
        return not all(h.holds(m, env) for h in self.hyps) or self.concl.holds(m, env)

    def subst(self, v: Var, e: Expr) -> "Implies":
        return Implies(tuple(h.subst(v, e) for h in self.hyps), self.concl.subst(v, e))

    def __str__(self):
        hs = " & ".join(str(h) if isinstance(h, Ineq) else f"({h})" for h in self.hyps)
        if len(self.hyps) > 1:
            hs = f"({hs})"
        c = str(self.concl) if isinstance(self.concl, Ineq) else f"({self.concl})"
        return f"{hs} => {c}"


@dataclass(frozen=True)
class QuasiInequality:
    prefix: tuple  # of (quantifier, Var)
    body: object  # Ineq | Implies

    def __post_init__(self):
        bound = {v for _, v in self.prefix}
        free = self.body.vars() - bound
        if free:
            raise ValueError(f"free variables {sorted(map(str, free))}")

    def holds(self, m, env) -> bool:
        return self.body.holds(m, env)

    def __str__(self):
        pre = " ".join(f"{'A' if q == FORALL else 'E'}{v}" for q, v in self.prefix)
        return f"{pre}. {self.body}" if pre else str(self.body)

    def pretty(self) -> str:
        text = str(self)
        text = re.sub(r"\bA([pqrsjm]\d+)", r"∀\1", text)
        text = re.sub(r"\bE([pqrsjm]\d+)", r"∃\1", text)
        for a, b in (("[#]", "■"), ("<#>", "◆"), ("[]", "□"), ("<>", "◇"), ("<=", "≤"), ("=>", "⇒")):
            text = text.replace(a, b)
        return text


@dataclass(frozen=True)
class Step:
    name: str
    q: QuasiInequality

    def __str__(self):
        return f"{self.q}    [{self.name}]" if self.name else str(self.q)


def parse_inequality(text: str) -> tuple[Formula, Formula]:
    """``"<formula> <= <formula>"`` (``|-`` is accepted as separator too)."""
    parts = re.split(r"<=|≤|\|-|⊢", text)
    if len(parts) != 2:
        raise OutOfFragment(f"expected exactly one inequality in {text!r}")
    return parse_formula(parts[0]), parse_formula(parts[1])


# --------------------------------------------------------------- the engine


def _peel(e: Expr, op: str) -> tuple[int, Expr]:
    k = 0
    while isinstance(e, U) and e.op == op:
        k, e = k + 1, e.arg
    return k, e


def _wrap(e: Expr, op: str, k: int) -> Expr:
    for _ in range(k):
        e = U(op, e)
    return e


def _check_fragment(f: Formula) -> None:
    for g in f.subformulas():
        if not isinstance(g, (Atom, Box, Dia)):
            raise OutOfFragment(f"connective {type(g).__name__} is outside the supported fragment")


def approximate(lhs: Formula | str, rhs: Formula | None = None) -> QuasiInequality:
    """First approximation by join- and meet-generation."""
    if isinstance(lhs, str):
        lhs, rhs = parse_inequality(lhs)
    _check_fragment(lhs)
    _check_fragment(rhs)
    props = sorted(lhs.vars() | rhs.vars())
    if len(props) != 1:
        raise OutOfFragment("exactly one proposition variable is supported")
    used = set(props)
    j = fresh_var(NOM, used)
    m = fresh_var(CONOM, used)
    a, chi = _peel(from_formula(lhs), "<>")
    b, psi = _peel(from_formula(rhs), "[]")
    body = Implies((Ineq(V(j), chi), Ineq(psi, V(m))), Ineq(_wrap(V(j), "<>", a), _wrap(V(m), "[]", b)))
    return QuasiInequality(((FORALL, props[0]), (FORALL, j), (FORALL, m)), body)


def _flat_conclusion(c: Ineq) -> tuple[Ineq, bool]:
    """Move a box off the right (or a diamond off the left) by adjunction when
    neither side is a bare variable."""
    changed = False
    while not isinstance(c.lhs, V) and not isinstance(c.rhs, V):
        if isinstance(c.rhs, U) and c.rhs.op == "[]":
            c = Ineq(U("<#>", c.lhs), c.rhs.arg)
        elif isinstance(c.lhs, U) and c.lhs.op == "<>":
            c = Ineq(c.lhs.arg, U("[#]", c.rhs))
        else:
            raise AckermannBlocked(f"cannot flatten {c}")
        changed = True
    return c, changed


def eliminate_chain(q: QuasiInequality) -> list[Step]:
    """Adjunction (when needed) and Ackermann steps eliminating the proposition."""
    body = q.body
    if not (isinstance(body, Implies) and len(body.hyps) == 2 and isinstance(body.concl, Ineq)):
        raise AckermannBlocked("input is not in approximated form")
    (jl, ml), concl = body.hyps, body.concl
    props = [v for _, v in q.prefix if v.is_prop]
    if len(props) != 1:
        raise AckermannBlocked("exactly one proposition variable expected")
    p = props[0]
    rest = tuple(x for x in q.prefix if x[1] != p)
    steps: list[Step] = []
    alpha, chi = jl.lhs, jl.rhs
    psi, beta = ml.lhs, ml.rhs
    side = None
    if chi == V(p):
        side = "min"
    elif psi == V(p):
        side = "max"
    else:
        k, core = _peel(chi, "[]")
        if core == V(p) and k:
            alpha, chi, side = _wrap(alpha, "<#>", k), core, "min"
        else:
            k, core = _peel(psi, "<>")
            if core == V(p) and k:
                beta, psi, side = _wrap(beta, "[#]", k), core, "max"
        if side is None:
            raise AckermannBlocked("the proposition cannot be isolated by adjunction")
        concl, _ = _flat_conclusion(concl)
        mid = Implies((Ineq(alpha, chi), Ineq(psi, beta)), concl)
        steps.append(Step("adjunction", QuasiInequality(q.prefix, mid)))
    if side == "min":
        if p in alpha.vars():
            raise AckermannBlocked("minimal valuation mentions the proposition")
        remaining = Ineq(psi.subst(p, alpha), beta)
    else:
        if p in beta.vars():
            raise AckermannBlocked("maximal valuation mentions the proposition")
        remaining = Ineq(alpha, chi.subst(p, beta))
    if p in concl.vars():
        raise AckermannBlocked("the conclusion still mentions the proposition")
    steps.append(Step("Ackermann's lemma", QuasiInequality(rest, Implies((remaining,), concl))))
    return steps


def eliminate(q: QuasiInequality) -> QuasiInequality:
    return eliminate_chain(q)[-1].q


def _split(ineq: Ineq, used: set, hyp: bool) -> tuple[list, object]:
    """Break a depth-2 term next to a bare variable into two flat inequalities.

    Returns (new prefix entries, replacement). In hypothesis position the new
    variable is existential, otherwise universal.
    """
    quant = EXISTS if hyp else FORALL
    lhs, rhs = ineq.lhs, ineq.rhs
    if isinstance(rhs, V) and depth(lhs) >= 2:
        # o1 o2 x <= m  iff  forall k (k <= o2 x => o1 k <= m)
        inner = lhs.arg
        kind = NOM if next(iter(inner.vars())).kind == NOM else CONOM
        k = fresh_var(kind, used)
        used.add(k)
        pre, sub = _split(Ineq(U(lhs.op, V(k)), rhs), used, hyp)
        return [(quant, k)] + pre, Implies((Ineq(V(k), inner),), sub)
    if isinstance(lhs, V) and depth(rhs) >= 2:
        # j <= o1 o2 x  iff  forall n (o2 x <= n => j <= o1 n)
        inner = rhs.arg
        kind = CONOM if next(iter(inner.vars())).kind == CONOM else NOM
        n = fresh_var(kind, used)
        used.add(n)
        pre, sub = _split(Ineq(lhs, U(rhs.op, V(n))), used, hyp)
        return [(quant, n)] + pre, Implies((Ineq(inner, V(n)),), sub)
    return [], ineq


def flatten(q: QuasiInequality) -> QuasiInequality:
    """Join- and meet-generation until every inequality is a structure."""
    body = q.body
    if not (isinstance(body, Implies) and len(body.hyps) == 1):
        raise UnsupportedShape("expected a single-hypothesis implication")
    used = {v for _, v in q.prefix}
    concl, _ = _flat_conclusion(body.concl)
    pre_c, new_c = _split(concl, used, hyp=False)
    pre_h, new_h = _split(body.hyps[0], used, hyp=True)
    prefix = tuple(q.prefix) + tuple(pre_c) + tuple(pre_h)
    return QuasiInequality(prefix, Implies((new_h,), new_c))


# ------------------------------------------------------------------- rules


def _term(e: Expr) -> Term:
    if isinstance(e, V) and not e.var.is_prop:
        return Term("", e.var)
    if isinstance(e, U) and isinstance(e.arg, V) and not e.arg.var.is_prop:
        try:
            return Term(e.op, e.arg.var)
        except ValueError as err:
            raise UnsupportedShape(str(err)) from err
    raise UnsupportedShape(f"{e} is not a term of depth at most one")


def _structure(i: Ineq) -> Structure:
    try:
        return Structure(_term(i.lhs), _term(i.rhs))
    except ValueError as err:
        raise UnsupportedShape(str(err)) from err


def _sides(x) -> tuple[tuple[Structure, ...], tuple[Structure, ...]]:
    if isinstance(x, Ineq):
        return (), (_structure(x),)
    if isinstance(x, Implies) and isinstance(x.concl, Ineq) and all(isinstance(h, Ineq) for h in x.hyps):
        return tuple(_structure(h) for h in x.hyps), (_structure(x.concl),)
    raise UnsupportedShape(f"cannot read {x} as a sequent")


@dataclass(frozen=True)
class StructuralRule:
    """One-premise rule ``Γ, pa ⊢ pc, Δ / Γ, ca ⊢ cc, Δ``."""

    premise_ant: tuple[Structure, ...]
    premise_con: tuple[Structure, ...]
    conclusion_ant: tuple[Structure, ...]
    conclusion_con: tuple[Structure, ...]
    eigenvariables: tuple[Var, ...] = ()

    def vars(self) -> set[Var]:
        out: set[Var] = set()
        for st in self.premise_ant + self.premise_con + self.conclusion_ant + self.conclusion_con:
            out |= st.vars()
        return out

    def letters(self) -> dict[Var, str]:
        """Schema letters: eigenvariables get k, other nominals j, h, i in
        order of appearance, conominals m, n."""
        out: dict[Var, str] = {}
        noms, conoms = iter(("j", "h", "i")), iter(("m", "n"))
        for v in self.eigenvariables:
            out[v] = "k"
        seq = self.premise_ant + self.premise_con + self.conclusion_ant + self.conclusion_con
        for st in seq:
            for v in sorted(st.vars(), key=lambda x: (x.kind, x.index)):
                if v not in out:
                    out[v] = next(noms) if v.kind == NOM else next(conoms)
        return out

    def schema(self) -> tuple[str, str]:
        names = self.letters()

        def side(x) -> str:
            if isinstance(x, Term):
                return f"{x.op}{names[x.var]}"
            raise UnsupportedShape(str(x))

        def seq(ant, con) -> str:
            a = ", ".join(["Γ"] + [f"{side(s.lhs)}<={side(s.rhs)}" for s in ant])
            c = ", ".join([f"{side(s.lhs)}<={side(s.rhs)}" for s in con] + ["Δ"])
            return f"{a} |- {c}"

        return seq(self.premise_ant, self.premise_con), seq(self.conclusion_ant, self.conclusion_con)

    def __str__(self) -> str:
        p, c = self.schema()
        eig = f"   (eigenvariable {', '.join(self.letters()[v] for v in self.eigenvariables)})" if self.eigenvariables else ""
        return f"{p}  /  {c}{eig}"

    def install(self, name: str, sigma: str | None = None) -> RuleDef:
        p, c = self.schema()
        return install_rule(name, p, c, sigma, tuple(self.letters()[v] for v in self.eigenvariables))


def emit(q: QuasiInequality) -> StructuralRule:
    """Read a flat quasi-inequality ``∀..(P ⇒ C)`` as a rule from P to C."""
    body = q.body
    if not (isinstance(body, Implies) and len(body.hyps) == 1):
        raise UnsupportedShape("expected a single-hypothesis implication")
    pa, pc = _sides(body.hyps[0])
    ca, cc = _sides(body.concl)
    eig = tuple(v for quant, v in q.prefix if quant == EXISTS)
    return StructuralRule(pa, pc, ca, cc, eig)


def flatten_and_emit(q: QuasiInequality) -> StructuralRule:
    return emit(flatten(q))


@dataclass
class Correspondence:
    source: str
    chain: list[Step]
    rule: StructuralRule

    @property
    def correspondent(self) -> QuasiInequality:
        return self.chain[-1].q

    def report(self) -> str:
        lines = [str(s) for s in self.chain]
        p, c = self.rule.schema()
        lines.append(f"rule premise:    {p}")
        lines.append(f"rule conclusion: {c}")
        if self.rule.eigenvariables:
            lines.append("eigenvariable:   k")
        return "\n".join(lines)


def run(text: str) -> Correspondence:
    """Full pipeline on ``"<formula> <= <formula>"``."""
    lhs, rhs = parse_inequality(text)
    start = QuasiInequality(tuple((FORALL, v) for v in sorted(lhs.vars() | rhs.vars())), Ineq(from_formula(lhs), from_formula(rhs)))
    chain = [Step("", start)]
    q = approximate(lhs, rhs)
    chain.append(Step("join- and meet-generation", q))
    chain.extend(eliminate_chain(q))
    flat = flatten(chain[-1].q)
    if flat != chain[-1].q:
        chain.append(Step("join- and meet-generation", flat))
    return Correspondence(text, chain, emit(flat))


AXIOMS = {
    "T": "[]p0 <= p0",
    "4": "<><>p0 <= <>p0",
    "B": "p0 <= []<>p0",
    "D": "[]p0 <= <>p0",
    "C": "<>[]p0 <= []<>p0",
}

TABLE_RULE = {"T": "AxT", "4": "Ax4", "B": "AxB", "D": "AxD", "C": "AxC"}


# ------------------------------------------------------------ rule equality


def _template_items(text: str) -> tuple[list[str], list[str]]:
    ant, con = text.split("|-")
    items = lambda s: [x.strip().replace(" ", "") for x in s.split(",") if x.strip() and x.strip() not in ("Γ", "Δ")]
    return items(ant), items(con)


def rule_texts(d: RuleDef) -> tuple[str, str]:
    """Template text (contexts dropped) of a one-premise calculus rule."""
    tpl = d.variants[0]

    def show(sp) -> str:
        ant = ", ".join(str(x) for x in sp.ant if isinstance(x, SP))
        con = ", ".join(str(x) for x in sp.con if isinstance(x, SP))
        return f"{ant} |- {con}"

    return show(tpl.premises[0]), show(tpl.conclusion)


def same_rule(a: tuple[str, str], b: tuple[str, str], eig_a: Sequence[str] = (), eig_b: Sequence[str] = ()) -> bool:
    """Equality of two one-premise schemas up to renaming of the term
    letters and reordering within each side."""
    pa, ca = (_template_items(t) for t in a)
    pb, cb = (_template_items(t) for t in b)
    letters = lambda xs: sorted({c for item in xs for c in re.findall(r"(?<![A-Za-z])([a-z])(?![A-Za-z])", item)})
    la = letters(pa[0] + pa[1] + ca[0] + ca[1])
    lb = letters(pb[0] + pb[1] + cb[0] + cb[1])
    if len(la) != len(lb):
        return False
    kind = lambda c: "m" if c in "mn" else "j"
    for perm in itertools.permutations(lb):
        sigma = dict(zip(la, perm))
        if any(kind(x) != kind(y) for x, y in sigma.items()):
            continue
        if sorted(sigma.get(e, e) for e in eig_a) != sorted(eig_b):
            continue
        ren = lambda item: re.sub(r"(?<![A-Za-z])([a-z])(?![A-Za-z])", lambda mm: sigma.get(mm.group(1), mm.group(1)), item)
        if all(sorted(map(ren, x)) == sorted(y) for x, y in zip(pa + ca, pb + cb)):
            return True
    return False


def matches_rule(rule: StructuralRule, d: RuleDef) -> bool:
    """Whether an emitted rule is the calculus rule ``d`` up to renaming."""
    eig = [rule.letters()[v] for v in rule.eigenvariables]
    return same_rule(rule.schema(), rule_texts(d), eig, d.fresh_concl + d.fresh_ctx)


def table_rule(rule: StructuralRule) -> str | None:
    """Name of the built-in axiom rule that ``rule`` coincides with, if any."""
    for name in TABLE_RULE.values():
        if matches_rule(rule, RULES[name]):
            return name
    return None
