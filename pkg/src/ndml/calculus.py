"""Rule system: declarative rule templates, multiset matching, and the three
operations built on it (forward ``apply``, backward enumeration, instance
checking).

Templates are written in a small schema language::

    A B C          formula metavariables         p        atom metavariable
    j h k i        nominal metavariables          m n      conominal metavariables
    T T'           term metavariables             Γ Δ Γ' Δ'  context metavariables
    Top Bot        constants                      [] <> [#] <#> & |  as usual

Matching treats each side of a sequent as a multiset; the structures bound to
a context keep their order, and instantiation emits items in template order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .syntax import (
    ANT,
    BOT,
    CON,
    CONOM,
    NOM,
    TOP,
    And,
    Atom,
    Bot,
    Box,
    Dia,
    Formula,
    Or,
    Sequent,
    Structure,
    Term,
    Top,
    Var,
    WellFormednessError,
    fresh_var,
    in_display,
    parse_formula,
    parse_side,
    parse_structure,
    print_sequent,
    var,
)

NON_INVERTIBLE, INVERTIBLE = "NonInvertible", "Invertible"
SIGMA_ALL = ("T", "4", "B", "D", "C")


class RuleError(ValueError):
    kind = "RuleError"


class SchemaMismatch(RuleError):
    kind = "SchemaMismatch"


class FreshnessViolation(RuleError):
    kind = "FreshnessViolation"


class DisplayViolation(RuleError):
    kind = "DisplayViolation"


class SigmaDisabled(RuleError):
    kind = "SigmaDisabled"


@dataclass(frozen=True)
class CalcConfig:
    sigma: frozenset = frozenset()
    mode: str = NON_INVERTIBLE
    relaxed_switch: bool = False

    def __post_init__(self):
        bad = set(self.sigma) - set(SIGMA_ALL)
        if bad:
            raise ValueError(f"unknown axioms {sorted(bad)}")
        if self.mode not in (NON_INVERTIBLE, INVERTIBLE):
            raise ValueError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "sigma", frozenset(self.sigma))

    @classmethod
    def make(cls, sigma: str | Sequence[str] = (), mode: str = NON_INVERTIBLE, relaxed_switch: bool = False):
        if isinstance(sigma, str):
            sigma = [s for s in re.split(r"[\s,{}]+", sigma) if s]
        return cls(frozenset(sigma), mode, relaxed_switch)


# ---------------------------------------------------------------- patterns

_SORTS = {
    "A": "form", "B": "form", "C": "form",
    "p": "prop",
    "j": "nom", "h": "nom", "k": "nom", "i": "nom",
    "m": "conom", "n": "conom",
    "T": "term", "T'": "term",
}
_CTX = ("Γ", "Δ", "Γ'", "Δ'")


@dataclass(frozen=True)
class MV:
    name: str
    sort: str


@dataclass(frozen=True)
class PF:
    """Formula constructor pattern (``And``/``Or``/``Box``/``Dia``/``Top``/``Bot``)."""

    ctor: type
    args: tuple


@dataclass(frozen=True)
class PT:
    """Term pattern ``op x`` over a nominal/conominal metavariable."""

    op: str
    mv: MV


@dataclass(frozen=True)
class SP:
    lhs: object
    rhs: object

    def __str__(self):
        return f"{_pstr(self.lhs)}<={_pstr(self.rhs)}"


@dataclass(frozen=True)
class Ctx:
    name: str


@dataclass(frozen=True)
class SeqPat:
    ant: tuple
    con: tuple

    def side(self, name: str) -> tuple:
        return self.ant if name == ANT else self.con

    def np_items(self) -> list[tuple[str, int, SP]]:
        """Non-context items as (side, template index, pattern)."""
        return [(sd, i, it) for sd in (ANT, CON) for i, it in enumerate(self.side(sd)) if isinstance(it, SP)]


def _pstr(x) -> str:
    if isinstance(x, MV):
        return x.name
    if isinstance(x, PT):
        return f"{x.op}{x.mv.name}"
    if isinstance(x, PF):
        if x.ctor in (Top, Bot):
            return "Top" if x.ctor is Top else "Bot"
        if x.ctor in (Box, Dia):
            return ("[]" if x.ctor is Box else "<>") + _pstr(x.args[0])
        sym = "&" if x.ctor is And else "|"
        return f"({_pstr(x.args[0])}{sym}{_pstr(x.args[1])})"
    return str(x)


_PTOK = re.compile(r"\s*(\|-|<=|\[#\]|<#>|\[\]|<>|[&|(),]|Top|Bot|[A-Za-zΓΔ]'?)")


def _ptokens(text: str) -> list[str]:
    out, i = [], 0
    while i < len(text):
        if not text[i:].strip():
            break
        m = _PTOK.match(text, i)
        if not m:
            raise ValueError(f"bad template near {text[i:]!r}")
        out.append(m.group(1))
        i = m.end()
    return out


class _TemplateParser:
    def __init__(self, text: str):
        self.toks = _ptokens(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self, want=None):
        t = self.peek()
        if want is not None and t != want:
            raise ValueError(f"template: expected {want!r}, got {t!r}")
        self.i += 1
        return t

    def sequent(self) -> SeqPat:
        ant = self.side("|-")
        self.take("|-")
        con = self.side(None)
        if self.peek() is not None:
            raise ValueError(f"template: trailing {self.peek()!r}")
        return SeqPat(tuple(ant), tuple(con))

    def side(self, stop):
        out = []
        if self.peek() == stop:
            return out
        out.append(self.item())
        while self.peek() == ",":
            self.take()
            out.append(self.item())
        return out

    def item(self):
        t = self.peek()
        if t in _CTX:
            self.take()
            return Ctx(t)
        lhs = self.expr()
        self.take("<=")
        rhs = self.expr()
        return SP(lhs, rhs)

    def expr(self):
        node = self.unary()
        while self.peek() in ("&", "|"):
            op = self.take()
            node = PF(And if op == "&" else Or, (node, self.unary()))
        return node

    def unary(self):
        t = self.take()
        if t in ("[]", "<>", "[#]", "<#>"):
            arg = self.unary()
            if isinstance(arg, PT) and arg.op == "":
                return PT(t, arg.mv)
            if t in ("[#]", "<#>"):
                raise ValueError("black modalities only apply to term metavariables")
            return PF(Box if t == "[]" else Dia, (arg,))
        if t == "(":
            node = self.expr()
            self.take(")")
            return node
        if t == "Top":
            return PF(Top, ())
        if t == "Bot":
            return PF(Bot, ())
        if t in _SORTS:
            mv = MV(t, _SORTS[t])
            return PT("", mv) if mv.sort in ("nom", "conom") else mv
        raise ValueError(f"template: unexpected {t!r}")


def seqpat(text: str) -> SeqPat:
    return _TemplateParser(text).sequent()


# -------------------------------------------------------------- rule table


@dataclass(frozen=True)
class Template:
    premises: tuple[SeqPat, ...]
    conclusion: SeqPat


@dataclass(frozen=True)
class RuleDef:
    name: str
    family: str
    variants: tuple[Template, ...]
    sigma: str | None = None
    fresh_concl: tuple[str, ...] = ()  # must not occur in the conclusion
    fresh_ctx: tuple[str, ...] = ()  # must not occur in the contexts
    display_principal: bool = False  # labelled np structures of the conclusion in display
    restrict: tuple[tuple[str, tuple[type, ...]], ...] = ()
    modes: tuple[str, ...] = (NON_INVERTIBLE, INVERTIBLE)

    @property
    def arity(self) -> int:
        return len(self.variants[0].premises)


def _R(name, family, premises, conclusion, *more, **kw) -> RuleDef:
    variants = [Template(tuple(seqpat(p) for p in premises), seqpat(conclusion))]
    for prem, concl in more:
        variants.append(Template(tuple(seqpat(p) for p in prem), seqpat(concl)))
    kw["restrict"] = tuple(kw.get("restrict", {}).items())
    return RuleDef(name, family, tuple(variants), **kw)


_JA = (Atom, And, Box)
_MB = (Atom, Or, Dia)
_NI, _IV = (NON_INVERTIBLE,), (INVERTIBLE,)

RULES: dict[str, RuleDef] = {}


def _add(*defs: RuleDef):
    for d in defs:
        RULES[d.name] = d


_add(
    # initial rules, empty contexts
    _R("Id_jp", "initial", [], "j<=p |- j<=p", modes=_NI),
    _R("Id_pm", "initial", [], "p<=m |- p<=m", modes=_NI),
    _R("Id_Bot", "initial", [], "Bot<=m |- Bot<=m", modes=_NI),
    _R("Id_Top", "initial", [], "j<=Top |- j<=Top", modes=_NI),
    _R("Bot_j", "initial", [], "j<=Bot |- j<=A", restrict={"A": _JA}, modes=_NI),
    _R("Bot_m", "initial", [], "B<=m |- Bot<=m", restrict={"B": _MB}, modes=_NI),
    _R("Top_m", "initial", [], "Top<=m |- B<=m", restrict={"B": _MB}, modes=_NI),
    _R("Top_j", "initial", [], "j<=A |- j<=Top", restrict={"A": _JA}, modes=_NI),
)
# invertible mode: the same initial rules with contexts
_INIT_CTX = {
    "Id_jp": "j<=p, Γ |- j<=p, Δ",
    "Id_pm": "Γ, p<=m |- p<=m, Δ",
    "Id_Bot": "Γ, Bot<=m |- Bot<=m, Δ",
    "Id_Top": "j<=Top, Γ |- j<=Top, Δ",
    "Bot_j": "j<=Bot, Γ |- j<=A, Δ",
    "Bot_m": "Γ, B<=m |- Bot<=m, Δ",
    "Top_m": "Γ, Top<=m |- B<=m, Δ",
    "Top_j": "j<=A, Γ |- j<=Top, Δ",
}
INITIAL_CTX: dict[str, RuleDef] = {
    name: RuleDef(
        name, "initial", (Template((), seqpat(text)),), restrict=RULES[name].restrict, modes=_IV
    )
    for name, text in _INIT_CTX.items()
}

_add(
    _R("Cut_j", "cut", ["Γ |- j<=A, Δ", "j<=A, Γ' |- Δ'"], "Γ, Γ' |- Δ', Δ"),
    _R("Cut_m", "cut", ["Γ |- Δ, A<=m", "Γ', A<=m |- Δ'"], "Γ', Γ |- Δ, Δ'"),
    # switch rules
    _R("S_m", "switch", ["j<=A, Γ |- j<=m, Δ"], "Γ |- A<=m, Δ", fresh_concl=("j",)),
    _R("S_j", "switch", ["Γ, A<=m |- j<=m, Δ"], "Γ |- j<=A, Δ", fresh_concl=("m",)),
    _R("S_mm", "switch", ["j<=A, Γ |- j<=B, Δ"], "Γ, B<=m |- A<=m, Δ", fresh_ctx=("j", "m")),
    _R("S_jj", "switch", ["Γ, A<=m |- B<=m, Δ"], "j<=B, Γ |- j<=A, Δ", fresh_ctx=("j", "m")),
    _R("S_mT", "switch", ["j<=T, Γ |- j<=A, Δ"], "Γ, A<=m |- T<=m, Δ", fresh_ctx=("j", "m")),
    _R("S_jT", "switch", ["Γ, T<=m |- A<=m, Δ"], "j<=A, Γ |- j<=T, Δ", fresh_ctx=("j", "m")),
    _R("S_Tm", "switch", ["j<=A, Γ |- j<=T, Δ"], "Γ, T<=m |- A<=m, Δ", fresh_ctx=("j", "m")),
    _R("S_Tj", "switch", ["Γ, A<=m |- T<=m, Δ"], "j<=T, Γ |- j<=A, Δ", fresh_ctx=("j", "m")),
    _R("S_TTm", "switch", ["j<=T', Γ |- j<=T, Δ"], "Γ, T<=m |- T'<=m, Δ", fresh_ctx=("j", "m")),
    _R("S_jTT", "switch", ["Γ, T'<=m |- T<=m, Δ"], "j<=T, Γ |- j<=T', Δ", fresh_ctx=("j", "m")),
    # adjunctions
    _R("Adj_DiaBb", "adjunction", ["Γ |- <>j<=m, Δ"], "Γ |- j<=[#]m, Δ"),
    _R("Adj_DiaBb_inv", "adjunction", ["Γ |- j<=[#]m, Δ"], "Γ |- <>j<=m, Δ"),
    _R("Adj_BdBox", "adjunction", ["Γ |- j<=[]m, Δ"], "Γ |- <#>j<=m, Δ"),
    _R("Adj_BdBox_inv", "adjunction", ["Γ |- <#>j<=m, Δ"], "Γ |- j<=[]m, Δ"),
    # structural rules for top and bottom
    _R("TopBox", "structural", ["Γ |- Top<=m, Δ"], "j<=Top, Γ |- j<=[]m, Δ"),
    _R("BotDia", "structural", ["Γ |- j<=Bot, Δ"], "Γ, Bot<=m |- <>j<=m, Δ"),
    # logical rules
    _R(
        "And_P", "logical", ["j<=A, Γ |- Δ"], "j<=A&B, Γ |- Δ",
        (["j<=B, Γ |- Δ"], "j<=A&B, Γ |- Δ"),
        display_principal=True, modes=_NI,
    ),
    _R("And_S", "logical", ["Γ |- Δ, j<=A", "Γ |- Δ, j<=B"], "Γ |- Δ, j<=A&B", display_principal=True),
    _R("Or_P", "logical", ["Γ |- A<=m, Δ", "Γ |- B<=m, Δ"], "Γ |- A|B<=m, Δ", display_principal=True),
    _R(
        "Or_S", "logical", ["Γ, A<=m |- Δ"], "Γ, A|B<=m |- Δ",
        (["Γ, B<=m |- Δ"], "Γ, A|B<=m |- Δ"),
        display_principal=True, modes=_NI,
    ),
    _R("Box_P", "logical", ["Γ |- Δ, A<=m"], "j<=[]A, Γ |- Δ, j<=[]m", display_principal=True, modes=_NI),
    _R("Box_S", "logical", ["Γ, A<=m |- j<=[]m, Δ"], "Γ |- j<=[]A, Δ", fresh_concl=("m",), display_principal=True),
    _R("Dia_P", "logical", ["j<=A, Γ |- Δ, <>j<=m"], "Γ |- Δ, <>A<=m", fresh_concl=("j",), display_principal=True),
    _R("Dia_S", "logical", ["Γ |- j<=A, Δ"], "Γ, <>A<=m |- <>j<=m, Δ", display_principal=True, modes=_NI),
    # invertible variants
    _R("And_P_inv", "logical", ["j<=A, j<=B, Γ |- Δ"], "j<=A&B, Γ |- Δ", display_principal=True, modes=_IV),
    _R("Or_S_inv", "logical", ["Γ, A<=m, B<=m |- Δ"], "Γ, A|B<=m |- Δ", display_principal=True, modes=_IV),
    _R(
        "Box_P_inv", "logical", ["j<=[]A, Γ |- A<=m, j<=[]m, Δ"], "j<=[]A, Γ |- j<=[]m, Δ",
        display_principal=True, modes=_IV,
    ),
    _R(
        "Dia_S_inv", "logical", ["Γ, <>A<=m |- j<=A, <>j<=m, Δ"], "Γ, <>A<=m |- <>j<=m, Δ",
        display_principal=True, modes=_IV,
    ),
    # rules for the extension axioms
    _R("Ax4", "axiom", ["Γ |- <>j<=m, Δ"], "Γ, h<=<>j |- <>h<=m, Δ", sigma="4"),
    _R("AxT", "axiom", ["Γ |- j<=[]m, Δ"], "Γ |- j<=m, Δ", sigma="T"),
    _R("AxB", "axiom", ["Γ |- <>j<=m, Δ"], "Γ |- j<=[]m, Δ", sigma="B"),
    _R("AxD", "axiom", ["k<=<#>j, Γ |- <>k<=m, Δ"], "Γ |- j<=m, Δ", sigma="D", fresh_ctx=("k",)),
    _R("AxC", "axiom", ["k<=<#>j, Γ |- <>k<=m, Δ"], "h<=<>j, Γ |- <#>h<=m, Δ", sigma="C", fresh_ctx=("k",)),
)

RULE_IDS: tuple[str, ...] = tuple(RULES)

SWITCHES = ("S_m", "S_j", "S_mm", "S_jj", "S_mT", "S_jT", "S_Tm", "S_Tj", "S_TTm", "S_jTT")
INVERTIBLE_SWITCHES = SWITCHES[2:]
CLOCKWISE = ("S_mm", "S_mT", "S_Tm", "S_TTm")
ANTICLOCKWISE = ("S_jj", "S_jT", "S_Tj", "S_jTT")
ADJUNCTIONS = ("Adj_DiaBb", "Adj_DiaBb_inv", "Adj_BdBox", "Adj_BdBox_inv")
INVERSE = {
    "S_mm": "S_jj", "S_jj": "S_mm", "S_mT": "S_Tj", "S_Tj": "S_mT",
    "S_jT": "S_Tm", "S_Tm": "S_jT", "S_TTm": "S_jTT", "S_jTT": "S_TTm",
    "Adj_DiaBb": "Adj_DiaBb_inv", "Adj_DiaBb_inv": "Adj_DiaBb",
    "Adj_BdBox": "Adj_BdBox_inv", "Adj_BdBox_inv": "Adj_BdBox",
}

J_INTRO = frozenset(
    {"Id_jp", "Bot_j", "Top_j", "And_P", "And_S", "Box_P", "Box_S", "Id_Top", "TopBox", "And_P_inv", "Box_P_inv"}
)
M_INTRO = frozenset(
    {"Id_pm", "Bot_m", "Top_m", "Or_P", "Or_S", "Dia_P", "Dia_S", "Id_Bot", "BotDia", "Or_S_inv", "Dia_S_inv"}
)


def install_rule(
    name: str, premise: str, conclusion: str, sigma: str | None = None, eigenvariables: Sequence[str] = ()
) -> RuleDef:
    """Register an extra one-premise structural rule given as template text.

    Installed rules are not in RULE_IDS; pass them to ``backward`` or
    ``prove`` explicitly.
    """
    d = _R(name, "axiom", [premise], conclusion, sigma=sigma, fresh_ctx=tuple(eigenvariables))
    _add(d)
    return d


def rule_def(cfg: CalcConfig, name: str) -> RuleDef:
    if name not in RULES:
        raise SchemaMismatch(f"unknown rule {name!r}")
    if cfg.mode == INVERTIBLE and name in INITIAL_CTX:
        return INITIAL_CTX[name]
    return RULES[name]


def available(cfg: CalcConfig, name: str) -> bool:
    d = RULES[name]
    if d.sigma is not None and d.sigma not in cfg.sigma:
        return False
    if name in INITIAL_CTX:
        return True
    return cfg.mode in d.modes


def active_rules(cfg: CalcConfig) -> list[str]:
    return [r for r in RULE_IDS if available(cfg, r)]


# ---------------------------------------------------------------- matching

Bindings = dict


def _match_side(pat, x, b: Bindings) -> Bindings | None:
    if isinstance(pat, MV):
        if pat.sort == "term":
            if not isinstance(x, Term):
                return None
        elif pat.sort == "prop":
            if not isinstance(x, Atom):
                return None
        elif pat.sort == "form":
            if not isinstance(x, Formula):
                return None
        if pat.name in b:
            return b if b[pat.name] == x else None
        nb = dict(b)
        nb[pat.name] = x
        return nb
    if isinstance(pat, PT):
        if not isinstance(x, Term) or x.op != pat.op:
            return None
        want = NOM if pat.mv.sort == "nom" else CONOM
        if x.var.kind != want:
            return None
        if pat.mv.name in b:
            return b if b[pat.mv.name] == x.var else None
        nb = dict(b)
        nb[pat.mv.name] = x.var
        return nb
    if isinstance(pat, PF):
        if not isinstance(x, pat.ctor):
            return None
        for sub, y in zip(pat.args, x.children()):
            b = _match_side(sub, y, b)
            if b is None:
                return None
        return b
    raise TypeError(pat)


def _match_structure(sp: SP, st: Structure, b: Bindings) -> Bindings | None:
    b2 = _match_side(sp.lhs, st.lhs, b)
    if b2 is None:
        return None
    return _match_side(sp.rhs, st.rhs, b2)


def _inst_side(pat, b: Mapping):
    if isinstance(pat, MV):
        return b[pat.name]
    if isinstance(pat, PT):
        return Term(pat.op, b[pat.mv.name])
    if isinstance(pat, PF):
        if pat.ctor is Top:
            return TOP
        if pat.ctor is Bot:
            return BOT
        return pat.ctor(*(_inst_side(a, b) for a in pat.args))
    raise TypeError(pat)


def _inst_structure(sp: SP, b: Mapping) -> Structure:
    return Structure(_inst_side(sp.lhs, b), _inst_side(sp.rhs, b))


def _mvs(pat, out: set) -> set:
    if isinstance(pat, MV):
        out.add(pat.name)
    elif isinstance(pat, PT):
        out.add(pat.mv.name)
    elif isinstance(pat, PF):
        for a in pat.args:
            _mvs(a, out)
    elif isinstance(pat, SP):
        _mvs(pat.lhs, out)
        _mvs(pat.rhs, out)
    elif isinstance(pat, SeqPat):
        for it in pat.ant + pat.con:
            _mvs(it, out)
    elif isinstance(pat, Ctx):
        out.add(pat.name)
    return out


def _sort_of(name: str) -> str:
    return "ctx" if name in _CTX else _SORTS[name]


Tag = tuple  # ("ctx", name, k) | ("np", side, template index)


def _match_seq_side(
    items: tuple, xs: Sequence[Structure], b: Bindings, hint: set[int] | None
) -> Iterator[tuple[Bindings, list[Tag]]]:
    """All matches of one template side against a concrete side."""
    sps = [(i, it) for i, it in enumerate(items) if isinstance(it, SP)]
    ctxs = [it.name for it in items if isinstance(it, Ctx)]
    n = len(xs)
    if hint is not None and len(hint) != len(sps):
        return
    if len(sps) > n or (not ctxs and len(sps) != n):
        return

    def assign(k: int, b: Bindings, used: list[int]) -> Iterator[tuple[Bindings, list[int]]]:
        if k == len(sps):
            yield b, used
            return
        _, sp = sps[k]
        for idx in range(n):
            if idx in used or (hint is not None and idx not in hint):
                continue
            b2 = _match_structure(sp, xs[idx], b)
            if b2 is not None:
                yield from assign(k + 1, b2, used + [idx])

    for b2, used in assign(0, b, []):
        tags: list[Tag] = [None] * n  # type: ignore[list-item]
        for (ti, _), idx in zip(sps, used):
            tags[idx] = ("np", ti)
        rest = [idx for idx in range(n) if idx not in used]
        res = _bind_contexts(ctxs, [xs[i] for i in rest], b2)
        if res is None:
            continue
        b3, ctags = res
        for idx, t in zip(rest, ctags):
            tags[idx] = t
        yield b3, tags


def _bind_contexts(ctxs: list[str], rest: list[Structure], b: Bindings):
    if not ctxs:
        return (b, []) if not rest else None
    unbound = [c for c in ctxs if c not in b]
    if len(unbound) > 1:
        raise SchemaMismatch("cannot split a side between two unbound contexts")
    if unbound:
        # the unbound context takes what the bound ones leave
        pool = list(rest)
        pooltags: list = [None] * len(rest)
        for c in ctxs:
            if c in b:
                for k, st in enumerate(b[c]):
                    for idx, y in enumerate(pool):
                        if pooltags[idx] is None and y == st:
                            pooltags[idx] = ("ctx", c, k)
                            break
                    else:
                        return None
        free = [idx for idx in range(len(rest)) if pooltags[idx] is None]
        c = unbound[0]
        nb = dict(b)
        nb[c] = tuple(rest[idx] for idx in free)
        for k, idx in enumerate(free):
            pooltags[idx] = ("ctx", c, k)
        return nb, pooltags
    want = [(("ctx", c, k), st) for c in ctxs for k, st in enumerate(b[c])]
    if len(want) != len(rest):
        return None
    tags: list = [None] * len(rest)
    taken = [False] * len(want)
    for idx, st in enumerate(rest):
        for w, (t, y) in enumerate(want):
            if not taken[w] and y == st:
                taken[w] = True
                tags[idx] = t
                break
        else:
            return None
    return b, tags


def _match_sequent(pat: SeqPat, s: Sequent, b: Bindings, hint: dict | None) -> Iterator[tuple[Bindings, dict]]:
    ha = hint.get(ANT) if hint else None
    hc = hint.get(CON) if hint else None
    for b1, ta in _match_seq_side(pat.ant, s.ant, b, ha):
        for b2, tc in _match_seq_side(pat.con, s.con, b1, hc):
            yield b2, {ANT: ta, CON: tc}


def _instantiate(pat: SeqPat, b: Mapping) -> tuple[Sequent, dict]:
    out = {}
    tags = {}
    for sd in (ANT, CON):
        xs, ts = [], []
        for i, it in enumerate(pat.side(sd)):
            if isinstance(it, Ctx):
                for k, st in enumerate(b[it.name]):
                    xs.append(st)
                    ts.append(("ctx", it.name, k))
            else:
                xs.append(_inst_structure(it, b))
                ts.append(("np", i))
        out[sd], tags[sd] = xs, ts
    return Sequent(out[ANT], out[CON]), tags


# ---------------------------------------------------------------- instances


@dataclass(frozen=True)
class RuleInstance:
    rule: str
    premises: tuple[Sequent, ...]
    conclusion: Sequent
    bindings: Mapping
    variant: int = 0
    # provenance tags for each premise then the conclusion, per side
    tags: tuple = field(default=(), compare=False, repr=False)

    @property
    def arity(self) -> int:
        return len(self.premises)

    def nonparametric(self) -> dict:
        """Locators of nonparametric occurrences: {"conclusion": [...], "premises": [[...], ...]}."""
        def np_locs(t: dict) -> list[tuple[str, int]]:
            return [(sd, i) for sd in (ANT, CON) for i, tag in enumerate(t[sd]) if tag[0] == "np"]

        return {
            "conclusion": np_locs(self.tags[-1]),
            "premises": [np_locs(t) for t in self.tags[:-1]],
        }

    def tag(self, which: int, loc: tuple[str, int]) -> Tag:
        """``which`` is a premise index, or -1 for the conclusion."""
        return self.tags[which][loc[0]][loc[1]]

    def template(self, cfg: CalcConfig | None = None) -> Template:
        d = rule_def(cfg or _cfg_for(self), self.rule)
        return d.variants[self.variant]

    def __str__(self) -> str:
        prem = " ; ".join(print_sequent(p) for p in self.premises)
        return f"{self.rule}: [{prem}] => {print_sequent(self.conclusion)}"


def _cfg_for(inst: RuleInstance) -> CalcConfig:
    ctx_initial = inst.rule in INITIAL_CTX and any(
        t[0] == "ctx" for sd in (ANT, CON) for t in inst.tags[-1][sd]
    )
    return CalcConfig(mode=INVERTIBLE if ctx_initial else NON_INVERTIBLE)


def _coerce_binding(name: str, value):
    """Accept binding values as syntax objects or text."""
    sort = _sort_of(name)
    if sort == "ctx":
        if isinstance(value, str):
            from .syntax import parse_sequent

            return parse_sequent(f"{value} |-").ant if value.strip() else ()
        return tuple(parse_structure(v) if isinstance(v, str) else v for v in value)
    if isinstance(value, str):
        if sort in ("nom", "conom"):
            v = var(value)
            return v
        if sort == "term":
            x = parse_side(value)
            if not isinstance(x, Term):
                raise SchemaMismatch(f"binding {name} must be a term")
            return x
        return parse_formula(value)
    if sort in ("nom", "conom") and isinstance(value, Term):
        return value.var
    if sort == "prop" and isinstance(value, Var):
        return Atom(value)
    return value


def _check_sorts(b: Mapping) -> None:
    for name, v in b.items():
        sort = _sort_of(name)
        ok = {
            "form": isinstance(v, Formula),
            "prop": isinstance(v, Atom),
            "nom": isinstance(v, Var) and v.kind == NOM,
            "conom": isinstance(v, Var) and v.kind == CONOM,
            "term": isinstance(v, Term),
            "ctx": isinstance(v, tuple),
        }[sort]
        if not ok:
            raise SchemaMismatch(f"binding {name}={v} has the wrong sort")


def _side_conditions(cfg: CalcConfig, d: RuleDef, tpl: Template, b: Mapping, premises, conclusion, tags) -> list[RuleError]:
    out: list[RuleError] = []
    for name, classes in d.restrict:
        if name in b and not isinstance(b[name], classes):
            out.append(SchemaMismatch(f"{d.name}: {name}={b[name]} must be one of {[c.__name__ for c in classes]}"))
    cvars = conclusion.vars()
    for name in d.fresh_concl:
        if name in b and b[name] in cvars:
            out.append(FreshnessViolation(f"{d.name}: {b[name]} ({name}) must not occur in the conclusion"))
    ctx_vars: set[Var] = set()
    for c in _CTX:
        for st in b.get(c, ()):
            ctx_vars |= st.vars()
    relaxed_skip: set[str] = set()
    if cfg.relaxed_switch and d.family == "switch":
        # experimental: drop the condition on the variable created by the conclusion
        concl_mvs = _mvs(tpl.conclusion, set())
        prem_mvs = set().union(*(_mvs(p, set()) for p in tpl.premises))
        relaxed_skip = concl_mvs - prem_mvs
    for name in d.fresh_ctx:
        if name in relaxed_skip:
            continue
        if name in b and b[name] in ctx_vars:
            out.append(FreshnessViolation(f"{d.name}: {b[name]} ({name}) must not occur in Γ or Δ"))
    if d.display_principal:
        for sd in (ANT, CON):
            for i, t in enumerate(tags[-1][sd]):
                if t[0] == "np" and conclusion.side(sd)[i].labelled and not in_display(conclusion, (sd, i)):
                    out.append(DisplayViolation(f"{d.name}: principal {conclusion.side(sd)[i]} not in display"))
    if d.family == "cut":
        for pi, prem in enumerate(premises):
            for sd in (ANT, CON):
                for i, t in enumerate(tags[pi][sd]):
                    if t[0] == "np" and not in_display(prem, (sd, i)):
                        out.append(DisplayViolation(f"{d.name}: cut formula {prem.side(sd)[i]} not in display in premise {pi}"))
    return out


def _hint_dict(locs) -> dict | None:
    if locs is None:
        return None
    from .syntax import parse_loc

    out: dict = {ANT: set(), CON: set()}
    for l in locs:
        sd, i = parse_loc(l)
        out[sd].add(i)
    return out


def _matches(cfg: CalcConfig, rule: str, premises: Sequence[Sequent], b0: Mapping, hints, conclusion: Sequent | None):
    """Joint matches of premises (and optionally the conclusion) for every variant."""
    d = rule_def(cfg, rule)
    if len(premises) != d.arity:
        raise SchemaMismatch(f"{rule} takes {d.arity} premise(s), got {len(premises)}")
    for vi, tpl in enumerate(d.variants):
        def go(k: int, b: Bindings, acc: list):
            if k == len(premises):
                yield b, acc
                return
            h = _hint_dict(hints[k]) if hints is not None and k < len(hints) else None
            for b2, t in _match_sequent(tpl.premises[k], premises[k], b, h):
                yield from go(k + 1, b2, acc + [t])

        for b, ptags in go(0, dict(b0), []):
            yield vi, tpl, b, ptags


def _fresh_for(tpl: Template, b: Bindings, avoid: set[Var]) -> Bindings:
    """Bind the metavariables of the conclusion left open by the premises."""
    b = dict(b)
    used = set(avoid)
    for name in sorted(_mvs(tpl.conclusion, set()) - set(b)):
        sort = _sort_of(name)
        if sort not in ("nom", "conom"):
            raise SchemaMismatch(f"binding for {name} required")
        v = fresh_var(NOM if sort == "nom" else CONOM, used)
        used.add(v)
        b[name] = v
    return b


def apply(
    cfg: CalcConfig,
    rule: str,
    premises: Sequence[Sequent],
    bindings: Mapping | None = None,
    hints: Sequence | None = None,
) -> RuleInstance:
    """Forward application. ``hints`` optionally fixes the nonparametric
    locators of each premise. Open conclusion-only metavariables are bound to
    the smallest compatible fresh variable."""
    if rule not in RULES:
        raise SchemaMismatch(f"unknown rule {rule!r}")
    d = RULES[rule]
    if d.sigma is not None and d.sigma not in cfg.sigma:
        raise SigmaDisabled(f"{rule} needs axiom {d.sigma} in Σ")
    if not available(cfg, rule):
        raise SchemaMismatch(f"{rule} is not part of the {cfg.mode} calculus")
    b0 = {k: _coerce_binding(k, v) for k, v in (bindings or {}).items()}
    _check_sorts(b0)
    premises = tuple(premises)
    avoid = set().union(*(p.vars() for p in premises)) if premises else set()
    errors: list[RuleError] = []
    for vi, tpl, b, ptags in _matches(cfg, rule, premises, b0, hints, None):
        try:
            bf = _fresh_for(tpl, b, avoid)
            concl, ctags = _instantiate(tpl.conclusion, bf)
        except WellFormednessError as e:
            errors.append(SchemaMismatch(f"{rule}: {e}"))
            continue
        except KeyError as e:
            errors.append(SchemaMismatch(f"{rule}: missing binding {e}"))
            continue
        tags = tuple(ptags) + (ctags,)
        errs = _side_conditions(cfg, rule_def(cfg, rule), tpl, bf, premises, concl, tags)
        if errs:
            errors.extend(errs)
            continue
        return RuleInstance(rule, premises, concl, _public(bf), vi, tags)
    if errors:
        # report the most specific failure
        for cls in (FreshnessViolation, DisplayViolation):
            for e in errors:
                if isinstance(e, cls):
                    raise e
        raise errors[0]
    raise SchemaMismatch(f"{rule}: premises do not match the rule schema")


def forward_instances(
    cfg: CalcConfig,
    rule: str,
    premises: Sequence[Sequent],
    bindings: Mapping | None = None,
    hints: Sequence | None = None,
    avoid: Iterable[Var] = (),
) -> Iterator[RuleInstance]:
    """Every correct forward application of ``rule`` (``apply`` returns the
    first). Fresh conclusion variables also avoid ``avoid``."""
    if rule not in RULES or not available(cfg, rule):
        return
    b0 = {k: _coerce_binding(k, v) for k, v in (bindings or {}).items()}
    premises = tuple(premises)
    used = set(avoid).union(*(p.vars() for p in premises))
    d = rule_def(cfg, rule)
    seen = set()
    for vi, tpl, b, ptags in _matches(cfg, rule, premises, b0, hints, None):
        try:
            bf = _fresh_for(tpl, b, used)
            concl, ctags = _instantiate(tpl.conclusion, bf)
        except (WellFormednessError, KeyError, SchemaMismatch):
            continue
        tags = tuple(ptags) + (ctags,)
        if _side_conditions(cfg, d, tpl, bf, premises, concl, tags):
            continue
        inst = RuleInstance(rule, premises, concl, _public(bf), vi, tags)
        key = (vi, concl, repr(inst.nonparametric()))
        if key not in seen:
            seen.add(key)
            yield inst


def _public(b: Mapping) -> dict:
    return dict(b)


def check_instance(cfg: CalcConfig, inst: RuleInstance, hints: dict | None = None) -> list[RuleError]:
    """Empty list iff the instance is a correct application of its rule.

    The labelling condition on cuts cannot be decided locally; it is checked
    by the derivation checker.
    """
    try:
        rebuilt = match_instance(cfg, inst.rule, inst.premises, inst.conclusion, inst.bindings, hints)
    except RuleError as e:
        return [e]
    return [] if rebuilt is not None else [SchemaMismatch(f"{inst.rule}: no match")]


def match_instance(
    cfg: CalcConfig,
    rule: str,
    premises: Sequence[Sequent],
    conclusion: Sequent,
    bindings: Mapping | None = None,
    hints: dict | None = None,
) -> RuleInstance:
    """Recover the instance connecting given premises and conclusion.

    ``hints`` may hold {"premises": [[loc...], ...], "conclusion": [loc...]}.
    Raises the most specific RuleError when no reading works.
    """
    if rule not in RULES:
        raise SchemaMismatch(f"unknown rule {rule!r}")
    d = RULES[rule]
    if d.sigma is not None and d.sigma not in cfg.sigma:
        raise SigmaDisabled(f"{rule} needs axiom {d.sigma} in Σ")
    if not available(cfg, rule):
        raise SchemaMismatch(f"{rule} is not part of the {cfg.mode} calculus")
    b0 = {k: _coerce_binding(k, v) for k, v in (bindings or {}).items() if k in _SORTS or k in _CTX}
    _check_sorts(b0)
    premises = tuple(premises)
    phints = hints.get("premises") if hints else None
    chint = _hint_dict(hints.get("conclusion")) if hints and hints.get("conclusion") is not None else None
    errors: list[RuleError] = []
    dd = rule_def(cfg, rule)
    for vi, tpl, b, ptags in _matches(cfg, rule, premises, b0, phints, None):
        for bc, ctags in _match_sequent(tpl.conclusion, conclusion, b, chint):
            tags = tuple(ptags) + (ctags,)
            errs = _side_conditions(cfg, dd, tpl, bc, premises, conclusion, tags)
            if errs:
                errors.extend(errs)
                continue
            return RuleInstance(rule, premises, conclusion, _public(bc), vi, tags)
    if errors:
        for cls in (FreshnessViolation, DisplayViolation):
            for e in errors:
                if isinstance(e, cls):
                    raise e
        raise errors[0]
    raise SchemaMismatch(f"{rule}: premises and conclusion do not fit the schema")


def backward(cfg: CalcConfig, goal: Sequent, rules: Sequence[str] | None = None) -> list[tuple[str, list[Sequent], dict]]:
    """Every rule instance (cut excluded) whose conclusion is ``goal``."""
    out = []
    gvars = goal.vars()
    for rule in rules or active_rules(cfg):
        d = rule_def(cfg, rule)
        if d.family == "cut":
            continue
        for vi, tpl in enumerate(d.variants):
            seen = set()
            for b, ctags in _match_sequent(tpl.conclusion, goal, {}, None):
                open_mvs = set().union(*(_mvs(p, set()) for p in tpl.premises)) - set(b) if tpl.premises else set()
                bf = dict(b)
                used = set(gvars)
                ok = True
                for name in sorted(open_mvs):
                    sort = _sort_of(name)
                    if sort not in ("nom", "conom"):
                        ok = False
                        break
                    v = fresh_var(NOM if sort == "nom" else CONOM, used)
                    used.add(v)
                    bf[name] = v
                if not ok:
                    continue
                try:
                    prem = [_instantiate(p, bf) for p in tpl.premises]
                except WellFormednessError:
                    continue
                premises = tuple(p for p, _ in prem)
                tags = tuple(t for _, t in prem) + (ctags,)
                if _side_conditions(cfg, d, tpl, bf, premises, goal, tags):
                    continue
                key = tuple(print_sequent(p) for p in premises)
                if key in seen:
                    continue
                seen.add(key)
                out.append((rule, list(premises), bf))
    return out


def backward_instances(cfg: CalcConfig, goal: Sequent, rules: Sequence[str] | None = None) -> list[RuleInstance]:
    out = []
    for rule, prem, b in backward(cfg, goal, rules):
        out.append(match_instance(cfg, rule, prem, goal, {k: v for k, v in b.items() if k not in _CTX}))
    return out
