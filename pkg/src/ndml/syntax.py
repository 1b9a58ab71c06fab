"""Object language: formulas, nominal/conominal terms, structures and sequents.

Everything here is immutable. Structures are inequalities ``lhs <= rhs`` whose
sides are either formulas or terms; the four admissible shapes are

* ``j <= A``  labelled formula, nominal approximant (``LabJ``)
* ``A <= m``  labelled formula, conominal approximant (``LabM``)
* ``j <= T``  pure structure on a nominal (``PureJ``)
* ``T <= m``  pure structure on a conominal (``PureM``)

A structure ``j <= m`` fits both pure readings; it is classified ``PureJ``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from itertools import permutations
from typing import Callable, Iterable, Iterator, Mapping, Sequence, Union

PROP, NOM, CONOM = "p", "j", "m"
PROP_LETTERS = ("p", "q", "r", "s")  # all proposition variables; ``p`` is the default
KINDS = PROP_LETTERS + (NOM, CONOM)

PRE, SUC = "Precedent", "Succedent"
ANT, CON = "ant", "con"

LAB_J, LAB_M, PURE_J, PURE_M = "LabJ", "LabM", "PureJ", "PureM"


class ParseError(ValueError):
    """Syntax error; ``pos`` is the character offset in the input."""

    def __init__(self, msg: str, pos: int = -1):
        super().__init__(f"{msg} (at {pos})" if pos >= 0 else msg)
        self.pos = pos


class WellFormednessError(ValueError):
    """A structure violates the shape or occurrence side conditions."""


class RenamingError(ValueError):
    pass


# ---------------------------------------------------------------- variables


@dataclass(frozen=True, order=True)
class Var:
    kind: str
    index: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"bad variable kind {self.kind!r}")
        if self.index < 0:
            raise ValueError("variable index must be non-negative")

    @property
    def is_prop(self) -> bool:
        return self.kind in PROP_LETTERS

    def __str__(self) -> str:
        return f"{self.kind}{self.index}"

    __repr__ = __str__


def var(text: str) -> Var:
    m = re.fullmatch(r"([pqrsjm])(\d+)", text.strip())
    if not m:
        raise ParseError(f"not a variable: {text!r}")
    return Var(m.group(1), int(m.group(2)))


def fresh_index(kind: str, used: Iterable[Var], above: int = -1) -> int:
    """Smallest index of the right parity for ``kind`` not in ``used``.

    Nominals get odd indices, conominals even ones, propositions any.
    Only indices strictly greater than ``above`` are considered.
    """
    taken = {v.index for v in used if v.kind == kind}
    i = above + 1
    while True:
        ok_parity = kind in PROP_LETTERS or (i % 2 == 1) == (kind == NOM)
        if ok_parity and i not in taken:
            return i
        i += 1


def fresh_var(kind: str, used: Iterable[Var], above: int = -1) -> Var:
    return Var(kind, fresh_index(kind, used, above))


class FreshSupply:
    """Per-derivation generator: strictly increasing odd nominals / even conominals."""

    def __init__(self, used: Iterable[Var] = ()):
        self._last = {k: -1 for k in KINDS}
        for v in used:
            self._last[v.kind] = max(self._last[v.kind], v.index)

    def reserve(self, vs: Iterable[Var]) -> None:
        for v in vs:
            self._last[v.kind] = max(self._last[v.kind], v.index)

    def __call__(self, kind: str) -> Var:
        v = fresh_var(kind, (), self._last[kind])
        self._last[kind] = v.index
        return v


# ----------------------------------------------------------------- formulas


class Formula:
    __slots__ = ()

    def vars(self) -> set[Var]:
        return set(_formula_atoms(self))

    def subformulas(self) -> set["Formula"]:
        out: set[Formula] = set()
        stack = [self]
        while stack:
            f = stack.pop()
            if f not in out:
                out.add(f)
                stack.extend(f.children())
        return out

    def children(self) -> tuple["Formula", ...]:
        return ()

    def __str__(self) -> str:
        return print_formula(self)


@dataclass(frozen=True)
class Atom(Formula):
    var: Var

    def __post_init__(self):
        if not self.var.is_prop:
            raise WellFormednessError(f"{self.var} cannot occur inside a formula")


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bot(Formula):
    pass


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Box(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Dia(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)


TOP, BOT = Top(), Bot()


def _formula_atoms(f: Formula) -> Iterator[Var]:
    if isinstance(f, Atom):
        yield f.var
    for c in f.children():
        yield from _formula_atoms(c)


def prop(i: int) -> Atom:
    return Atom(Var(PROP, i))


def formula_size(f: Formula) -> int:
    return 1 + sum(formula_size(c) for c in f.children())


# -------------------------------------------------------------------- terms

NOM_OPS = ("", "<>", "<#>")  # j, dia j, black-dia j
CONOM_OPS = ("", "[]", "[#]")  # m, box m, black-box m


@dataclass(frozen=True)
class Term:
    """Nominal term (``j``, ``<>j``, ``<#>j``) or conominal term (``m``, ``[]m``, ``[#]m``)."""

    op: str
    var: Var

    def __post_init__(self):
        ops = {NOM: NOM_OPS, CONOM: CONOM_OPS}.get(self.var.kind)
        if ops is None or self.op not in ops:
            raise WellFormednessError(f"bad term {self.op}{self.var}")

    @property
    def bare(self) -> bool:
        return self.op == ""

    @property
    def nominal(self) -> bool:
        return self.var.kind == NOM

    def vars(self) -> set[Var]:
        return {self.var}

    def __str__(self) -> str:
        return f"{self.op}{self.var}"


def nom(i: int, op: str = "") -> Term:
    return Term(op, Var(NOM, i))


def conom(i: int, op: str = "") -> Term:
    return Term(op, Var(CONOM, i))


Side = Union[Formula, Term]


def _bare(x: Side, kind: str) -> bool:
    return isinstance(x, Term) and x.bare and x.var.kind == kind


def _side_vars(x: Side) -> set[Var]:
    return x.vars()


# --------------------------------------------------------------- structures


@dataclass(frozen=True)
class Structure:
    lhs: Side
    rhs: Side

    def __post_init__(self):
        classify(self.lhs, self.rhs)

    @property
    def kind(self) -> str:
        return classify(self.lhs, self.rhs)

    @property
    def labelled(self) -> bool:
        return self.kind in (LAB_J, LAB_M)

    @property
    def formula(self) -> Formula | None:
        if isinstance(self.lhs, Formula):
            return self.lhs
        if isinstance(self.rhs, Formula):
            return self.rhs
        return None

    @property
    def label(self) -> Var:
        """The approximant variable (for ``j <= m`` the nominal)."""
        if _bare(self.lhs, NOM):
            return self.lhs.var  # type: ignore[union-attr]
        return self.rhs.var  # type: ignore[union-attr]

    def approximants(self) -> tuple[Var, ...]:
        out = []
        if _bare(self.lhs, NOM):
            out.append(self.lhs.var)  # type: ignore[union-attr]
        if _bare(self.rhs, CONOM):
            out.append(self.rhs.var)  # type: ignore[union-attr]
        return tuple(out)

    def vars(self) -> set[Var]:
        return _side_vars(self.lhs) | _side_vars(self.rhs)

    def term_vars(self) -> set[Var]:
        return {v for v in self.vars() if not v.is_prop}

    def occurrences(self) -> list[tuple[Var, str]]:
        """Nominal/conominal occurrences with the side ('lhs'/'rhs') they sit on."""
        out = []
        for side, x in (("lhs", self.lhs), ("rhs", self.rhs)):
            if isinstance(x, Term):
                out.append((x.var, side))
        return out

    def displays(self, v: Var) -> bool:
        if v.kind == NOM:
            return _bare(self.lhs, NOM) and self.lhs.var == v  # type: ignore[union-attr]
        if v.kind == CONOM:
            return _bare(self.rhs, CONOM) and self.rhs.var == v  # type: ignore[union-attr]
        return False

    def __str__(self) -> str:
        return print_structure(self)


def classify(lhs: Side, rhs: Side) -> str:
    lf, rf = isinstance(lhs, Formula), isinstance(rhs, Formula)
    if lf and rf:
        raise WellFormednessError(f"two formulas in one structure: {lhs} <= {rhs}")
    if rf:
        if _bare(lhs, NOM):
            return LAB_J
        raise WellFormednessError(f"formula on the right needs a bare nominal on the left: {lhs} <= {rhs}")
    if lf:
        if _bare(rhs, CONOM):
            return LAB_M
        raise WellFormednessError(f"formula on the left needs a bare conominal on the right: {lhs} <= {rhs}")
    if _bare(lhs, NOM):
        if rhs.var == lhs.var:  # type: ignore[union-attr]
            raise WellFormednessError(f"{lhs} occurs in its own term {rhs}")
        return PURE_J
    if _bare(rhs, CONOM):
        if lhs.var == rhs.var:  # type: ignore[union-attr]
            raise WellFormednessError(f"{rhs} occurs in its own term {lhs}")
        return PURE_M
    raise WellFormednessError(f"no bare approximant in {lhs} <= {rhs}")


def lab_j(i: int | Var, f: Formula) -> Structure:
    v = i if isinstance(i, Var) else Var(NOM, i)
    return Structure(Term("", v), f)


def lab_m(f: Formula, i: int | Var) -> Structure:
    v = i if isinstance(i, Var) else Var(CONOM, i)
    return Structure(f, Term("", v))


# ----------------------------------------------------------------- sequents

Locator = tuple[str, int]


@dataclass(frozen=True)
class Sequent:
    ant: tuple[Structure, ...]
    con: tuple[Structure, ...]

    def __init__(self, ant: Iterable[Structure] = (), con: Iterable[Structure] = ()):
        object.__setattr__(self, "ant", tuple(ant))
        object.__setattr__(self, "con", tuple(con))

    def side(self, name: str) -> tuple[Structure, ...]:
        return self.ant if name == ANT else self.con

    def __getitem__(self, loc: Locator) -> Structure:
        side, i = loc
        items = self.side(side)
        if side not in (ANT, CON) or not 0 <= i < len(items):
            raise IndexError(f"no structure at {side}:{i}")
        return items[i]

    def locators(self) -> list[Locator]:
        return [(ANT, i) for i in range(len(self.ant))] + [(CON, i) for i in range(len(self.con))]

    def items(self) -> list[tuple[Locator, Structure]]:
        return [(loc, self[loc]) for loc in self.locators()]

    def vars(self) -> set[Var]:
        out: set[Var] = set()
        for s in self.ant + self.con:
            out |= s.vars()
        return out

    def term_vars(self) -> set[Var]:
        return {v for v in self.vars() if not v.is_prop}

    def size(self) -> int:
        return len(self.ant) + len(self.con)

    def multiset_eq(self, other: "Sequent") -> bool:
        return sorted(map(str, self.ant)) == sorted(map(str, other.ant)) and sorted(
            map(str, self.con)
        ) == sorted(map(str, other.con))

    def __str__(self) -> str:
        return print_sequent(self)


def loc_str(loc: Locator) -> str:
    return f"{loc[0]}:{loc[1]}"


def parse_loc(x: str | int | Sequence) -> Locator:
    """Accepts ``"ant:0"``, ``"con:1"``, a bare int (antecedent index) or a pair."""
    if isinstance(x, bool):
        raise ValueError(f"bad locator {x!r}")
    if isinstance(x, int):
        return (ANT, x)
    if isinstance(x, str):
        m = re.fullmatch(r"\s*(ant|con)\s*[:.]\s*(\d+)\s*", x)
        if not m:
            raise ValueError(f"bad locator {x!r}")
        return (m.group(1), int(m.group(2)))
    side, i = x
    if side not in (ANT, CON):
        raise ValueError(f"bad locator {x!r}")
    return (side, int(i))


# ----------------------------------------------------------------- polarity


def structure_position(s: Structure, side: str) -> str:
    """Position of a structure occurrence given the side of the sequent it is on."""
    in_ant = side == ANT
    if s.kind in (LAB_J, PURE_J):
        return PRE if in_ant else SUC
    return SUC if in_ant else PRE


def position_of(s: Sequent, loc: Locator | str | int) -> str:
    loc = parse_loc(loc) if not isinstance(loc, tuple) else loc
    return structure_position(s[loc], loc[0])


def occurrence_polarity(on_lhs: bool, side: str) -> str:
    """Polarity of a variable occurrence: lhs of an antecedent structure is precedent."""
    return PRE if on_lhs == (side == ANT) else SUC


def var_profile(s: Sequent) -> dict[Var, list[tuple[Locator, str]]]:
    out: dict[Var, list[tuple[Locator, str]]] = {}
    for loc, st in s.items():
        for v, where in st.occurrences():
            out.setdefault(v, []).append((loc, occurrence_polarity(where == "lhs", loc[0])))
    return dict(sorted(out.items()))


def exact_two_violations(s: Sequent) -> list[str]:
    """Variables not occurring exactly twice with opposite polarity."""
    bad = []
    for v, occ in var_profile(s).items():
        pols = sorted(p for _, p in occ)
        if pols != [PRE, SUC]:
            bad.append(f"{v} occurs {len(occ)}x with polarities {pols}")
    return bad


def exact_two(s: Sequent) -> bool:
    return not exact_two_violations(s)


# ------------------------------------------------------------------ display


def var_displayed_everywhere(s: Sequent, v: Var) -> bool:
    return all(st.displays(v) for st in s.ant + s.con if v in st.term_vars())


def in_display(s: Sequent, loc: Locator) -> bool:
    """A structure is in display when one of its approximants is displayed in
    every structure of ``s`` in which it occurs."""
    st = s[loc]
    return any(var_displayed_everywhere(s, v) for v in st.approximants())


def twin(s: Sequent, loc: Locator, v: Var) -> Locator | None:
    """Locator of the other structure containing ``v`` when ``v`` occurs exactly twice."""
    hits = [l for l, st in s.items() if v in st.term_vars() and l != loc]
    return hits[0] if len(hits) == 1 else None


# ------------------------------------------------------------------ renaming


def _rn_side(x: Side, sigma: Mapping[Var, Var]) -> Side:
    if isinstance(x, Term):
        return Term(x.op, sigma.get(x.var, x.var))
    return x


def _rn_formula(f: Formula, sigma: Mapping[Var, Var]) -> Formula:
    if isinstance(f, Atom):
        return Atom(sigma.get(f.var, f.var))
    if isinstance(f, (And, Or)):
        return type(f)(_rn_formula(f.left, sigma), _rn_formula(f.right, sigma))
    if isinstance(f, (Box, Dia)):
        return type(f)(_rn_formula(f.arg, sigma))
    return f


def rename_structure(st: Structure, sigma: Mapping[Var, Var]) -> Structure:
    def one(x: Side) -> Side:
        return _rn_side(x, sigma) if isinstance(x, Term) else _rn_formula(x, sigma)

    return Structure(one(st.lhs), one(st.rhs))


def rename_sequent(s: Sequent, sigma: Mapping[Var, Var]) -> Sequent:
    return Sequent([rename_structure(x, sigma) for x in s.ant], [rename_structure(x, sigma) for x in s.con])


def check_renaming(sigma: Mapping[Var, Var], present: set[Var]) -> None:
    for a, b in sigma.items():
        if a.kind != b.kind:
            raise RenamingError(f"renaming {a}->{b} changes the variable kind")
    relevant = {a: b for a, b in sigma.items() if a in present}
    images = list(relevant.values())
    if len(set(images)) != len(images):
        raise RenamingError("renaming is not injective on the variables present")
    for a, b in relevant.items():
        if b in present and b not in relevant and b != a:
            raise RenamingError(f"renaming {a}->{b} collides with an untouched occurrence of {b}")


def rename(x, sigma: Mapping[Var, Var]):
    """Simultaneous, capture-free renaming of a sequent, structure or derivation."""
    if hasattr(x, "rename"):
        return x.rename(sigma)
    if isinstance(x, Sequent):
        check_renaming(sigma, x.vars())
        return rename_sequent(x, sigma)
    if isinstance(x, Structure):
        check_renaming(sigma, x.vars())
        return rename_structure(x, sigma)
    raise TypeError(f"cannot rename {type(x).__name__}")


# -------------------------------------------------------------- alpha checks


def _shape(st: Structure, names: Mapping[Var, str] | None = None) -> str:
    def side(x: Side) -> str:
        if isinstance(x, Term):
            n = names.get(x.var, "?") if names is not None else x.var.kind
            return f"{x.op}{n}"
        return print_formula(x)

    return f"{side(st.lhs)}<={side(st.rhs)}"


def alpha_key(s: Sequent, ordered: bool = False) -> tuple:
    """Renaming-invariant key (sound, not complete, as an equivalence test).

    Equal keys imply alpha-equivalence; the converse holds in the common case
    where structure shapes do not repeat.
    """
    sides = []
    for side in (s.ant, s.con):
        items = list(side) if ordered else sorted(side, key=lambda st: (_shape(st), str(st)))
        sides.append(items)
    names: dict[Var, str] = {}
    for st in sides[0] + sides[1]:
        for v, _ in st.occurrences():
            if v not in names:
                names[v] = f"{v.kind}_{len(names)}"
    out = tuple(tuple(_shape(st, names) for st in items) for items in sides)
    if not ordered:
        out = tuple(tuple(sorted(x)) for x in out)
    return out


def alpha_equivalent(a: Sequent, b: Sequent, ordered: bool = False) -> bool:
    """Equality up to a bijective, kind-preserving renaming of nominals/conominals."""
    return alpha_match(a, b, ordered) is not None


def alpha_match(a: Sequent, b: Sequent, ordered: bool = False) -> dict[Var, Var] | None:
    if len(a.ant) != len(b.ant) or len(a.con) != len(b.con):
        return None
    if sorted(map(_shape, a.ant)) != sorted(map(_shape, b.ant)):
        return None
    if sorted(map(_shape, a.con)) != sorted(map(_shape, b.con)):
        return None
    pairs_a = [(ANT, x) for x in a.ant] + [(CON, x) for x in a.con]
    pools = {ANT: list(b.ant), CON: list(b.con)}
    used = {ANT: [False] * len(b.ant), CON: [False] * len(b.con)}

    def unify(x: Structure, y: Structure, fwd: dict, bwd: dict) -> list | None:
        added = []
        if _shape(x) != _shape(y):
            return None
        for (u, _), (w, _) in zip(x.occurrences(), y.occurrences()):
            if u in fwd:
                if fwd[u] != w:
                    _undo(added, fwd, bwd)
                    return None
            elif w in bwd:
                _undo(added, fwd, bwd)
                return None
            else:
                fwd[u], bwd[w] = w, u
                added.append(u)
        return added

    def go(i: int, fwd: dict, bwd: dict) -> dict | None:
        if i == len(pairs_a):
            return dict(fwd)
        side, x = pairs_a[i]
        candidates = range(len(pools[side]))
        if ordered:
            k = i if side == ANT else i - len(a.ant)
            candidates = [k]
        for k in candidates:
            if used[side][k]:
                continue
            added = unify(x, pools[side][k], fwd, bwd)
            if added is None:
                continue
            used[side][k] = True
            res = go(i + 1, fwd, bwd)
            if res is not None:
                return res
            used[side][k] = False
            _undo(added, fwd, bwd)
        return None

    return go(0, {}, {})


def _undo(added: list, fwd: dict, bwd: dict) -> None:
    for u in added:
        bwd.pop(fwd.pop(u))
    added.clear()


# ------------------------------------------------------------------ printing

_PREC = {And: "&", Or: "|"}


def print_formula(f: Formula) -> str:
    if isinstance(f, Atom):
        return str(f.var)
    if isinstance(f, Top):
        return "T"
    if isinstance(f, Bot):
        return "F"
    if isinstance(f, Box):
        return "[]" + _unary_arg(f.arg)
    if isinstance(f, Dia):
        return "<>" + _unary_arg(f.arg)
    if isinstance(f, (And, Or)):
        sym = _PREC[type(f)]
        left = print_formula(f.left)
        if isinstance(f.left, (And, Or)) and type(f.left) is not type(f):
            left = f"({left})"
        right = print_formula(f.right)
        if isinstance(f.right, (And, Or)):
            right = f"({right})"
        return f"{left} {sym} {right}"
    raise TypeError(f"not a formula: {f!r}")


def _unary_arg(f: Formula) -> str:
    s = print_formula(f)
    return f"({s})" if isinstance(f, (And, Or)) else s


def print_side(x: Side) -> str:
    return str(x) if isinstance(x, Term) else print_formula(x)


def print_structure(st: Structure) -> str:
    return f"{print_side(st.lhs)} <= {print_side(st.rhs)}"


def print_sequent(s: Sequent) -> str:
    ant = ", ".join(map(print_structure, s.ant))
    con = ", ".join(map(print_structure, s.con))
    return f"{ant} |- {con}".strip()


_UNICODE = [("[#]", "■"), ("<#>", "◆"), ("[]", "□"), ("<>", "◇"), ("|-", "⊢"), ("<=", "≤"), ("&", "∧"), ("|", "∨")]


def pretty(s: Sequent | Structure) -> str:
    """Unicode rendering, for humans only."""
    text = str(s)
    text = text.replace("|-", "\0")
    for a, b in _UNICODE:
        text = text.replace(a, b)
    text = re.sub(r"\bT\b", "⊤", re.sub(r"\bF\b", "⊥", text))
    return text.replace("\0", "⊢")


# ------------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<turn>\|-|⊢)|(?P<leq><=|≤)|(?P<geq>>=|≥)|(?P<op>\[#\]|<#>|\[\]|<>|[□◇■◆])"
    r"|(?P<bin>[&|∧∨])|(?P<var>[pqrsjm]\d+)|(?P<const>[TF⊤⊥])|(?P<lp>\()|(?P<rp>\))|(?P<comma>,))"
)
_OPMAP = {"□": "[]", "◇": "<>", "■": "[#]", "◆": "<#>"}
_BINMAP = {"∧": "&", "∨": "|"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    out, i = [], 0
    while i < len(text):
        if text[i:].strip() == "":
            break
        m = _TOKEN.match(text, i)
        if not m or m.end() == i:
            j = i
            while j < len(text) and text[j].isspace():
                j += 1
            raise ParseError(f"unexpected character {text[j]!r}", j)
        kind = m.lastgroup
        val = m.group(kind)
        val = _OPMAP.get(val, val)
        val = _BINMAP.get(val, val)
        if val in ("⊤", "⊥"):
            val = "T" if val == "⊤" else "F"
        out.append((kind, val, m.start(kind)))
        i = m.end()
    out.append(("eof", "", len(text)))
    return out


@dataclass
class _Node:
    """Untyped parse tree; resolved to Formula or Term afterwards."""

    tag: str  # var | const | un | bin
    val: str
    kids: tuple
    pos: int


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.toks[self.i]

    def take(self, kind: str | None = None) -> tuple[str, str, int]:
        t = self.toks[self.i]
        if kind is not None and t[0] != kind:
            what = t[1] or "end of input"
            raise ParseError(f"expected {kind}, found {what!r}", t[2])
        self.i += 1
        return t

    def sequent(self) -> Sequent:
        ant = self.side(stop="turn")
        self.take("turn")
        con = self.side(stop="eof")
        self.take("eof")
        return Sequent(ant, con)

    def side(self, stop: str) -> list[Structure]:
        out: list[Structure] = []
        if self.peek()[0] == stop:
            return out
        out.append(self.structure())
        while self.peek()[0] == "comma":
            self.take()
            out.append(self.structure())
        return out

    def structure(self) -> Structure:
        pos = self.peek()[2]
        left = self.expr()
        t = self.peek()
        if t[0] not in ("leq", "geq"):
            raise ParseError(f"expected '<=', found {t[1] or 'end of input'!r}", t[2])
        self.take()
        right = self.expr()
        if t[0] == "geq":
            left, right = right, left
        return _build_structure(_resolve(left), _resolve(right), pos)

    def expr(self) -> _Node:
        node = self.unary()
        sym = None
        while self.peek()[0] == "bin":
            _, op, pos = self.take()
            if sym is not None and op != sym:
                raise ParseError("mixing '&' and '|' requires parentheses", pos)
            sym = op
            node = _Node("bin", op, (node, self.unary()), pos)
        return node

    def unary(self) -> _Node:
        kind, val, pos = self.peek()
        if kind == "op":
            self.take()
            return _Node("un", val, (self.unary(),), pos)
        if kind == "var":
            self.take()
            return _Node("var", val, (), pos)
        if kind == "const":
            self.take()
            return _Node("const", val, (), pos)
        if kind == "lp":
            self.take()
            node = self.expr()
            self.take("rp")
            return node
        raise ParseError(f"unexpected {val or 'end of input'!r}", pos)


def _has_term_var(n: _Node) -> bool:
    if n.tag == "var":
        return n.val[0] in (NOM, CONOM)
    return any(_has_term_var(k) for k in n.kids)


def _resolve(n: _Node) -> Side:
    if _has_term_var(n):
        return _to_term(n)
    return _to_formula(n)


def _to_term(n: _Node) -> Term:
    if n.tag == "var":
        return Term("", var(n.val))
    if n.tag == "un" and n.kids[0].tag == "var" and n.kids[0].val[0] in (NOM, CONOM):
        v = var(n.kids[0].val)
        allowed = NOM_OPS if v.kind == NOM else CONOM_OPS
        if n.val not in allowed:
            raise ParseError(f"operator {n.val} does not apply to {v}", n.pos)
        return Term(n.val, v)
    raise ParseError("nominals and conominals only occur in depth-one terms", n.pos)


def _to_formula(n: _Node) -> Formula:
    if n.tag == "var":
        return Atom(var(n.val))
    if n.tag == "const":
        return TOP if n.val == "T" else BOT
    if n.tag == "un":
        if n.val == "[]":
            return Box(_to_formula(n.kids[0]))
        if n.val == "<>":
            return Dia(_to_formula(n.kids[0]))
        raise ParseError(f"{n.val} applies to terms only", n.pos)
    a, b = (_to_formula(k) for k in n.kids)
    return And(a, b) if n.val == "&" else Or(a, b)


def _build_structure(lhs: Side, rhs: Side, pos: int) -> Structure:
    try:
        return Structure(lhs, rhs)
    except WellFormednessError as e:
        if isinstance(lhs, Term) and isinstance(rhs, Term) and (
            (lhs.bare and lhs.var == rhs.var) or (rhs.bare and rhs.var == lhs.var)
        ):
            raise WellFormednessError(f"{e} (at {pos})") from None
        if isinstance(lhs, Formula) and isinstance(rhs, Formula):
            raise ParseError(str(e), pos) from None
        raise WellFormednessError(f"{e} (at {pos})") from None


def parse_sequent(text: str) -> Sequent:
    return _Parser(text).sequent()


def parse_structure(text: str) -> Structure:
    p = _Parser(text)
    st = p.structure()
    p.take("eof")
    return st


def parse_formula(text: str) -> Formula:
    p = _Parser(text)
    n = p.expr()
    p.take("eof")
    if _has_term_var(n):
        raise ParseError("expected a formula, found a term", n.pos)
    return _to_formula(n)


def parse_side(text: str) -> Side:
    p = _Parser(text)
    n = p.expr()
    p.take("eof")
    return _resolve(n)


S = parse_sequent  # short alias for tests and interactive use


def map_structures(s: Sequent, fn: Callable[[Structure], Structure]) -> Sequent:
    return Sequent(map(fn, s.ant), map(fn, s.con))


def permuted(s: Sequent) -> Iterator[Sequent]:
    """All orderings (small sequents only)."""
    for a in permutations(s.ant):
        for c in permutations(s.con):
            yield Sequent(a, c)
