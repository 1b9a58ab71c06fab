"""Finite lattices with normal modal operators, used as a semantic oracle.

A finite lattice is perfect, so nominals range over the completely
join-irreducible elements and conominals over the completely
meet-irreducible ones.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

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
    Sequent,
    Structure,
    Term,
    Top,
    Var,
)


class ModelError(ValueError):
    pass


def _meet_table(leq: Sequence[Sequence[bool]], n: int, upper: bool) -> tuple[tuple[int, ...], ...]:
    """Binary join (``upper``) or meet table from an order; raises if absent."""
    rows = []
    for a in range(n):
        row = []
        for b in range(n):
            if upper:
                bounds = [c for c in range(n) if leq[a][c] and leq[b][c]]
                best = [c for c in bounds if all(leq[c][d] for d in bounds)]
            else:
                bounds = [c for c in range(n) if leq[c][a] and leq[c][b]]
                best = [c for c in bounds if all(leq[d][c] for d in bounds)]
            if len(best) != 1:
                raise ModelError(f"elements {a},{b} have no {'join' if upper else 'meet'}")
            row.append(best[0])
        rows.append(tuple(row))
    return tuple(rows)


@dataclass(frozen=True)
class LatticeModel:
    """Bounded lattice on 0..n-1 with a normal box and diamond."""

    size: int
    leq: tuple[tuple[bool, ...], ...]
    box: tuple[int, ...]
    dia: tuple[int, ...]
    name: str = field(default="", compare=False)

    @classmethod
    def make(cls, leq, box: Sequence[int], dia: Sequence[int], name: str = "") -> "LatticeModel":
        n = len(leq)
        m = cls(n, tuple(tuple(bool(x) for x in row) for row in leq), tuple(box), tuple(dia), name)
        m.validate()
        return m

    # -- lattice structure
    @cached_property
    def join(self) -> tuple[tuple[int, ...], ...]:
        return _meet_table(self.leq, self.size, True)

    @cached_property
    def meet(self) -> tuple[tuple[int, ...], ...]:
        return _meet_table(self.leq, self.size, False)

    @cached_property
    def top(self) -> int:
        return next(a for a in range(self.size) if all(self.leq[b][a] for b in range(self.size)))

    @cached_property
    def bot(self) -> int:
        return next(a for a in range(self.size) if all(self.leq[a][b] for b in range(self.size)))

    def join_all(self, xs: Iterable[int]) -> int:
        out = self.bot
        for x in xs:
            out = self.join[out][x]
        return out

    def meet_all(self, xs: Iterable[int]) -> int:
        out = self.top
        for x in xs:
            out = self.meet[out][x]
        return out

    def validate(self) -> None:
        n, le = self.size, self.leq
        if n < 1:
            raise ModelError("empty carrier")
        for a in range(n):
            if not le[a][a]:
                raise ModelError("order not reflexive")
            for b in range(n):
                if a != b and le[a][b] and le[b][a]:
                    raise ModelError("order not antisymmetric")
                for c in range(n):
                    if le[a][b] and le[b][c] and not le[a][c]:
                        raise ModelError("order not transitive")
        _ = self.join, self.meet, self.top, self.bot
        if len(self.box) != n or len(self.dia) != n:
            raise ModelError("operator tables have the wrong length")
        if self.box[self.top] != self.top:
            raise ModelError("box does not preserve top")
        if self.dia[self.bot] != self.bot:
            raise ModelError("diamond does not preserve bottom")
        for a in range(n):
            for b in range(n):
                if self.box[self.meet[a][b]] != self.meet[self.box[a]][self.box[b]]:
                    raise ModelError("box does not preserve meets")
                if self.dia[self.join[a][b]] != self.join[self.dia[a]][self.dia[b]]:
                    raise ModelError("diamond does not preserve joins")

    # -- irreducibles and adjoints
    @cached_property
    def jinf(self) -> tuple[int, ...]:
        out = []
        for a in range(self.size):
            below = [b for b in range(self.size) if b != a and self.leq[b][a]]
            if a != self.bot and self.join_all(below) != a:
                out.append(a)
        return tuple(out)

    @cached_property
    def minf(self) -> tuple[int, ...]:
        out = []
        for a in range(self.size):
            above = [b for b in range(self.size) if b != a and self.leq[a][b]]
            if a != self.top and self.meet_all(above) != a:
                out.append(a)
        return tuple(out)

    @cached_property
    def bdia(self) -> tuple[int, ...]:
        """Left adjoint of box: bdia(u) <= v iff u <= box(v)."""
        return tuple(self.meet_all(v for v in range(self.size) if self.leq[u][self.box[v]]) for u in range(self.size))

    @cached_property
    def bbox(self) -> tuple[int, ...]:
        """Right adjoint of diamond: dia(v) <= u iff v <= bbox(u)."""
        return tuple(self.join_all(v for v in range(self.size) if self.leq[self.dia[v]][u]) for u in range(self.size))

    def is_distributive(self) -> bool:
        r = range(self.size)
        return all(self.meet[a][self.join[b][c]] == self.join[self.meet[a][b]][self.meet[a][c]] for a in r for b in r for c in r)

    # -- serialization
    def to_json(self) -> dict:
        return {
            "size": self.size,
            "leq": ["".join("1" if x else "0" for x in row) for row in self.leq],
            "box": list(self.box),
            "dia": list(self.dia),
            "name": self.name,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "LatticeModel":
        rows = [[c == "1" for c in row] if isinstance(row, str) else [bool(x) for x in row] for row in obj["leq"]]
        if len(rows) != obj.get("size", len(rows)):
            raise ModelError("size does not match leq")
        return cls.make(rows, obj["box"], obj["dia"], obj.get("name", ""))

    def __str__(self) -> str:
        return self.name or f"model[{self.size}]"


def adjoints(m: LatticeModel) -> tuple[tuple[int, ...], tuple[int, ...]]:
    return m.bdia, m.bbox


def irreducibles(m: LatticeModel) -> tuple[frozenset, frozenset]:
    return frozenset(m.jinf), frozenset(m.minf)


def save_model(m: LatticeModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(m.to_json()) + "\n")


def load_model(path: str | Path) -> LatticeModel:
    return LatticeModel.from_json(json.loads(Path(path).read_text()))


# ------------------------------------------------------------------- lattices


def chain(n: int) -> list[list[bool]]:
    return [[a <= b for b in range(n)] for a in range(n)]


def boolean4() -> list[list[bool]]:
    # 0 = bottom, 1 = a, 2 = b, 3 = top
    return [[(a & b) == a for b in range(4)] for a in range(4)]


def m3() -> list[list[bool]]:
    le = [[a == b for b in range(5)] for a in range(5)]
    for a in range(5):
        le[0][a] = True
        le[a][4] = True
    return le


def n5() -> list[list[bool]]:
    # 0 < 1 < 2 < 4, 0 < 3 < 4, 3 incomparable with 1 and 2
    pairs = {(0, 1), (1, 2), (2, 4), (0, 3), (3, 4)}
    le = [[a == b or (a, b) in pairs for b in range(5)] for a in range(5)]
    for k in range(5):
        for a in range(5):
            for b in range(5):
                if le[a][k] and le[k][b]:
                    le[a][b] = True
    return le


FIXED_LATTICES = [
    ("chain2", chain(2)),
    ("chain3", chain(3)),
    ("chain4", chain(4)),
    ("chain5", chain(5)),
    ("boolean4", boolean4()),
    ("M3", m3()),
    ("N5", n5()),
]


def _bare(leq) -> LatticeModel:
    n = len(leq)
    return LatticeModel(n, tuple(tuple(r) for r in leq), tuple(range(n)), tuple(range(n)))


def normal_boxes(leq) -> list[tuple[int, ...]]:
    """All maps preserving finite meets (hence monotone with box(top)=top)."""
    base = _bare(leq)
    n = base.size
    out = []
    for vals in itertools.product(range(n), repeat=len(base.minf)):
        b = dict(zip(base.minf, vals))
        box = tuple(base.meet_all(b[m] for m in base.minf if base.leq[x][m]) for x in range(n))
        if all(box[base.meet[x][y]] == base.meet[box[x]][box[y]] for x in range(n) for y in range(n)):
            out.append(box)
    return sorted(set(out))


def normal_diamonds(leq) -> list[tuple[int, ...]]:
    base = _bare(leq)
    n = base.size
    out = []
    for vals in itertools.product(range(n), repeat=len(base.jinf)):
        d = dict(zip(base.jinf, vals))
        dia = tuple(base.join_all(d[j] for j in base.jinf if base.leq[j][x]) for x in range(n))
        if all(dia[base.join[x][y]] == base.join[dia[x]][dia[y]] for x in range(n) for y in range(n)):
            out.append(dia)
    return sorted(set(out))


def _pairs(boxes: list, dias: list, cap: int = 100) -> list[tuple]:
    if len(boxes) * len(dias) <= cap:
        return [(b, d) for b in boxes for d in dias]
    seen, out = set(), []
    for i in range(max(len(boxes), len(dias))):
        pr = (boxes[i % len(boxes)], dias[i % len(dias)])
        if pr not in seen:
            seen.add(pr)
            out.append(pr)
    return out


def fixed_family() -> list[LatticeModel]:
    """Chains 2-5, the four-element Boolean lattice, M3 and N5, each with
    every normal (box, diamond) pair, or a covering selection when there are
    more than a hundred pairs."""
    out = []
    for name, leq in FIXED_LATTICES:
        for k, (b, d) in enumerate(_pairs(normal_boxes(leq), normal_diamonds(leq))):
            out.append(LatticeModel.make(leq, b, d, f"{name}#{k}"))
    return out


def random_lattice(rng: random.Random, max_size: int) -> list[list[bool]]:
    """A random lattice as a closure system on a small ground set."""
    while True:
        ground = rng.randint(2, 4)
        full = (1 << ground) - 1
        sets = {full}
        for _ in range(rng.randint(2, max_size)):
            sets.add(rng.randrange(0, full + 1))
        changed = True
        while changed:
            changed = False
            for a in list(sets):
                for b in list(sets):
                    if a & b not in sets:
                        sets.add(a & b)
                        changed = True
        if 2 <= len(sets) <= max_size:
            elems = sorted(sets, key=lambda s: (bin(s).count("1"), s))
            return [[(a & b) == a for b in elems] for a in elems]


def random_model(rng: random.Random, max_size: int, tries: int = 200) -> LatticeModel:
    while True:
        leq = random_lattice(rng, max_size)
        base = _bare(leq)
        n = base.size
        box = dia = None
        for _ in range(tries):
            b = {m: rng.randrange(n) for m in base.minf}
            cand = tuple(base.meet_all(b[m] for m in base.minf if base.leq[x][m]) for x in range(n))
            if all(cand[base.meet[x][y]] == base.meet[cand[x]][cand[y]] for x in range(n) for y in range(n)):
                box = cand
                break
        for _ in range(tries):
            d = {j: rng.randrange(n) for j in base.jinf}
            cand = tuple(base.join_all(d[j] for j in base.jinf if base.leq[j][x]) for x in range(n))
            if all(cand[base.join[x][y]] == base.join[cand[x]][cand[y]] for x in range(n) for y in range(n)):
                dia = cand
                break
        if box is not None and dia is not None:
            return LatticeModel.make(leq, box, dia, f"random{n}")


def enumerate_models(max_size: int = 6, seed: int = 0, count: int = 100) -> Iterator[LatticeModel]:
    """The fixed family, then ``count`` seeded random models of size <= max_size."""
    if max_size > 7:
        raise ValueError("max_size is capped at 7")
    for m in fixed_family():
        if m.size <= max_size:
            yield m
    rng = random.Random(seed)
    for k in range(count):
        m = random_model(rng, max_size)
        yield LatticeModel(m.size, m.leq, m.box, m.dia, f"random{m.size}#{k}")


# ------------------------------------------------------------------ evaluation


def eval_formula(m: LatticeModel, f: Formula, env: Mapping[Var, int]) -> int:
    if isinstance(f, Atom):
        return env[f.var]
    if isinstance(f, Top):
        return m.top
    if isinstance(f, Bot):
        return m.bot
    if isinstance(f, And):
        return m.meet[eval_formula(m, f.left, env)][eval_formula(m, f.right, env)]
    if isinstance(f, Or):
        return m.join[eval_formula(m, f.left, env)][eval_formula(m, f.right, env)]
    if isinstance(f, Box):
        return m.box[eval_formula(m, f.arg, env)]
    if isinstance(f, Dia):
        return m.dia[eval_formula(m, f.arg, env)]
    raise TypeError(f"not a formula: {f!r}")


_TERM_OPS = {"": None, "<>": "dia", "<#>": "bdia", "[]": "box", "[#]": "bbox"}


def eval_term(m: LatticeModel, t: Term, env: Mapping[Var, int]) -> int:
    x = env[t.var]
    op = _TERM_OPS[t.op]
    return x if op is None else getattr(m, op)[x]


def eval_side(m: LatticeModel, x, env) -> int:
    return eval_term(m, x, env) if isinstance(x, Term) else eval_formula(m, x, env)


def holds(m: LatticeModel, st: Structure, env: Mapping[Var, int]) -> bool:
    return m.leq[eval_side(m, st.lhs, env)][eval_side(m, st.rhs, env)]


def domain(m: LatticeModel, v: Var) -> tuple[int, ...]:
    if v.kind == NOM:
        return m.jinf
    if v.kind == CONOM:
        return m.minf
    return tuple(range(m.size))


MAX_VARS_PER_KIND = 4


def countermodel(m: LatticeModel, s: Sequent) -> dict[Var, int] | None:
    """An assignment making every antecedent true and every consequent false."""
    vs = sorted(s.vars(), key=lambda v: (v.is_prop, v.kind, v.index))
    by_kind: dict[str, int] = {}
    for v in vs:
        k = "prop" if v.is_prop else v.kind
        by_kind[k] = by_kind.get(k, 0) + 1
    if any(c > MAX_VARS_PER_KIND for c in by_kind.values()):
        raise ValueError(f"sequent has more than {MAX_VARS_PER_KIND} variables of one kind")
    # check each structure as soon as its variables are assigned
    order = {v: i for i, v in enumerate(vs)}
    ready: list[list[tuple[bool, Structure]]] = [[] for _ in vs]
    closed: list[tuple[bool, Structure]] = []
    for sd, sts in ((True, s.ant), (False, s.con)):
        for st in sts:
            own = st.vars()
            if own:
                ready[max(order[v] for v in own)].append((sd, st))
            else:
                closed.append((sd, st))
    env: dict[Var, int] = {}
    for is_ant, st in closed:
        if holds(m, st, env) != is_ant:
            return None

    def go(i: int) -> bool:
        if i == len(vs):
            return True
        for val in domain(m, vs[i]):
            env[vs[i]] = val
            if all(holds(m, st, env) == is_ant for is_ant, st in ready[i]) and go(i + 1):
                return True
        del env[vs[i]]
        return False

    return dict(env) if go(0) else None


def sequent_valid(m: LatticeModel, s: Sequent) -> bool:
    return countermodel(m, s) is None


# --------------------------------------------------------------------- axioms

AXIOM_CHECKS = {
    "T": lambda m, x: m.leq[m.box[x]][x],
    "4": lambda m, x: m.leq[m.dia[m.dia[x]]][m.dia[x]],
    "B": lambda m, x: m.leq[x][m.box[m.dia[x]]],
    "D": lambda m, x: m.leq[m.box[x]][m.dia[x]],
    "C": lambda m, x: m.leq[m.dia[m.box[x]]][m.box[m.dia[x]]],
}


def satisfies_axiom(m: LatticeModel, name: str) -> bool:
    return all(AXIOM_CHECKS[name](m, x) for x in range(m.size))


def satisfies(m: LatticeModel, sigma: Iterable[str]) -> bool:
    return all(satisfies_axiom(m, a) for a in sigma)


# ----------------------------------------------------------- quasi-inequalities


def quasi_valid(m: LatticeModel, q) -> bool:
    """Evaluate a quantified quasi-inequality.

    ``q.prefix`` lists (quantifier, Var) pairs with quantifier "forall" or
    "exists"; ``q.body.holds(m, env)`` decides the matrix.
    """
    prefix = list(q.prefix)
    for quant, v in prefix:
        if quant not in ("forall", "exists"):
            raise ValueError(f"malformed prefix entry {quant!r}")
    env: dict[Var, int] = {}

    def go(i: int) -> bool:
        if i == len(prefix):
            return bool(q.body.holds(m, env))
        quant, v = prefix[i]
        results = []
        for val in domain(m, v):
            env[v] = val
            r = go(i + 1)
            if quant == "forall" and not r:
                del env[v]
                return False
            if quant == "exists" and r:
                del env[v]
                return True
            results.append(r)
        env.pop(v, None)
        return quant == "forall"

    return go(0)


# ------------------------------------------------------------------- pruning


class SemanticFilter:
    """Sound pruning predicate for proof search: True when some model of a
    small Σ-family refutes the sequent."""

    def __init__(self, sigma: Iterable[str], max_size: int = 4):
        self.models = [mm for mm in fixed_family() if mm.size <= max_size and satisfies(mm, sigma)]
        self._cache: dict = {}

    def __call__(self, s: Sequent) -> bool:
        from .syntax import alpha_key

        key = alpha_key(s)
        if key not in self._cache:
            try:
                self._cache[key] = any(countermodel(mm, s) is not None for mm in self.models)
            except ValueError:
                self._cache[key] = False
        return self._cache[key]
