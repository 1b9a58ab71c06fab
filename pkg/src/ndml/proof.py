"""Derivations: construction, serialization, congruence analysis and checking,
plus an iterative-deepening backward prover."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Mapping, Sequence

from .calculus import (
    INVERTIBLE,
    J_INTRO,
    M_INTRO,
    NON_INVERTIBLE,
    RULES,
    CalcConfig,
    MV,
    PT,
    RuleError,
    RuleInstance,
    SP,
    _coerce_binding,
    apply,
    backward,
    match_instance,
    rule_def,
)
from .syntax import (
    ANT,
    CON,
    PRE,
    PURE_J,
    SUC,
    Formula,
    Sequent,
    Structure,
    Term,
    Var,
    alpha_key,
    check_renaming,
    exact_two_violations,
    loc_str,
    parse_loc,
    parse_sequent,
    print_sequent,
    rename_sequent,
    rename_structure,
    structure_position,
)

Path_ = tuple  # node address: child indices from the root
Occ = tuple  # (node path, side, index) -- a structure occurrence in a node's conclusion


@dataclass(frozen=True, eq=False)
class Derivation:
    rule: str
    conclusion: Sequent
    children: tuple["Derivation", ...] = ()
    bindings: Mapping = field(default_factory=dict)
    nonparametric: dict | None = None
    instance: RuleInstance | None = None

    # -- navigation
    @property
    def premises(self) -> tuple[Sequent, ...]:
        return tuple(c.conclusion for c in self.children)

    def walk(self, path: Path_ = ()) -> Iterator[tuple[Path_, "Derivation"]]:
        """Pre-order traversal yielding (path, node)."""
        yield path, self
        for i, c in enumerate(self.children):
            yield from c.walk(path + (i,))

    def at(self, path: Path_) -> "Derivation":
        node = self
        for i in path:
            node = node.children[i]
        return node

    def replace(self, path: Path_, new: "Derivation") -> "Derivation":
        if not path:
            return new
        kids = list(self.children)
        kids[path[0]] = kids[path[0]].replace(path[1:], new)
        return Derivation(self.rule, self.conclusion, tuple(kids), self.bindings, self.nonparametric, self.instance)

    @property
    def size(self) -> int:
        return sum(1 for _ in self.walk())

    @property
    def height(self) -> int:
        return 1 + max((c.height for c in self.children), default=0)

    def cuts(self) -> list[Path_]:
        return [p for p, n in self.walk() if RULES[n.rule].family == "cut"]

    def is_cut_free(self) -> bool:
        return not self.cuts()

    def vars(self) -> set[Var]:
        out: set[Var] = set()
        for _, n in self.walk():
            out |= n.conclusion.vars()
        return out

    def sequents(self) -> list[Sequent]:
        return [n.conclusion for _, n in self.walk()]

    # -- renaming
    def rename(self, sigma: Mapping[Var, Var]) -> "Derivation":
        check_renaming(sigma, self.vars())
        return self._rename(dict(sigma))

    def _rename(self, sigma: dict) -> "Derivation":
        kids = tuple(c._rename(sigma) for c in self.children)
        concl = rename_sequent(self.conclusion, sigma)
        b = {k: _rename_value(_coerce_binding(k, v), sigma) for k, v in self.bindings.items()}
        inst = None
        if self.instance is not None:
            i = self.instance
            inst = RuleInstance(
                i.rule,
                tuple(c.conclusion for c in kids),
                concl,
                {k: _rename_value(v, sigma) for k, v in i.bindings.items()},
                i.variant,
                i.tags,
            )
        return Derivation(self.rule, concl, kids, b, self.nonparametric, inst)

    def __str__(self) -> str:
        return render(self)


def _rename_value(v, sigma):
    if isinstance(v, Var):
        return sigma.get(v, v)
    if isinstance(v, Term):
        return Term(v.op, sigma.get(v.var, v.var))
    if isinstance(v, tuple):
        return tuple(rename_structure(s, sigma) for s in v)
    if isinstance(v, Formula):
        from .syntax import _rn_formula

        return _rn_formula(v, sigma)
    return v


def leaf(cfg: CalcConfig, rule: str, bindings: Mapping | None = None) -> Derivation:
    return derive(cfg, rule, [], bindings)


def derive(
    cfg: CalcConfig,
    rule: str,
    children: Sequence[Derivation],
    bindings: Mapping | None = None,
    hints: Sequence | None = None,
) -> Derivation:
    """Apply ``rule`` forward to the end-sequents of ``children``."""
    inst = apply(cfg, rule, [c.conclusion for c in children], bindings, hints)
    return from_instance(inst, children)


def from_instance(inst: RuleInstance, children: Sequence[Derivation]) -> Derivation:
    b = {k: v for k, v in inst.bindings.items() if not isinstance(v, tuple)}
    return Derivation(inst.rule, inst.conclusion, tuple(children), b, _np_json(inst), inst)


def _np_json(inst: RuleInstance) -> dict:
    np = inst.nonparametric()
    return {
        "conclusion": [loc_str(l) for l in np["conclusion"]],
        "premises": [[loc_str(l) for l in p] for p in np["premises"]],
    }


def conclude(
    cfg: CalcConfig, rule: str, children: Sequence[Derivation], conclusion: Sequent, bindings: Mapping | None = None
) -> Derivation:
    """Node with a given conclusion (checked against the rule)."""
    inst = match_instance(cfg, rule, [c.conclusion for c in children], conclusion, bindings)
    return from_instance(inst, children)


def instance_of(cfg: CalcConfig, d: Derivation) -> RuleInstance:
    if d.instance is not None and tuple(d.instance.premises) == d.premises and d.instance.conclusion == d.conclusion:
        return d.instance
    hints = None
    if d.nonparametric is not None:
        hints = {
            "conclusion": d.nonparametric.get("conclusion"),
            "premises": d.nonparametric.get("premises"),
        }
    return match_instance(cfg, d.rule, d.premises, d.conclusion, d.bindings, hints)


def with_instances(cfg: CalcConfig, d: Derivation) -> Derivation:
    """Recompute and attach rule instances throughout (raises on failure)."""
    kids = tuple(with_instances(cfg, c) for c in d.children)
    node = Derivation(d.rule, d.conclusion, kids, d.bindings, d.nonparametric, None)
    inst = instance_of(cfg, node)
    return Derivation(d.rule, d.conclusion, kids, d.bindings, _np_json(inst), inst)


# ------------------------------------------------------------ serialization


def _binding_text(v) -> str | list:
    if isinstance(v, tuple):
        return [str(s) for s in v]
    return str(v)


def to_json(d: Derivation) -> dict:
    out = {
        "rule": d.rule,
        "conclusion": print_sequent(d.conclusion),
        "premises": [to_json(c) for c in d.children],
    }
    if d.nonparametric is not None:
        out["nonparametric"] = d.nonparametric
    b = {k: _binding_text(v) for k, v in d.bindings.items() if not isinstance(v, tuple)}
    if b:
        out["bindings"] = b
    return out


def from_json(obj: Mapping) -> Derivation:
    kids = tuple(from_json(c) for c in obj.get("premises", []))
    np = obj.get("nonparametric")
    if np is not None:
        np = {
            "conclusion": [loc_str(parse_loc(x)) for x in np.get("conclusion", [])],
            "premises": [[loc_str(parse_loc(x)) for x in p] for p in np.get("premises", [])],
        }
    return Derivation(obj["rule"], parse_sequent(obj["conclusion"]), kids, dict(obj.get("bindings", {})), np)


def dumps(d: Derivation, **meta) -> str:
    doc = dict(meta)
    doc["derivation"] = to_json(d)
    return json.dumps(doc, indent=1, ensure_ascii=False)


def load(path: str | Path) -> tuple[Derivation, dict]:
    """Read a derivation file; returns the tree and its metadata (sigma, mode, ...)."""
    doc = json.loads(Path(path).read_text())
    if "derivation" in doc:
        meta = {k: v for k, v in doc.items() if k != "derivation"}
        return from_json(doc["derivation"]), meta
    return from_json(doc), {}


def config_from_meta(meta: Mapping, default_mode: str = NON_INVERTIBLE) -> CalcConfig:
    return CalcConfig.make(meta.get("sigma", ()), meta.get("mode", default_mode), bool(meta.get("relaxed_switch", False)))


def render(d: Derivation, indent: int = 0) -> str:
    """Plain-text tree, conclusion first, premises indented below."""
    lines = [f"{'  ' * indent}{print_sequent(d.conclusion)}   [{d.rule}]"]
    for c in d.children:
        lines.append(render(c, indent + 1))
    return "\n".join(lines)


# --------------------------------------------------------------- congruence


def _payload(sp: SP):
    if isinstance(sp.lhs, PT) and sp.lhs.op == "" and sp.lhs.mv.sort == "nom":
        return sp.rhs
    return sp.lhs


_LINK_CACHE: dict = {}


def template_links(cfg: CalcConfig, rule: str, variant: int) -> tuple[dict, dict]:
    """Local congruence (and adjunction image) links between nonparametric items.

    Returns two maps ``(premise index, side, template index) -> (side, template index)``.
    """
    d = rule_def(cfg, rule)
    key = (d.name, id(d), variant)
    if key in _LINK_CACHE:
        return _LINK_CACHE[key]
    tpl = d.variants[variant]
    cong: dict = {}
    adj: dict = {}
    concl_items = tpl.conclusion.np_items()
    for k, prem in enumerate(tpl.premises):
        for sd, ti, sp in prem.np_items():
            for sd2, ti2, sp2 in concl_items:
                if sd == sd2 and sp == sp2:
                    cong[(k, sd, ti)] = (sd2, ti2)
                elif d.family == "switch":
                    pl = _payload(sp)
                    if isinstance(pl, MV) and pl == _payload(sp2):
                        cong[(k, sd, ti)] = (sd2, ti2)
                elif d.family == "adjunction":
                    adj[(k, sd, ti)] = (sd2, ti2)
    _LINK_CACHE[key] = (cong, adj)
    return cong, adj


def local_links(cfg: CalcConfig, inst: RuleInstance) -> tuple[list, list]:
    """Pairs ((premise index, loc), conclusion loc) of locally congruent
    occurrences, and separately the adjunction image pairs."""
    cong_t, adj_t = template_links(cfg, inst.rule, inst.variant)
    ctags = inst.tags[-1]
    where: dict = {}
    for sd in (ANT, CON):
        for i, t in enumerate(ctags[sd]):
            where[(sd,) + tuple(t)] = (sd, i)
    cong, adj = [], []
    for k in range(inst.arity):
        for sd in (ANT, CON):
            for i, t in enumerate(inst.tags[k][sd]):
                if t[0] == "ctx":
                    tgt = where.get((sd,) + tuple(t))
                    if tgt is not None:
                        cong.append(((k, (sd, i)), tgt))
                else:
                    for table, out in ((cong_t, cong), (adj_t, adj)):
                        hit = table.get((k, sd, t[1]))
                        if hit is not None:
                            tgt = where.get((hit[0], "np", hit[1]))
                            if tgt is not None:
                                out.append(((k, (sd, i)), tgt))
    return cong, adj


class CongruenceForest:
    """Union-find over structure occurrences of a derivation."""

    def __init__(self):
        self.parent: dict[Occ, Occ] = {}
        self.introduced: set[Occ] = set()
        self.rule_at: dict[Path_, str] = {}
        self.structure: dict[Occ, Structure] = {}
        self.up: dict[Occ, list[Occ]] = {}  # conclusion occ -> congruent premise occs
        self.adj_up: dict[Occ, list[Occ]] = {}

    def add(self, o: Occ, st: Structure) -> None:
        self.parent.setdefault(o, o)
        self.structure[o] = st

    def find(self, o: Occ) -> Occ:
        root = o
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[o] != root:
            self.parent[o], o = root, self.parent[o]
        return root

    def union(self, a: Occ, b: Occ) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)

    def related(self, a: Occ, b: Occ) -> bool:
        return self.find(a) == self.find(b)

    def members(self, o: Occ) -> list[Occ]:
        r = self.find(o)
        return sorted(x for x in self.parent if self.find(x) == r)

    def classes(self) -> list[list[Occ]]:
        out: dict[Occ, list[Occ]] = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return [sorted(v) for v in out.values()]

    def uppermost(self, o: Occ) -> list[Occ]:
        return [x for x in self.members(o) if x in self.introduced]

    def history(self, o: Occ) -> list[Occ]:
        """Occurrences above ``o`` in its class (the history tree rooted at ``o``)."""
        out, stack = [], [o]
        while stack:
            x = stack.pop()
            out.append(x)
            stack.extend(self.up.get(x, ()))
        return out


def congruence(d: Derivation, cfg: CalcConfig | None = None) -> CongruenceForest:
    cfg = cfg or _guess_cfg(d)
    f = CongruenceForest()
    for path, node in d.walk():
        f.rule_at[path] = node.rule
        for loc, st in node.conclusion.items():
            f.add((path,) + loc, st)
    for path, node in d.walk():
        inst = instance_of(cfg, node)
        cong, adj = local_links(cfg, inst)
        linked = set()
        for (k, ploc), cloc in cong:
            a = (path + (k,),) + ploc
            b = (path,) + cloc
            f.union(a, b)
            f.up.setdefault(b, []).append(a)
            linked.add(cloc)
        for (k, ploc), cloc in adj:
            f.adj_up.setdefault((path,) + cloc, []).append((path + (k,),) + ploc)
        for loc in node.conclusion.locators():
            if loc not in linked:
                f.introduced.add((path,) + loc)
    return f


def _guess_cfg(d: Derivation) -> CalcConfig:
    sigma = {RULES[n.rule].sigma for _, n in d.walk() if RULES[n.rule].sigma}
    inv = any(n.rule.endswith("_inv") and RULES[n.rule].family == "logical" for _, n in d.walk())
    return CalcConfig(frozenset(sigma), INVERTIBLE if inv else NON_INVERTIBLE)


J_LABELLED, M_LABELLED, MIXED = "JLabelled", "MLabelled", "Mixed"


def classify_label(d: Derivation, occ: Occ, cfg: CalcConfig | None = None, forest: CongruenceForest | None = None) -> str:
    f = forest or congruence(d, cfg)
    rules = {f.rule_at[o[0]] for o in f.uppermost(occ) if f.structure[o].labelled}
    if rules and rules <= J_INTRO:
        return J_LABELLED
    if rules and rules <= M_INTRO:
        return M_LABELLED
    return MIXED


# ----------------------------------------------------------------- checking


@dataclass(frozen=True)
class Violation:
    path: Path_
    condition: str
    message: str

    def __str__(self) -> str:
        where = "/".join(map(str, self.path)) or "root"
        return f"[{where}] {self.condition}: {self.message}"


@dataclass
class Report:
    ok: bool
    violations: list[Violation]

    def __bool__(self) -> bool:
        return self.ok


def check_derivation(cfg: CalcConfig, d: Derivation, lint_exact_two: bool | None = None) -> Report:
    violations: list[Violation] = []
    nodes: dict[Path_, Derivation] = {}
    for path, node in d.walk():
        nodes[path] = node
    # instance-level checks, children before parents
    for path in sorted(nodes, key=len, reverse=True):
        node = nodes[path]
        try:
            instance_of(cfg, node)
        except RuleError as e:
            violations.append(Violation(path, e.kind, str(e)))
        except (ValueError, KeyError) as e:
            violations.append(Violation(path, "SchemaMismatch", str(e)))
    if violations:
        return Report(False, violations)
    forest = congruence(d, cfg)
    # derivation-level condition on cuts
    for path, node in nodes.items():
        if RULES[node.rule].family != "cut":
            continue
        inst = instance_of(cfg, node)
        want = J_LABELLED if node.rule == "Cut_j" else M_LABELLED
        for k in range(2):
            for loc in inst.nonparametric()["premises"][k]:
                got = classify_label(d, (path + (k,),) + loc, cfg, forest)
                if got != want:
                    violations.append(
                        Violation(path, "LabelViolation", f"cut formula in premise {k} is {got}, needs {want}")
                    )
    # exact-two lint
    if lint_exact_two is None:
        lint_exact_two = cfg.mode == NON_INVERTIBLE
    if lint_exact_two:
        for path, node in nodes.items():
            for msg in exact_two_violations(node.conclusion):
                violations.append(Violation(path, "ExactTwo", f"{print_sequent(node.conclusion)}: {msg}"))
    # congruent occurrences share their position
    for cls in forest.classes():
        positions = set()
        for o in cls:
            st = forest.structure[o]
            pos = structure_position(st, o[1])
            if st.kind == PURE_J and len(st.approximants()) == 2:
                continue  # j <= m reads either way
            positions.add(pos)
        if len(positions) > 1:
            violations.append(Violation(cls[0][0], "PositionMismatch", f"class of {forest.structure[cls[0]]} mixes positions"))
    return Report(not violations, violations)


def lint_single_conclusion(d: Derivation) -> str | None:
    """None when every sequent has one consequent structure and exactly two
    labelled formulas, one precedent and one succedent; else a finding."""
    for path, node in d.walk():
        s = node.conclusion
        pos = []
        for loc, st in s.items():
            if st.labelled:
                pos.append(structure_position(st, loc[0]))
        if len(s.con) != 1 or sorted(pos) != [PRE, SUC]:
            where = "/".join(map(str, path)) or "root"
            return f"[{where}] not single-conclusion: {print_sequent(s)}"
    return None


def check_end_sequent(d: Derivation, expected: str | Sequent, ordered: bool = True) -> bool:
    want = parse_sequent(expected) if isinstance(expected, str) else expected
    if ordered:
        return d.conclusion == want
    return d.conclusion.multiset_eq(want)


# ------------------------------------------------------------------- prover

_AXIOM_FIRST = {"initial": 0, "logical": 1, "structural": 2, "axiom": 3, "adjunction": 4, "switch": 5}


@dataclass
class SearchStats:
    nodes: int = 0
    pruned: int = 0
    seconds: float = 0.0


class SearchTimeout(Exception):
    pass


def prove(
    cfg: CalcConfig,
    goal: Sequent,
    depth: int = 12,
    prune: Callable[[Sequent], bool] | None = None,
    timeout: float | None = None,
    stats: SearchStats | None = None,
    semantic: bool = False,
    rules: Sequence[str] | None = None,
) -> Derivation | None:
    """Iterative-deepening backward search without cut.

    ``prune(s)`` may return True for sequents known to be underivable; it
    must be sound. With ``semantic`` and no explicit ``prune``, premises
    refuted by a small finite model of Σ are discarded.
    """
    stats = stats if stats is not None else SearchStats()
    if prune is None and semantic:
        from .semantics import SemanticFilter

        prune = SemanticFilter(cfg.sigma)
    t0 = time.monotonic()
    failed: dict[tuple, int] = {}  # alpha key -> largest depth known to fail
    pruned: dict[tuple, bool] = {}

    def is_pruned(s: Sequent) -> bool:
        key = alpha_key(s)
        if key not in pruned:
            bad = False
            if cfg.mode == NON_INVERTIBLE and exact_two_violations(s):
                bad = True
            elif prune is not None and prune(s):
                bad = True
            pruned[key] = bad
            if bad:
                stats.pruned += 1
        return pruned[key]

    def search(g: Sequent, lim: int, path: frozenset) -> Derivation | None:
        stats.nodes += 1
        if timeout is not None and time.monotonic() - t0 > timeout:
            raise SearchTimeout()
        key = alpha_key(g)
        if failed.get(key, -1) >= lim or key in path:
            return None
        cands = backward(cfg, g, rules)
        cands.sort(key=lambda c: (len(c[1]) > 0, _AXIOM_FIRST[RULES[c[0]].family], len(c[1])))
        for rule, prems, b in cands:
            if not prems:
                return conclude(cfg, rule, [], g, _plain(b))
            if lim <= 1:
                continue
            if any(is_pruned(p) for p in prems):
                continue
            kids = []
            for p in prems:
                sub = search(p, lim - 1, path | {key})
                if sub is None:
                    break
                kids.append(sub)
            else:
                return conclude(cfg, rule, kids, g, _plain(b))
        failed[key] = max(failed.get(key, -1), lim)
        return None

    try:
        if prune is not None and prune(goal):
            return None
        for lim in range(1, depth + 1):
            res = search(goal, lim, frozenset())
            if res is not None:
                return res
        return None
    except SearchTimeout:
        return None
    finally:
        stats.seconds = time.monotonic() - t0


def _plain(b: Mapping) -> dict:
    return {k: v for k, v in b.items() if not isinstance(v, tuple)}


def prove_with_fallback(
    cfg: CalcConfig, goal: Sequent, depth: int = 12, timeout: float | None = None, stats: SearchStats | None = None
) -> tuple[Derivation | None, CalcConfig]:
    """``prove`` under ``cfg``; in invertible mode a failed strict search is
    retried with the conclusion-side switch condition dropped. Returns the
    derivation (or None) and the configuration it checks under."""
    d = prove(cfg, goal, depth, timeout=timeout, stats=stats)
    if d is not None or cfg.mode != INVERTIBLE or cfg.relaxed_switch:
        return d, cfg
    relaxed = CalcConfig(cfg.sigma, cfg.mode, True)
    return prove(relaxed, goal, depth, timeout=timeout, stats=stats), relaxed
