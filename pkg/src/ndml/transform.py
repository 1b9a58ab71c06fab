"""Proof transformations: display of structures, twin restoration, cut
elimination (parametric and principal stages), canonical form and cyclic
rotation of canonical sequents."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .calculus import (
    ADJUNCTIONS,
    ANTICLOCKWISE,
    CLOCKWISE,
    INVERSE,
    INVERTIBLE_SWITCHES,
    NON_INVERTIBLE,
    RULES,
    SWITCHES,
    CalcConfig,
    RuleError,
    RuleInstance,
    forward_instances,
    match_instance,
)
from .proof import Derivation, Occ, congruence, derive, from_instance, instance_of, leaf, local_links
from .syntax import (
    ANT,
    CON,
    NOM,
    PRE,
    SUC,
    Bot,
    Formula,
    Sequent,
    Structure,
    Term,
    Top,
    Var,
    WellFormednessError,
    exact_two_violations,
    fresh_var,
    in_display,
    parse_loc,
    print_sequent,
    rename_sequent,
    structure_position,
)

Locator = tuple


class TransformError(ValueError):
    kind = "TransformError"


class Unreachable(TransformError):
    kind = "Unreachable"


class NotCyclic(TransformError):
    kind = "NotCyclic"


class NonProperConfiguration(TransformError):
    kind = "NonProperConfiguration"


class CutGap(TransformError):
    """A cut whose reduction needs a rule the calculus does not have."""

    kind = "CutGap"


class RotationError(TransformError):
    kind = "RotationError"


CLOCKWISE_DIR, ANTICLOCKWISE_DIR = "Clockwise", "AntiClockwise"
STEP_RULES = ADJUNCTIONS + INVERTIBLE_SWITCHES
IDENTITY_AXIOMS = frozenset({"Id_jp", "Id_pm", "Id_Top", "Id_Bot"})


# ------------------------------------------------------------------ traces


@dataclass
class DisplayTrace:
    """A chain of invertible steps from a sequent to ``result``; ``target``
    locates the image of the tracked structure in ``result``."""

    steps: list[RuleInstance]
    result: Sequent
    target: Locator
    start: Sequent | None = None

    def __len__(self) -> int:
        return len(self.steps)

    def inverses(self, cfg: CalcConfig) -> list[RuleInstance]:
        """Instances undoing the steps, last step first."""
        out = []
        for inst in reversed(self.steps):
            out.append(match_instance(cfg, INVERSE[inst.rule], [inst.conclusion], inst.premises[0]))
        return out

    def derivation(self, top: Derivation) -> Derivation:
        """Stack the steps below a derivation of the starting sequent."""
        d = top
        for inst in self.steps:
            if inst.premises[0] != d.conclusion:
                raise TransformError("trace does not start at the given derivation")
            d = from_instance(inst, [d])
        return d


TwinWitness = DisplayTrace


def _image(cfg: CalcConfig, inst: RuleInstance, loc: Locator) -> Locator | None:
    cong, adj = local_links(cfg, inst)
    for (k, ploc), cloc in cong + adj:
        if k == 0 and ploc == loc:
            return cloc
    return None


def _state_key(s: Sequent, loc: Locator) -> tuple:
    return (tuple(sorted(map(str, s.ant))), tuple(sorted(map(str, s.con))), loc[0], str(s[loc]))


def _search(
    cfg: CalcConfig,
    s: Sequent,
    loc: Locator,
    goal: Callable[[Sequent, Locator], bool],
    bound: int,
    avoid: set[Var] = frozenset(),
) -> DisplayTrace:
    """Breadth-first search over switch and adjunction steps, tracking the
    image of the structure at ``loc``."""
    if goal(s, loc):
        return DisplayTrace([], s, loc, s)
    seen = {_state_key(s, loc)}
    queue = deque([(s, loc, [])])
    while queue:
        cur, cl, steps = queue.popleft()
        if len(steps) >= bound:
            continue
        for rule in STEP_RULES:
            for inst in forward_instances(cfg, rule, [cur], avoid=avoid):
                nl = _image(cfg, inst, cl)
                if nl is None:
                    continue
                key = _state_key(inst.conclusion, nl)
                if key in seen:
                    continue
                seen.add(key)
                path = steps + [inst]
                if goal(inst.conclusion, nl):
                    return DisplayTrace(path, inst.conclusion, nl, s)
                queue.append((inst.conclusion, nl, path))
    raise Unreachable(f"no trace within {bound} steps from {print_sequent(s)}")


def _sequent_of(d) -> Sequent:
    return d.conclusion if isinstance(d, Derivation) else d


def display_bound(s: Sequent) -> int:
    return 2 * s.size() + 4


def display(cfg: CalcConfig, d, target) -> DisplayTrace:
    """Bring the structure at ``target`` into display using switch and
    adjunction rules only. ``d`` is a derivation or a sequent."""
    s = _sequent_of(d)
    loc = parse_loc(target)
    s[loc]
    return _search(cfg, s, loc, in_display, display_bound(s))


def has_twin(s: Sequent, loc: Locator) -> bool:
    """A pure antecedent structure ``j <= T`` (``T <= m``) has a twin when its
    displayed variable occurs exactly once in the consequent."""
    st = s[loc]
    if loc[0] != ANT or st.labelled:
        return False
    for v in st.approximants():
        if sum(1 for x in s.con if v in x.term_vars()) == 1:
            return True
    return False


def twin_restore(cfg: CalcConfig, d, target) -> DisplayTrace:
    """Reach an interderivable sequent in which the antecedent pure structure
    at ``target`` is unchanged and has its twin."""
    s = _sequent_of(d)
    loc = parse_loc(target)
    st = s[loc]
    if loc[0] != ANT or st.labelled:
        raise TransformError("twin restoration needs a pure antecedent structure")
    return _search(cfg, s, loc, lambda x, l: x[l] == st and has_twin(x, l), display_bound(s))


# ------------------------------------------------------------ cut elimination


def _find(s: Sequent, side: str, st: Structure, skip: Sequence[Locator] = ()) -> Locator:
    for i, x in enumerate(s.side(side)):
        if x == st and (side, i) not in skip:
            return (side, i)
    raise TransformError(f"{st} not found in {print_sequent(s)}")


def _other_side(st: Structure, v: Var):
    """The side of ``st`` that does not display ``v``."""
    if isinstance(st.lhs, Term) and st.lhs.bare and st.lhs.var == v:
        return st.rhs
    return st.lhs


def _with_formula(c: Structure, t) -> Structure:
    try:
        if isinstance(c.lhs, Formula):
            return Structure(t, c.rhs)
        return Structure(c.lhs, t)
    except WellFormednessError as e:
        raise CutGap(f"cannot put {t} in place of the formula of {c}: {e}") from None


def _compose(s: Sequent, loc: Locator, new: Structure, rest: Sequent) -> Sequent:
    ant = [x for i, x in enumerate(s.ant) if (ANT, i) != loc] + list(rest.ant)
    con = list(rest.con) + [x for i, x in enumerate(s.con) if (CON, i) != loc]
    (ant if loc[0] == ANT else con).append(new)
    return Sequent(ant, con)


def _conclude_any(cfg: CalcConfig, rules: Sequence[str], kids: Sequence[Derivation], concl: Sequent) -> Derivation:
    errors = []
    for r in rules:
        try:
            inst = match_instance(cfg, r, [k.conclusion for k in kids], concl)
        except RuleError as e:
            errors.append(e)
            continue
        return from_instance(inst, kids)
    msg = f"no rule among {list(rules)} derives {print_sequent(concl)}: {errors[0] if errors else ''}"
    if cfg.relaxed_switch:
        raise NonProperConfiguration(msg)
    raise CutGap(msg)


def _rules_for(rule: str) -> list[str]:
    if RULES[rule].family == "switch":
        return [rule] + [r for r in SWITCHES if r != rule]
    return [rule]


@dataclass
class _Partner:
    """The cut premise that supplies the context during a graft."""

    d: Derivation  # possibly displayed first
    loc: Locator  # the cut structure
    twin: Locator  # structure displaying the label of the cut structure
    undo: list[RuleInstance] = field(default_factory=list)
    original: Sequent | None = None

    @property
    def cut(self) -> Structure:
        return self.d.conclusion[self.loc]

    @property
    def label(self) -> Var:
        return self.cut.label


def _twin_loc(s: Sequent, loc: Locator) -> Locator | None:
    v = s[loc].label
    for l, st in s.items():
        if l != loc and l[0] != loc[0] and st.displays(v):
            return l
    return None


def _partner(cfg: CalcConfig, d: Derivation, loc: Locator, avoid: set[Var]) -> _Partner:
    s = d.conclusion
    t = _twin_loc(s, loc)
    if t is not None:
        return _Partner(d, loc, t, [], s)
    st = s[loc]
    trace = _search(cfg, s, loc, lambda x, l: x[l] == st and _twin_loc(x, l) is not None, display_bound(s), avoid)
    dd = trace.derivation(d)
    return _Partner(dd, trace.target, _twin_loc(trace.result, trace.target), trace.steps, s)


def _undo(cfg: CalcConfig, d: Derivation, steps: list[RuleInstance]) -> Derivation:
    """Replay the inverses of display steps below ``d``."""
    for inst in reversed(steps):
        ploc = inst.nonparametric()
        cur = d.conclusion
        used: list[Locator] = []
        for loc in ploc["conclusion"]:
            used.append(_find(cur, loc[0], inst.conclusion[loc], used))
        ant = [x for i, x in enumerate(cur.ant) if (ANT, i) not in used]
        con = [x for i, x in enumerate(cur.con) if (CON, i) not in used]
        for loc in ploc["premises"][0]:
            (ant if loc[0] == ANT else con).append(inst.premises[0][loc])
        d = _conclude_any(cfg, [INVERSE[inst.rule]], [d], Sequent(ant, con))
    return d


@dataclass
class GraftResult:
    derivation: Derivation
    sigma: dict
    renaming: dict


def _history(cfg: CalcConfig, d: Derivation, loc: Locator) -> tuple[dict, set]:
    forest = congruence(d, cfg)
    hist: dict = {}
    intro: set = set()
    stack = [((),) + tuple(loc)]
    while stack:
        occ = stack.pop()
        path, here = occ[0], occ[1:]
        if path in hist:
            raise CutGap("the cut formula occurs twice in one sequent of its history")
        hist[path] = here
        if occ in forest.introduced:
            intro.add(path)
        stack.extend(forest.up.get(occ, ()))
    return hist, intro


def _graft(
    cfg: CalcConfig,
    d: Derivation,
    loc: Locator,
    partner: _Partner,
    at_intro: Callable[[Derivation, Locator], Derivation],
) -> GraftResult:
    """Replace the cut structure of ``d`` along its history by the partner's
    context, calling ``at_intro`` where the structure is introduced."""
    hist, intro = _history(cfg, d, loc)
    p = partner.d.conclusion
    rest_ant = [x for i, x in enumerate(p.ant) if (ANT, i) not in (partner.loc, partner.twin)]
    rest_con = [x for i, x in enumerate(p.con) if (CON, i) not in (partner.loc, partner.twin)]
    rest = Sequent(rest_ant, rest_con)
    t = _other_side(p[partner.twin], partner.label)
    keep = (p.vars() | (partner.original.vars() if partner.original else set())) - {partner.label}
    root_vars = d.conclusion.vars()
    region: set[Var] = set()
    for path in hist:
        region |= d.at(path).conclusion.term_vars()
    clash = sorted((region & keep) - root_vars, key=lambda v: (v.kind, v.index))
    if (root_vars & keep) - {partner.label} - {v for v in root_vars if v.is_prop}:
        raise TransformError("cut premises share variables besides the cut label")
    used = d.vars() | partner.d.vars() | keep
    sigma: dict[Var, Var] = {}
    for v in clash:
        if v.is_prop:
            continue
        w = fresh_var(v.kind, used)
        used.add(w)
        sigma[v] = w

    def build(path) -> Derivation:
        node = d.at(path)
        here = hist[path]
        if path in intro:
            sub = node._rename(sigma) if node.conclusion.vars() & sigma.keys() else node
            out = at_intro(sub, here)
            c = sub.conclusion[here]
            want = _compose(sub.conclusion, here, _with_formula(c, t), rest)
            if not out.conclusion.multiset_eq(want):
                raise TransformError(f"introduction point yields {print_sequent(out.conclusion)}, expected {print_sequent(want)}")
            return out
        kids = []
        for i in range(len(node.children)):
            if path + (i,) not in hist:
                raise CutGap(f"{node.rule}: premise {i} does not carry the cut formula")
            kids.append(build(path + (i,)))
        concl = rename_sequent(node.conclusion, sigma)
        new = _compose(concl, here, _with_formula(concl[here], t), rest)
        return _conclude_any(cfg, _rules_for(node.rule), kids, new)

    out = build(())
    if partner.undo:
        out = _undo(cfg, out, partner.undo)
    return GraftResult(out, sigma, {})


def _adjust(cfg: CalcConfig, partner: _Partner, cp: Structure, side: str) -> tuple[Derivation, Locator, dict]:
    """Bring the partner's cut structure to ``cp`` on the side opposite ``side``."""
    o = partner.cut
    d = partner.d
    x, y = cp.label, o.label
    if o.formula != cp.formula:
        raise TransformError(f"cut formulas differ: {o} / {cp}")
    if o.kind == cp.kind:
        if partner.loc[0] == side:
            raise TransformError("cut structures on the same side")
        if x == y:
            return d, partner.loc, {}
        if x in d.conclusion.vars():
            raise TransformError(f"{x} already occurs in {print_sequent(d.conclusion)}")
        sigma = {y: x, x: y} if x in d.vars() else {y: x}
        return d._rename(sigma), partner.loc, {y: x}
    # the label kind flips: switch the cut structure together with its twin
    name = "j" if x.kind == NOM else "m"
    hints = [[partner.loc, partner.twin]]
    for rule in INVERTIBLE_SWITCHES:
        for inst in forward_instances(cfg, rule, [d.conclusion], {name: x}, hints):
            for i, st in enumerate(inst.conclusion.side(CON if side == ANT else ANT)):
                if st == cp:
                    return from_instance(inst, [d]), (CON if side == ANT else ANT, i), {y: x}
    raise CutGap(f"no switch turns {o} into {cp}")


def _np_loc(inst: RuleInstance, which: int) -> Locator:
    locs = inst.nonparametric()["premises"][which] if which >= 0 else inst.nonparametric()["conclusion"]
    return locs[0]


def _reduce(cfg: CalcConfig, left: Derivation, lo: Locator, right: Derivation, ro: Locator) -> Derivation:
    """Cut-free derivation of the conclusion of a cut between ``left`` (cut
    structure in the consequent) and ``right`` (in the antecedent)."""
    if left.rule in IDENTITY_AXIOMS:
        return right
    if right.rule in IDENTITY_AXIOMS:
        return left
    fl = congruence(left, cfg)
    if ((),) + tuple(lo) not in fl.introduced:
        partner = _partner(cfg, right, ro, left.vars())
        return _graft(cfg, left, lo, partner, lambda dp, cp: _meet(cfg, dp, cp, partner)).derivation
    fr = congruence(right, cfg)
    if ((),) + tuple(ro) not in fr.introduced:
        partner = _partner(cfg, left, lo, right.vars())
        return _graft(cfg, right, ro, partner, lambda dp, cp: _meet(cfg, dp, cp, partner)).derivation
    return _principal(cfg, left, lo, right, ro)


def _meet(cfg: CalcConfig, dp: Derivation, cploc: Locator, partner: _Partner) -> Derivation:
    cp = dp.conclusion[cploc]
    other, oloc, _ = _adjust(cfg, partner, cp, cploc[0])
    if cploc[0] == CON:
        return _reduce(cfg, dp, cploc, other, oloc)
    return _reduce(cfg, other, oloc, dp, cploc)


_JA = ("Atom", "And", "Box")
_MB = ("Atom", "Or", "Dia")


def _principal(cfg: CalcConfig, left: Derivation, lo: Locator, right: Derivation, ro: Locator) -> Derivation:
    lr, rr = left.rule, right.rule
    li, ri = instance_of(cfg, left), instance_of(cfg, right)
    if (lr, rr) in (("And_S", "And_P"), ("Or_P", "Or_S")):
        rloc = _np_loc(ri, 0)
        want = right.children[0].conclusion[rloc]
        for k, kid in enumerate(left.children):
            kloc = _np_loc(li, k)
            if kid.conclusion[kloc] == want:
                return _reduce(cfg, kid, kloc, right.children[0], rloc)
        raise TransformError("no matching immediate subformula")
    if (lr, rr) == ("Box_S", "Box_P"):
        return _modal(cfg, left, right, li, ri, "m", "Adj_BdBox")
    if (lr, rr) == ("Dia_P", "Dia_S"):
        return _modal(cfg, left, right, li, ri, "j", "Adj_DiaBb")
    # axioms with a formula parameter absorb the immediate subformula
    if (lr, rr) == ("And_S", "Top_j") or (lr, rr) == ("Or_P", "Bot_m"):
        b = dict(ri.bindings)
        for k, kid in enumerate(left.children):
            kloc = _np_loc(li, k)
            sub = kid.conclusion[kloc].formula
            if type(sub).__name__ in (_JA if rr == "Top_j" else _MB):
                b2 = {n: v for n, v in b.items() if not isinstance(v, tuple)}
                b2["A" if rr == "Top_j" else "B"] = sub
                ax = leaf(cfg, rr, b2)
                return _reduce(cfg, kid, kloc, ax, (ANT, 0))
    if (lr, rr) == ("Bot_j", "And_P") or (lr, rr) == ("Top_m", "Or_S"):
        rloc = _np_loc(ri, 0)
        sub = right.children[0].conclusion[rloc].formula
        if type(sub).__name__ in (_JA if lr == "Bot_j" else _MB):
            b2 = {n: v for n, v in li.bindings.items() if not isinstance(v, tuple)}
            b2["A" if lr == "Bot_j" else "B"] = sub
            ax = leaf(cfg, lr, b2)
            return _reduce(cfg, ax, (CON, 0), right.children[0], rloc)
    raise CutGap(f"principal cut between {lr} and {rr} on {left.conclusion[lo]} has no reduction")


def _modal(cfg, left, right, li, ri, name: str, adj: str) -> Derivation:
    """Principal box (diamond) cut: align the fresh approximant, adjoin, cut
    on the immediate subformula, adjoin back."""
    lv, rv = li.bindings[name], ri.bindings[name]
    kid = left.children[0]
    if lv != rv:
        kid = kid._rename({lv: rv, rv: lv} if rv in kid.vars() else {lv: rv})
    # the adjunction acts on the pure structure that carried the fresh variable
    pure = [l for l, st in kid.conclusion.items() if not st.labelled and rv in st.term_vars()]
    lab = [l for l, st in kid.conclusion.items() if st.labelled and rv in st.term_vars()]
    if len(pure) != 1 or len(lab) != 1:
        raise TransformError("unexpected premise shape in a modal principal cut")
    up = derive(cfg, adj, [kid], hints=[[pure[0]]])
    rk = right.children[0]
    rloc = _np_loc(ri, 0)
    sub = rk.conclusion[rloc]
    uloc = _find(up.conclusion, ANT, sub)
    red = _reduce(cfg, rk, rloc, up, uloc)
    adjoined = [l for l, st in red.conclusion.items() if st == up.conclusion[_adj_image(cfg, up)]]
    if not adjoined:
        raise TransformError("lost the adjoined structure")
    return derive(cfg, INVERSE[adj], [red], hints=[[adjoined[0]]])


def _adj_image(cfg: CalcConfig, d: Derivation) -> Locator:
    return d.instance.nonparametric()["conclusion"][0]


def _innermost_cut(d: Derivation):
    cuts = d.cuts()
    best = None
    for p in cuts:
        if any(q != p and q[: len(p)] == p for q in cuts):
            continue
        if best is None or (len(p), tuple(-i for i in p)) > (len(best), tuple(-i for i in best)):
            best = p
    return best


def _reattach(cfg: CalcConfig, d: Derivation, path, new: Derivation) -> Derivation:
    for k in range(len(path) - 1, -1, -1):
        anc = d.at(path[:k])
        kids = list(anc.children)
        kids[path[k]] = new
        b = {n: v for n, v in anc.bindings.items() if not isinstance(v, tuple)}
        inst = match_instance(cfg, anc.rule, [c.conclusion for c in kids], anc.conclusion, b)
        new = from_instance(inst, kids)
    return new


def _check_proper(cfg: CalcConfig) -> None:
    if cfg.mode != NON_INVERTIBLE:
        raise NonProperConfiguration("cut elimination is implemented for the non-invertible calculus")


def cut_eliminate(cfg: CalcConfig, d: Derivation, trace: list | None = None) -> Derivation:
    """Remove every cut, innermost-uppermost first. ``trace`` collects the
    derivation after each eliminated cut."""
    _check_proper(cfg)
    while True:
        path = _innermost_cut(d)
        if path is None:
            return d
        node = d.at(path)
        inst = instance_of(cfg, node)
        lo, ro = _np_loc(inst, 0), _np_loc(inst, 1)
        res = _reduce(cfg, node.children[0], lo, node.children[1], ro)
        if not res.conclusion.multiset_eq(node.conclusion):
            raise TransformError("reduction changed the end-sequent")
        d = _reattach(cfg, d, path, res)
        if trace is not None:
            trace.append(d)


@dataclass
class ParametricStep:
    derivation: Derivation
    sigma: dict  # renaming of the grafted region
    renaming: dict  # label renamings of the partner premise at introduction points
    side: int  # premise (0 or 1) whose history was followed


def parametric_step(cfg: CalcConfig, d: Derivation, path=(), policy: int = 1) -> ParametricStep:
    """Move the cut at ``path`` up to the introductions of its cut formula in
    one premise, materializing the new cuts. Policy 2 first aligns the
    approximants with ``preserve_approximant``."""
    _check_proper(cfg)
    node = d.at(path)
    if RULES[node.rule].family != "cut":
        raise TransformError(f"no cut at {path}")
    inst = instance_of(cfg, node)
    lo, ro = _np_loc(inst, 0), _np_loc(inst, 1)
    left, right = node.children
    if policy == 2:
        hist, intro = _history(cfg, left, lo)
        if len(intro) == 1:
            top = next(iter(intro))
            node = preserve_approximant(cfg, node, ((0,) + top,) + hist[top], ((0,), ) + lo, policy=2)
            left, right = node.children
            inst = instance_of(cfg, node)
    if ((),) + tuple(lo) not in congruence(left, cfg).introduced:
        side, graft_d, gloc = 0, left, lo
        partner = _partner(cfg, right, ro, left.vars())
    elif ((),) + tuple(ro) not in congruence(right, cfg).introduced:
        side, graft_d, gloc = 1, right, ro
        partner = _partner(cfg, left, lo, right.vars())
    else:
        raise TransformError("principal cut: no parametric step applies")
    renaming: dict = {}

    def at_intro(dp: Derivation, cploc: Locator) -> Derivation:
        cp = dp.conclusion[cploc]
        other, oloc, ren = _adjust(cfg, partner, cp, cploc[0])
        renaming.update(ren)
        rule = "Cut_j" if cp.label.kind == NOM else "Cut_m"
        if cploc[0] == CON:
            return derive(cfg, rule, [dp, other], hints=[[cploc], [oloc]])
        return derive(cfg, rule, [other, dp], hints=[[oloc], [cploc]])

    g = _graft(cfg, graft_d, gloc, partner, at_intro)
    out = g.derivation if not path else _reattach(cfg, d, path, g.derivation)
    return ParametricStep(out, g.sigma, renaming, side)


# ------------------------------------------------------ approximant renaming


def preserve_approximant(cfg: CalcConfig, d: Derivation, principal: Occ, displayed: Occ, policy: int = 1) -> Derivation:
    """Rename ``d`` so that the displayed occurrence carries the approximant
    of the congruent principal occurrence above it.

    The two labels are swapped everywhere except above the uppermost switch
    that consumed the principal approximant. With ``policy=2`` the branches
    hanging off the path to ``displayed`` also get their internal variables
    renumbered to the smallest free indices.
    """
    principal, displayed = tuple(principal), tuple(displayed)
    forest = congruence(d, cfg)
    if not forest.related(principal, displayed):
        raise TransformError("occurrences are not congruent")
    ppath, dpath = principal[0], displayed[0]
    if ppath[: len(dpath)] != dpath or ppath == dpath:
        raise TransformError("the principal occurrence must lie above the displayed one")
    members = {o[0]: o for o in forest.members(principal)}
    j = forest.structure[principal].label
    i = forest.structure[displayed].label
    if i == j:
        return d
    flips = []
    for k in range(len(dpath), len(ppath)):
        here, up = members.get(ppath[:k]), members.get(ppath[: k + 1])
        if here is None or up is None:
            raise TransformError("history does not follow the branch")
        if forest.structure[here].label.kind != forest.structure[up].label.kind:
            flips.append(ppath[:k])
    if len(flips) % 2:
        raise TransformError("odd number of label-changing switches between the occurrences")
    swap = {i: j, j: i}
    if flips:
        keep = flips[-1] + (ppath[len(flips[-1])],)
    else:
        keep = ppath
    out = d._rename(swap).replace(keep, d.at(keep))
    out = _refresh(cfg, out)
    if policy == 2:
        for k in range(len(dpath)):
            anc = dpath[:k]
            for ci in range(len(out.at(anc).children)):
                if ci != dpath[k]:
                    out = out.replace(anc + (ci,), compact(out.at(anc + (ci,))))
        out = _refresh(cfg, out)
    from .proof import check_derivation

    rep = check_derivation(cfg, out)
    if not rep.ok:
        raise TransformError(f"renamed derivation does not check: {rep.violations[0]}")
    return out


def compact(d: Derivation) -> Derivation:
    """Renumber the variables internal to ``d`` to the smallest indices not
    used by its end-sequent (order of first occurrence, root first)."""
    root = d.conclusion.vars()
    order: list[Var] = []
    for _, n in d.walk():
        for st in list(n.conclusion.ant) + list(n.conclusion.con):
            for v, _ in st.occurrences():
                if v not in root and v not in order:
                    order.append(v)
    used = set(root)
    sigma = {}
    for v in order:
        w = fresh_var(v.kind, used)
        used.add(w)
        sigma[v] = w
    return d._rename(sigma)


def _refresh(cfg: CalcConfig, d: Derivation) -> Derivation:
    kids = tuple(_refresh(cfg, c) for c in d.children)
    b = {n: v for n, v in d.bindings.items() if not isinstance(v, tuple)}
    try:
        inst = match_instance(cfg, d.rule, [c.conclusion for c in kids], d.conclusion, b)
    except RuleError:
        inst = match_instance(cfg, d.rule, [c.conclusion for c in kids], d.conclusion)
    return from_instance(inst, kids)


# ---------------------------------------------------------- canonical form


def _sub(x) -> set:
    if isinstance(x, Term):
        return {x, Term("", x.var)}
    return set(x.subformulas())


def _components(st: Structure, side: str) -> tuple:
    """(first, last) component: consequent structures read right to left."""
    return (st.lhs, st.rhs) if side == ANT else (st.rhs, st.lhs)


def _has_const(st: Structure, const: type) -> bool:
    return any(isinstance(x, Formula) and any(isinstance(f, const) for f in x.subformulas()) for x in (st.lhs, st.rhs))


def _bridged(a: tuple[Structure, str], b: tuple[Structure, str]) -> bool:
    for st, side in (a, b):
        pos = structure_position(st, side)
        if (pos == PRE and _has_const(st, Bot)) or (pos == SUC and _has_const(st, Top)):
            return True
    return False


def _joint(last, first) -> list:
    return sorted(_sub(last) & _sub(first), key=str)


def _connected(a: tuple[Structure, str], b: tuple[Structure, str], last, first) -> bool:
    return bool(_joint(last, first)) or _bridged(a, b)


def is_canonical(s: Sequent) -> bool:
    """Cycle ``x1.1<=x1.2, ..., xn-1.1<=xn-1.2 |- xn.1>=xn.2`` with every pair
    of adjacent structures in connection."""
    if len(s.con) != 1 or not s.ant:
        return False
    c = s.con[0]
    first_c, last_c = _components(c, CON)
    items = [(st, ANT) for st in s.ant]
    for k in range(len(s.ant) - 1):
        if not _connected(items[k], items[k + 1], s.ant[k].rhs, s.ant[k + 1].lhs):
            return False
    if not _connected(items[-1], (c, CON), s.ant[-1].rhs, first_c):
        return False
    return _connected(items[0], (c, CON), last_c, s.ant[0].lhs)


def _tie(last, first) -> tuple:
    shared = _joint(last, first)
    terms = [x.var.index for x in shared if isinstance(x, Term)]
    if terms:
        return (0, min(terms))
    props = [v.index for x in shared if isinstance(x, Formula) for v in x.vars()]
    return (1, min(props) if props else 0)


def canonical_form(s: Sequent) -> Sequent:
    """Reorder the antecedent into the cycle starting and ending at the
    consequent structure. Raises NotCyclic when no such cycle exists."""
    if exact_two_violations(s):
        raise NotCyclic("; ".join(exact_two_violations(s)))
    if len(s.con) != 1 or not s.ant:
        raise NotCyclic("canonical sequents have one consequent structure and a non-empty antecedent")
    c = s.con[0]
    first_c, last_c = _components(c, CON)
    n = len(s.ant)

    def go(order: list[int], last) -> list[int] | None:
        if len(order) == n:
            tail = s.ant[order[-1]]
            ok = _connected((tail, ANT), (c, CON), tail.rhs, first_c)
            return order if ok else None
        prev = (s.ant[order[-1]], ANT) if order else (c, CON)
        cands = []
        for k in range(n):
            if k in order:
                continue
            st = s.ant[k]
            if _connected(prev, (st, ANT), last, st.lhs):
                cands.append((_tie(last, st.lhs), k))
        for _, k in sorted(cands):
            res = go(order + [k], s.ant[k].rhs)
            if res is not None:
                return res
        return None

    order = go([], last_c)
    if order is None:
        raise NotCyclic(f"structures of {print_sequent(s)} do not form a cycle")
    return Sequent([s.ant[k] for k in order], [c])


def _fix_twins(cfg: CalcConfig, s: Sequent, direction: str) -> RuleInstance | None:
    """Adjunction on the consequent exposing the joint variable, if needed."""
    c = s.con[0]
    if direction == CLOCKWISE_DIR:
        if isinstance(c.lhs, Term) and c.lhs.bare:
            return None
        rule = {"<#>": "Adj_BdBox_inv", "<>": "Adj_DiaBb"}.get(c.lhs.op if isinstance(c.lhs, Term) else "")
    else:
        if isinstance(c.rhs, Term) and c.rhs.bare:
            return None
        rule = {"[]": "Adj_BdBox", "[#]": "Adj_DiaBb_inv"}.get(c.rhs.op if isinstance(c.rhs, Term) else "")
    if rule is None:
        raise RotationError(f"{c} cannot be brought into switch position")
    return next(forward_instances(cfg, rule, [s], hints=[[(CON, 0)]]))


def rotate_step(cfg: CalcConfig, s: Sequent, direction: str = CLOCKWISE_DIR) -> list[RuleInstance]:
    """One cyclic permutation of a canonical sequent: the first (clockwise)
    or last (anticlockwise) antecedent structure trades places with the
    consequent, preceded by an adjunction when the joint is not bare."""
    if len(s.con) != 1 or not s.ant:
        raise RotationError("rotation needs a canonical sequent")
    steps = []
    fix = _fix_twins(cfg, s, direction)
    if fix is not None:
        steps.append(fix)
        s = fix.conclusion
    rules = CLOCKWISE if direction == CLOCKWISE_DIR else ANTICLOCKWISE
    pair = [(ANT, 0) if direction == CLOCKWISE_DIR else (ANT, len(s.ant) - 1), (CON, 0)]
    errors = []
    for rule in rules:
        try:
            inst = next(forward_instances(cfg, rule, [s], hints=[pair]), None)
        except RuleError as e:
            errors.append(e)
            continue
        if inst is not None:
            steps.append(inst)
            return steps
    raise RotationError(f"no {direction.lower()} switch applies to {print_sequent(s)}")


def rotate(cfg: CalcConfig, s: Sequent, target, direction: str = CLOCKWISE_DIR) -> tuple[DisplayTrace, Sequent]:
    """Rotate until the antecedent structure at ``target`` is first
    (clockwise) or last (anticlockwise)."""
    loc = parse_loc(target)
    if loc[0] != ANT:
        raise RotationError("rotation target must be in the antecedent")
    start = s
    st = s[loc]
    idx = loc[1]
    steps: list[RuleInstance] = []
    goal = 0 if direction == CLOCKWISE_DIR else None
    for _ in range(len(s.ant) + 1):
        last = len(s.ant) - 1
        if idx == (goal if goal is not None else last):
            return DisplayTrace(steps, s, (ANT, idx), start), s
        batch = rotate_step(cfg, s, direction)
        steps.extend(batch)
        s = batch[-1].conclusion
        idx = idx - 1 if direction == CLOCKWISE_DIR else idx + 1
        if s.ant[idx] != st:
            raise RotationError("target changed during rotation")
    raise RotationError("rotation did not terminate")


def full_cycle(cfg: CalcConfig, s: Sequent, direction: str = CLOCKWISE_DIR, steps: int | None = None) -> DisplayTrace:
    """Apply ``steps`` one-step cyclic permutations; the default is one per
    antecedent structure, which brings the cycle back to its starting order."""
    n = len(s.ant) if steps is None else steps
    start, out = s, []
    for _ in range(n):
        batch = rotate_step(cfg, s, direction)
        out.extend(batch)
        s = batch[-1].conclusion
    return DisplayTrace(out, s, (CON, 0), start)
