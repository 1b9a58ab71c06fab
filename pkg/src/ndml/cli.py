"""Command-line front end: ``ndml <command> ...``.

Exit status: 0 success, 1 semantic failure (invalid derivation, countermodel,
search exhausted), 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

from . import alba
from .calculus import INVERTIBLE, NON_INVERTIBLE, SIGMA_ALL, CalcConfig
from .proof import (
    Derivation,
    SearchStats,
    check_derivation,
    config_from_meta,
    dumps,
    load,
    prove_with_fallback,
    render,
)
from .semantics import countermodel, enumerate_models, satisfies
from .syntax import ParseError, Sequent, WellFormednessError, alpha_equivalent, parse_sequent, print_sequent
from .transform import TransformError, canonical_form, cut_eliminate, display

OK, FAIL, USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _seed() -> int:
    raw = os.environ.get("NDML_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"NDML_SEED must be an integer, got {raw!r}") from None


def _sigma(text: str | None) -> list[str]:
    if not text:
        return []
    items = [x for x in text.replace(",", " ").split() if x]
    bad = [x for x in items if x not in SIGMA_ALL]
    if bad:
        raise UsageError(f"unknown axioms {bad}; choose from {list(SIGMA_ALL)}")
    return items


def _mode(text: str | None, default: str) -> str:
    if text is None:
        return default
    table = {"invertible": INVERTIBLE, "noninvertible": NON_INVERTIBLE, "non-invertible": NON_INVERTIBLE}
    key = text.lower()
    if key not in table:
        raise UsageError(f"unknown mode {text!r}")
    return table[key]


def _sequent(text: str) -> Sequent:
    try:
        return parse_sequent(text)
    except (ParseError, WellFormednessError) as e:
        raise UsageError(str(e)) from None


def _load(path: str, args) -> tuple[Derivation, CalcConfig]:
    try:
        d, meta = load(path)
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}") from None
    except (ValueError, KeyError) as e:
        raise UsageError(f"cannot read {path}: {e}") from None
    cfg = config_from_meta(meta)
    if getattr(args, "sigma", None) is not None or getattr(args, "mode", None) is not None:
        sigma = _sigma(args.sigma) if args.sigma is not None else sorted(cfg.sigma)
        cfg = CalcConfig.make(sigma, _mode(args.mode, cfg.mode), cfg.relaxed_switch)
    return d, cfg


def _meta(cfg: CalcConfig) -> dict:
    out = {"sigma": sorted(cfg.sigma), "mode": cfg.mode}
    if cfg.relaxed_switch:
        out["relaxed_switch"] = True
    return out


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=1, ensure_ascii=False))
    else:
        print(text)


def _write(path: str | None, d: Derivation, cfg: CalcConfig) -> None:
    if path:
        Path(path).write_text(dumps(d, **_meta(cfg)) + "\n")


# ----------------------------------------------------------------- commands


def cmd_check(args) -> int:
    d, cfg = _load(args.file, args)
    rep = check_derivation(cfg, d)
    lines = [f"{'valid' if rep.ok else 'INVALID'}: {print_sequent(d.conclusion)}"]
    lines += [f"  {v}" for v in rep.violations]
    _emit(args, {"ok": rep.ok, "conclusion": print_sequent(d.conclusion), "violations": [str(v) for v in rep.violations]}, "\n".join(lines))
    return OK if rep.ok else FAIL


def cmd_prove(args) -> int:
    goal = _sequent(args.sequent)
    cfg = CalcConfig.make(_sigma(args.sigma), _mode(args.mode, INVERTIBLE))
    stats = SearchStats()
    d, used = prove_with_fallback(cfg, goal, args.depth, timeout=args.timeout, stats=stats)
    payload = {"found": d is not None, "nodes": stats.nodes, "seconds": round(stats.seconds, 3), **_meta(used)}
    if d is None:
        _emit(args, payload, f"no proof within depth {args.depth} ({stats.nodes} nodes)")
        return FAIL
    _write(args.out, d, used)
    payload["derivation"] = json.loads(dumps(d))["derivation"]
    note = " (switch conclusion condition relaxed)" if used.relaxed_switch else ""
    _emit(args, payload, render(d) + f"\nproved in {stats.seconds:.2f}s, {stats.nodes} nodes{note}")
    return OK


def cmd_cutelim(args) -> int:
    d, cfg = _load(args.file, args)
    rep = check_derivation(cfg, d)
    if not rep.ok:
        _emit(args, {"ok": False, "violations": [str(v) for v in rep.violations]}, f"input does not check: {rep.violations[0]}")
        return FAIL
    try:
        out = cut_eliminate(cfg, d)
    except TransformError as e:
        _emit(args, {"ok": False, "error": e.kind, "message": str(e)}, f"{e.kind}: {e}")
        return FAIL
    ok = out.is_cut_free() and check_derivation(cfg, out).ok and alpha_equivalent(out.conclusion, d.conclusion)
    _write(args.out, out, cfg)
    payload = {"ok": ok, "cuts_before": len(d.cuts()), "derivation": json.loads(dumps(out))["derivation"]}
    _emit(args, payload, render(out) + f"\n{len(d.cuts())} cut(s) eliminated")
    return OK if ok else FAIL


def cmd_display(args) -> int:
    d, cfg = _load(args.file, args)
    try:
        trace = display(cfg, d, args.target)
    except (ValueError, IndexError) as e:
        if isinstance(e, TransformError):
            _emit(args, {"ok": False, "error": e.kind, "message": str(e)}, f"{e.kind}: {e}")
            return FAIL
        raise UsageError(str(e)) from None
    out = trace.derivation(d)
    _write(args.out, out, cfg)
    steps = [f"{inst.rule}: {print_sequent(inst.conclusion)}" for inst in trace.steps]
    payload = {
        "ok": True,
        "steps": [{"rule": i.rule, "conclusion": print_sequent(i.conclusion)} for i in trace.steps],
        "result": print_sequent(trace.result),
        "target": f"{trace.target[0]}:{trace.target[1]}",
    }
    text = "\n".join(steps + [f"displayed {trace.result[trace.target]} in {print_sequent(trace.result)}"])
    _emit(args, payload, text)
    return OK


def cmd_canon(args) -> int:
    s = _sequent(args.sequent)
    try:
        c = canonical_form(s)
    except TransformError as e:
        _emit(args, {"ok": False, "error": e.kind, "message": str(e)}, f"{e.kind}: {e}")
        return FAIL
    _emit(args, {"ok": True, "canonical": print_sequent(c)}, print_sequent(c))
    return OK


def cmd_alba(args) -> int:
    try:
        res = alba.run(args.inequality)
    except (alba.OutOfFragment, alba.AckermannBlocked, alba.UnsupportedShape) as e:
        _emit(args, {"ok": False, "error": type(e).__name__, "message": str(e)}, f"{type(e).__name__}: {e}")
        return FAIL
    except (ParseError, WellFormednessError) as e:
        raise UsageError(str(e)) from None
    prem, concl = res.rule.schema()
    payload = {
        "ok": True,
        "chain": [str(s) for s in res.chain],
        "correspondent": str(res.correspondent),
        "rule": {"premise": prem, "conclusion": concl, "eigenvariables": list(map(str, res.rule.eigenvariables))},
        "matches": alba.table_rule(res.rule),
    }
    text = res.report()
    if payload["matches"]:
        text += f"\nmatches rule:    {payload['matches']}"
    _emit(args, payload, text)
    return OK


def _models(args, sigma):
    for m in enumerate_models(args.max_size, seed=_seed(), count=args.models):
        if satisfies(m, sigma):
            yield m


def cmd_validate(args) -> int:
    s = _sequent(args.sequent)
    sigma = _sigma(args.sigma)
    if not 1 <= args.max_size <= 7:
        raise UsageError("--max-size must be between 1 and 7")
    checked = 0
    for m in _models(args, sigma):
        checked += 1
        env = countermodel(m, s)
        if env is not None:
            assignment = {str(v): x for v, x in env.items()}
            payload = {"valid": False, "model": m.name, "size": m.size, "assignment": assignment, "checked": checked}
            _emit(args, payload, f"countermodel on {m.name}: {assignment}")
            return FAIL
    _emit(args, {"valid": True, "checked": checked}, f"valid on all {checked} models")
    return OK


def _corpus_files(path: str | None) -> list:
    if path:
        p = Path(path)
        if not p.is_dir():
            raise UsageError(f"not a directory: {path}")
        return sorted(p.glob("*.json"))
    return sorted((f for f in resources.files("ndml.corpus").iterdir() if f.name.endswith(".json")), key=lambda f: f.name)


def cmd_corpus(args) -> int:
    files = _corpus_files(args.dir)
    models = list(enumerate_models(args.max_size, seed=_seed(), count=args.models))
    rows, ok_all = [], True
    for f in files:
        d, meta = load(f)
        cfg = config_from_meta(meta)
        row = {"name": f.name[:-5], "check": check_derivation(cfg, d).ok}
        try:
            e = cut_eliminate(cfg, d)
            row["cutelim"] = e.is_cut_free() and check_derivation(cfg, e).ok and alpha_equivalent(e.conclusion, d.conclusion)
        except TransformError as ex:
            row["cutelim"] = False
            row["error"] = f"{ex.kind}: {ex}"
        row["valid"] = all(countermodel(m, d.conclusion) is None for m in models if satisfies(m, cfg.sigma))
        rows.append(row)
        ok_all &= row["check"] and row["cutelim"] and row["valid"]
    text = "\n".join(
        f"{r['name']:10} check={'ok' if r['check'] else 'FAIL'} cutelim={'ok' if r['cutelim'] else 'FAIL'} valid={'ok' if r['valid'] else 'FAIL'}"
        for r in rows
    )
    _emit(args, {"ok": ok_all, "entries": rows}, text)
    return OK if ok_all else FAIL


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ndml", description="Labelled calculi: checking, search, cut elimination, correspondence.")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, mode=True):
        sp.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="machine-readable output")
        sp.add_argument("--sigma", default=None, help="axioms among T,4,B,D,C (comma separated)")
        if mode:
            sp.add_argument("--mode", default=None, help="Invertible or NonInvertible")

    sp = sub.add_parser("check", help="check a derivation file")
    sp.add_argument("file")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("prove", help="backward proof search")
    sp.add_argument("sequent")
    common(sp)
    sp.add_argument("--depth", type=int, default=12)
    sp.add_argument("--timeout", type=float, default=None, help="seconds")
    sp.add_argument("--out", default=None, help="write the derivation to this file")
    sp.set_defaults(func=cmd_prove)

    sp = sub.add_parser("cutelim", help="eliminate cuts from a derivation file")
    sp.add_argument("file")
    common(sp)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_cutelim)

    sp = sub.add_parser("display", help="display a structure of a derivation's end-sequent")
    sp.add_argument("file")
    common(sp)
    sp.add_argument("--target", required=True, help="locator such as ant:0 or con:0")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_display)

    sp = sub.add_parser("canon", help="canonical form of a sequent")
    sp.add_argument("sequent")
    sp.add_argument("--json", action="store_true", default=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_canon)

    sp = sub.add_parser("alba", help="correspondent and structural rule of an inequality")
    sp.add_argument("inequality")
    sp.add_argument("--json", action="store_true", default=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_alba)

    sp = sub.add_parser("validate", help="search finite models for a countermodel")
    sp.add_argument("sequent")
    common(sp, mode=False)
    sp.add_argument("--models", type=int, default=100, help="number of random models after the fixed family")
    sp.add_argument("--max-size", type=int, default=6)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("corpus", help="check, cut-eliminate and validate every corpus derivation")
    sp.add_argument("dir", nargs="?", default=None)
    sp.add_argument("--json", action="store_true", default=argparse.SUPPRESS)
    sp.add_argument("--models", type=int, default=20)
    sp.add_argument("--max-size", type=int, default=5)
    sp.set_defaults(func=cmd_corpus)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return USAGE if e.code else OK
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
