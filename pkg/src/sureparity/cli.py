"""Command line front end.

    sureparity MODEL --query QUERY [options]
    sureparity verify MODEL STRATEGY --query QUERY [--expect pass|fail]

Exit codes: 0 yes (or frontier written / check passed), 1 no (check failed),
2 error.  MODEL is a path or ``corpus:<name>`` for a bundled model.
"""

import argparse
import json
import sys
import time
from fractions import Fraction
from pathlib import Path
from typing import List, Optional

from . import corpus_names, corpus_text
from .errors import BudgetExceeded, NotCleanTargets, SureParityError
from .formats import (FRONTIER, LEX, NONSTRICT, STRICT, export_strategy, import_strategy,
                      parse_mdp_file, parse_query)
from .geometry import frontier
from .model import DEFAULT_CAP, Mixture, Stitched, check_clean_targets, induce, memory_size, simulate
from .parity import brute_force_conj, clean_wrt_parity, conj_region, sure_parity_region
from .pipeline import Verdict, decide_nonstrict, decide_strict, lex_optimize, verify_strategy

SCHEMA = "sureparity-report/1"
SIM_EPISODES = 2000
SIM_HORIZON = 200


class UsageError(Exception):
    pass


def fmt_q(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def approx(q: Fraction) -> str:
    return f"{float(q):.6g}"


def to_json(x):
    """Exact, JSON-safe rendering: rationals become 'a/b' strings."""
    if isinstance(x, Fraction):
        return fmt_q(x)
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    if isinstance(x, float):
        return x
    if isinstance(x, dict):
        return {str(k): to_json(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set, frozenset)):
        items = sorted(x, key=str) if isinstance(x, (set, frozenset)) else x
        return [to_json(v) for v in items]
    return str(x)


def load_model(spec: str):
    if spec.startswith("corpus:"):
        name = spec[len("corpus:"):]
        if name not in corpus_names():
            raise UsageError(f"no bundled model {name!r}; available: {', '.join(corpus_names())}")
        return parse_mdp_file(corpus_text(name), source=f"{name}.mdp")
    path = Path(spec)
    return parse_mdp_file(path.read_text(encoding="utf-8"), source=path.name)


def vector_entries(names, vec):
    return [{"target": n, "exact": fmt_q(v), "approx": approx(v)} for n, v in zip(names, vec)]


def strategy_summary(sigma) -> dict:
    out = {"kind": type(sigma).__name__, "memory": memory_size(sigma)}
    if isinstance(sigma, Stitched):
        out["horizon"] = str(sigma.horizon)
    if isinstance(sigma, Mixture):
        out["parts"] = [{"weight": fmt_q(w), "kind": type(p).__name__,
                         "horizon": str(p.horizon) if isinstance(p, Stitched) else None}
                        for w, p in sigma.parts]
    return out


def check_record(chk) -> dict:
    return {"mode": chk.mode, "sure_parity": chk.sure_parity,
            "reach": None if chk.reach is None else [fmt_q(v) for v in chk.reach],
            "strict": chk.strict, "checks": list(chk.checks), "all_pass": chk.ok}


# ---------------------------------------------------------------------------
# frontier files


def frontier_csv(points) -> str:
    return "".join(",".join(fmt_q(v) for v in p) + "\n" for p in points)


def frontier_svg(points, names, size: int = 320, pad: int = 40) -> str:
    """Achievable region (downward closure of the hull) with its maximal points."""
    pts = sorted(points)
    span = size - 2 * pad

    def xy(p):
        return pad + float(p[0]) * span, size - pad - float(p[1]) * span

    outline = [(Fraction(0), Fraction(0)), (Fraction(0), pts[0][1])] + pts + [(pts[-1][0], Fraction(0))]
    poly = " ".join("%.2f,%.2f" % xy(p) for p in outline)
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}" font-family="sans-serif" font-size="11">',
             f'<rect x="{pad}" y="{pad}" width="{span}" height="{span}" fill="none" stroke="#999"/>',
             f'<polygon points="{poly}" fill="#cfe3f7" stroke="#1f5f99" stroke-width="1.5"/>']
    for p in pts:
        x, y = xy(p)
        lines.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3.5" fill="#1f5f99"/>')
        lines.append(f'<text x="{x + 5:.2f}" y="{y - 5:.2f}">({fmt_q(p[0])}, {fmt_q(p[1])})</text>')
    lines.append(f'<text x="{size / 2:.0f}" y="{size - 10}" text-anchor="middle">Pr(&#9671;{names[0]})</text>')
    lines.append(f'<text x="12" y="{size / 2:.0f}" transform="rotate(-90 12 {size / 2:.0f})" '
                 f'text-anchor="middle">Pr(&#9671;{names[1]})</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_frontier(path: str, poly, names) -> str:
    if path.endswith(".svg"):
        if poly.n != 2:
            raise UsageError("SVG output needs exactly two targets; use a .csv path")
        Path(path).write_text(frontier_svg(poly.points, names), encoding="utf-8")
    else:
        Path(path).write_text(frontier_csv(poly.points), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# run


def _thresholds(query, m):
    names = m.target_names
    if query.mode == STRICT and set(query.targets) != set(names):
        missing = [n for n in names if n not in query.targets]
        raise UsageError(f"a strict query must bound every target; missing: {', '.join(missing)}")
    return query.threshold_vector(names)


def run(args) -> int:
    t0 = time.perf_counter()
    m = load_model(args.model)
    query = parse_query(args.query, m.target_names)
    s0 = args.start if args.start is not None else m.initial
    if s0 not in m.enabled:
        raise UsageError(f"unknown start state {s0!r}")
    report = {"schema": SCHEMA, "query": {"text": query.text, "mode": query.mode},
              "model": {"source": args.model, "states": len(m.states), "targets": m.target_names},
              "start": s0, "cleaning": {"parity_removed": []}}
    ok, bad = check_clean_targets(m)
    if not ok:
        raise NotCleanTargets(bad)
    notes = []
    if query.mode != FRONTIER:
        region, _ = sure_parity_region(m)
        if len(region) != len(m.states):
            if not args.auto_clean_parity:
                removed = [str(s) for s in m.states if s not in region]
                raise SureParityError(f"model is not clean w.r.t. parity; offending states: {removed} "
                                      "(rerun with --auto-clean-parity to prune them)")
            cleaned = clean_wrt_parity(m)
            report["cleaning"]["parity_removed"] = [str(s) for s in m.states if s not in cleaned.enabled]
            ok, bad = check_clean_targets(cleaned)
            if not ok:
                raise NotCleanTargets(bad)
            m = cleaned
    if args.oracle_memory is not None:
        report["oracle"] = oracle_comparison(m, args.oracle_memory)

    if query.mode == FRONTIER:
        poly = frontier(m, s0)
        report["verdict"] = "frontier"
        report["frontier"] = {"points": to_json(poly.points), "extreme": to_json(poly.extreme),
                              "facets": [{"normal": to_json(w), "offset": fmt_q(c)} for w, c in poly.upper_facets]}
        if args.frontier_out:
            report["frontier"]["written"] = write_frontier(args.frontier_out, poly, m.target_names)
        code = 0
    elif s0 not in m.enabled:
        # the start state cannot surely satisfy parity at all
        report["verdict"] = "no"
        notes.append("start state removed by parity cleaning")
        code = 1
    else:
        verdict = dispatch(m, query, s0, args.materialize_cap)
        code = fill_verdict(report, verdict, m, query, args)
    if notes:
        report["notes"] = notes
    report["timing"] = {"seconds": round(time.perf_counter() - t0, 4)}
    emit(report, args.format)
    return code


def dispatch(m, query, s0, cap) -> Verdict:
    if query.mode == LEX:
        order = [m.target_index(n) for n in query.order]
        return lex_optimize(m, order, s0)
    p = _thresholds(query, m)
    if query.mode == STRICT:
        return decide_strict(m, p, s0, cap)
    return decide_nonstrict(m, p, s0, cap)


def fill_verdict(report, v: Verdict, m, query, args) -> int:
    names = m.target_names
    report["verdict"] = "yes" if v.answer else "no"
    if query.mode in (STRICT, NONSTRICT):
        report["thresholds"] = vector_entries(names, _thresholds(query, m))
    if v.achieved is not None:
        report["achieved"] = vector_entries(names, v.achieved)
    if v.p_star is not None:
        report["p_star"] = vector_entries(query.order, v.p_star)
    if v.witness is not None:
        report["strategy"] = strategy_summary(v.witness)
        if args.strategy:
            Path(args.strategy).write_text(export_strategy(v.witness), encoding="utf-8")
            report["strategy"]["written"] = args.strategy
    if v.verification is not None:
        report["verification"] = check_record(v.verification)
    if v.flags:
        report["flags"] = list(v.flags)
    report["trace"] = to_json(v.trace)
    if args.seed is not None and v.witness is not None:
        report["simulation"] = simulation(m, v.witness, report["start"], args.seed, args.materialize_cap)
    if v.answer and not (v.verification and v.verification.ok):
        report["error"] = "witness failed its verification"
        return 2
    return 0 if v.answer else 1


def simulation(m, sigma, s0, seed, cap) -> dict:
    """Monte Carlo sanity estimate of bounded reachability (approximate, never used for verdicts)."""
    try:
        c = induce(m, sigma, s0, cap)
    except SureParityError as exc:
        return {"skipped": str(exc)}
    return to_json(simulate(c, SIM_EPISODES, SIM_HORIZON, seed))


def oracle_comparison(m, memory: int) -> dict:
    fast = conj_region(m).region
    try:
        slow = brute_force_conj(m, memory)
    except BudgetExceeded as exc:
        return {"memory": memory, "error": str(exc)}
    return {"memory": memory, "conj_region": to_json(fast), "oracle": to_json(slow), "agree": fast == slow}


# ---------------------------------------------------------------------------
# verify


def verify(args) -> int:
    t0 = time.perf_counter()
    m = load_model(args.model)
    query = parse_query(args.query, m.target_names)
    if query.mode == FRONTIER:
        raise UsageError("FRONTIER queries have no strategy to verify")
    sigma = import_strategy(Path(args.strategy).read_text(encoding="utf-8"))
    s0 = args.start if args.start is not None else m.initial
    if query.mode == LEX:
        p, strict = tuple(Fraction(0) for _ in m.target_names), False
    else:
        p, strict = _thresholds(query, m), query.mode == STRICT
    chk = verify_strategy(m, sigma, p, strict, s0, args.materialize_cap)
    report = {"schema": SCHEMA, "query": {"text": query.text, "mode": query.mode},
              "model": {"source": args.model, "states": len(m.states), "targets": m.target_names},
              "start": s0, "strategy": strategy_summary(sigma), "verification": check_record(chk),
              "verdict": "pass" if chk.ok else "fail"}
    if chk.reach is not None:
        report["achieved"] = vector_entries(m.target_names, chk.reach)
    report["timing"] = {"seconds": round(time.perf_counter() - t0, 4)}
    if args.expect is not None and (args.expect == "pass") != chk.ok:
        report["error"] = f"claimed {args.expect} but the check says {report['verdict']}"
        emit(report, args.format)
        return 2
    emit(report, args.format)
    return 0 if chk.ok else 1


# ---------------------------------------------------------------------------
# output


def render_text(r: dict) -> str:
    out = [f"query:   {r['query']['text']}",
           f"model:   {r['model']['source']} ({r['model']['states']} states, "
           f"targets {' '.join(r['model']['targets'])}), start {r['start']}"]
    removed = r.get("cleaning", {}).get("parity_removed")
    if removed:
        out.append(f"cleaning: removed {', '.join(removed)} (no sure parity)")
    out.append(f"verdict: {r['verdict']}")
    for key in ("thresholds", "achieved", "p_star"):
        if key in r:
            vals = ", ".join(f"{e['target']} = {e['exact']} (~{e['approx']})" for e in r[key])
            out.append(f"{key}: {vals}")
    if "frontier" in r:
        out.append("maximal points: " + " ".join(f"({', '.join(p)})" for p in r["frontier"]["points"]))
        out.append("extreme points: " + " ".join(f"({', '.join(p)})" for p in r["frontier"]["extreme"]))
        if "written" in r["frontier"]:
            out.append(f"frontier written to {r['frontier']['written']}")
    if "strategy" in r:
        s = r["strategy"]
        line = f"strategy: {s['kind']}, memory {s['memory']}"
        if s.get("horizon"):
            line += f", horizon {s['horizon']}"
        if s.get("written"):
            line += f", written to {s['written']}"
        out.append(line)
    if "verification" in r:
        v = r["verification"]
        out.append(f"verification ({v['mode']}): {'all checks pass' if v['all_pass'] else 'FAILED'}")
        out.extend(f"  - {c}" for c in v["checks"])
    for flag in r.get("flags", []):
        out.append(f"flag: {flag}")
    if "oracle" in r:
        o = r["oracle"]
        out.append(f"oracle (memory {o['memory']}): " +
                   (o["error"] if "error" in o else ("agrees" if o["agree"] else "DISAGREES")))
    if "simulation" in r:
        out.append(f"simulation (approximate): {r['simulation']}")
    if r.get("trace"):
        out.append("trace:")
        for k, step in enumerate(r["trace"], 1):
            rest = ", ".join(f"{a}={b}" for a, b in step.items() if a != "step")
            out.append(f"  {k}. {step.get('step')}: {rest}")
    for note in r.get("notes", []):
        out.append(f"note: {note}")
    if "error" in r:
        out.append(f"error: {r['error']}")
    out.append(f"time: {r['timing']['seconds']} s")
    return "\n".join(out)


def emit(report: dict, fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(to_json(report), indent=2))
    else:
        print(render_text(report))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--query", required=True, help="query text, e.g. 'SURE parity AND P>1/2 [F1]'")
    common.add_argument("--from", dest="start", help="start state (default: the model's init)")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--materialize-cap", type=int, default=DEFAULT_CAP,
                        help="largest horizon expanded into an explicit chain")
    parser = argparse.ArgumentParser(prog="sureparity", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command")
    r = sub.add_parser("run", parents=[common], help="decide a query and synthesize a witness")
    r.add_argument("model", help="model file or corpus:<name>")
    r.add_argument("--strategy", help="write the witness strategy to this path")
    r.add_argument("--frontier-out", help="write the frontier as CSV, or SVG for two targets")
    r.add_argument("--auto-clean-parity", action="store_true",
                   help="prune states that cannot surely satisfy parity instead of failing")
    r.add_argument("--oracle-memory", type=int, help="cross-check the conjunction region against the oracle")
    r.add_argument("--seed", type=int, help="also report a seeded Monte Carlo estimate of the witness")
    v = sub.add_parser("verify", parents=[common], help="check a strategy artifact against a query")
    v.add_argument("model")
    v.add_argument("strategy")
    v.add_argument("--expect", choices=("pass", "fail"), help="exit 2 if the check disagrees")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] not in ("run", "verify", "-h", "--help"):
        argv.insert(0, "run")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2
    try:
        return run(args) if args.command == "run" else verify(args)
    except (SureParityError, UsageError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
