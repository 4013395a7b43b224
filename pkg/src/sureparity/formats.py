"""Text formats: the MDP file grammar, the query grammar and strategy artifacts."""

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

from .errors import MixedStrictness, ParseError, QuerySyntax, UnknownTarget
from .model import SINK_ACTION, Fsm, Memoryless, Mixture, Stitched, validate_mdp

_ID = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-']*")
_NUM = re.compile(r"(\d+/\d+|\d+(\.\d+)?|\.\d+)")


def parse_rational(text: str) -> Fraction:
    """``a/b`` or a terminating decimal, converted exactly."""
    if not _NUM.fullmatch(text):
        raise ValueError(f"not a rational: {text!r}")
    return Fraction(text)


def _tokens(line: str):
    """Whitespace-separated tokens with 1-based start columns, comments removed."""
    code = line.split("#", 1)[0]
    return [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", code)]


def parse_mdp_file(text: str, source: str = "model"):
    """Parse the line-based MDP format and validate the result.

    Grammar, one declaration per line::

        state <id> priority <nat>
        sink <id> priority <nat> [target <name>...]
        init <id>
        act <state> <action> <succ>:<rational> ...
    """
    states, prios, sinks, trans = [], {}, [], {}
    targets = {}
    initial = None
    declared_at = {}
    acts_at = []
    any_decl = False
    lines = text.splitlines()
    for ln, line in enumerate(lines, 1):
        toks = _tokens(line)
        if not toks:
            continue
        any_decl = True
        kw, col = toks[0]

        def need(k, what):
            if len(toks) <= k:
                end = len(line.split("#", 1)[0].rstrip()) + 2
                raise ParseError(ln, end, what, source)
            return toks[k]

        def ident(k, what):
            tok, c = need(k, what)
            if not _ID.fullmatch(tok):
                raise ParseError(ln, c, what, source)
            return tok

        def nat(k):
            tok, c = need(k, "natural number")
            if not tok.isdigit():
                raise ParseError(ln, c, "natural number", source)
            return int(tok)

        if kw in ("state", "sink"):
            sid = ident(1, "state identifier")
            if sid in declared_at:
                raise ParseError(ln, toks[1][1], f"fresh identifier ({sid!r} already declared on line {declared_at[sid]})", source)
            tok, c = need(2, "'priority'")
            if tok != "priority":
                raise ParseError(ln, c, "'priority'", source)
            prio = nat(3)
            declared_at[sid] = ln
            states.append(sid)
            prios[sid] = prio
            rest = toks[4:]
            if kw == "state":
                if rest:
                    raise ParseError(ln, rest[0][1], "end of line", source)
            else:
                sinks.append(sid)
                if rest:
                    if rest[0][0] != "target":
                        raise ParseError(ln, rest[0][1], "'target' or end of line", source)
                    if len(rest) == 1:
                        raise ParseError(ln, rest[0][1] + len("target") + 1, "target name", source)
                    for name, c in rest[1:]:
                        if not _ID.fullmatch(name):
                            raise ParseError(ln, c, "target name", source)
                        targets.setdefault(name, []).append(sid)
        elif kw == "init":
            sid = ident(1, "state identifier")
            if len(toks) > 2:
                raise ParseError(ln, toks[2][1], "end of line", source)
            if initial is not None:
                raise ParseError(ln, col, "at most one 'init' line", source)
            initial = (sid, ln, toks[1][1])
        elif kw == "act":
            sid = ident(1, "state identifier")
            act = ident(2, "action identifier")
            if len(toks) < 4:
                need(3, "successor of the form <state>:<rational>")
            dist = {}
            for tok, c in toks[3:]:
                name, sep, num = tok.partition(":")
                if not sep or not _ID.fullmatch(name):
                    raise ParseError(ln, c, "successor of the form <state>:<rational>", source)
                try:
                    w = parse_rational(num)
                except ValueError:
                    raise ParseError(ln, c + len(name) + 1, "rational (a/b or decimal)", source) from None
                dist[name] = dist.get(name, Fraction(0)) + w
                acts_at.append((name, ln, c))
            if (sid, act) in trans:
                raise ParseError(ln, toks[2][1], f"fresh action ({act!r} at {sid!r} already defined)", source)
            trans[(sid, act)] = dist
            acts_at.append((sid, ln, toks[1][1]))
        else:
            raise ParseError(ln, col, "'state', 'sink', 'init' or 'act'", source)
    if not any_decl:
        raise ParseError(1, 1, "at least one state declaration", source)
    for name, ln, c in acts_at:
        if name not in declared_at:
            raise ParseError(ln, c, f"declared state (unknown {name!r})", source)
    if initial is not None and initial[0] not in declared_at:
        raise ParseError(initial[1], initial[2], f"declared state (unknown {initial[0]!r})", source)
    for s in sinks:
        for (t, a) in trans:
            if t == s:
                raise ParseError(declared_at[s], 1, f"no 'act' lines for sink {s!r}", source)
    return validate_mdp(states, prios, trans, list(targets.items()),
                        initial[0] if initial else None, sinks)


def _fmt(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def print_mdp(m) -> str:
    """Inverse of :func:`parse_mdp_file` (up to comments and spacing)."""
    lines = []
    member = {s: [n for n, f in m.targets if s in f] for s in m.states}
    for s in m.states:
        if m.is_sink(s) and m.enabled[s] == (SINK_ACTION,):
            extra = (" target " + " ".join(member[s])) if member[s] else ""
            lines.append(f"sink {s} priority {m.priorities[s]}{extra}")
        else:
            lines.append(f"state {s} priority {m.priorities[s]}")
    if m.initial is not None:
        lines.append(f"init {m.initial}")
    for s in m.states:
        if m.is_sink(s) and m.enabled[s] == (SINK_ACTION,):
            continue
        for a in m.enabled[s]:
            succ = " ".join(f"{t}:{_fmt(p)}" for t, p in m.trans[(s, a)].items())
            lines.append(f"act {s} {a} {succ}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# queries

STRICT, NONSTRICT, LEX, FRONTIER = "strict", "nonstrict", "lex", "frontier"


@dataclass
class Query:
    mode: str
    thresholds: Tuple[Fraction, ...] = ()
    targets: Tuple[str, ...] = ()  # names in the order written
    order: Tuple[str, ...] = ()  # lex order
    sure_parity: bool = True
    start: Optional[str] = None
    text: str = ""

    def threshold_vector(self, names: List[str]) -> Tuple[Fraction, ...]:
        """Thresholds laid out in model target order (unmentioned targets get 0)."""
        by_name = dict(zip(self.targets, self.thresholds))
        return tuple(by_name.get(n, Fraction(0)) for n in names)


_QTOK = re.compile(r"\s*(>=|>|\[|\]|,|[A-Za-z_][A-Za-z0-9_.\-']*|\d+/\d+|\d+(?:\.\d+)?|\.\d+)")


def _lex_query(text):
    pos, out = 0, []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _QTOK.match(text, pos)
        if not m:
            raise QuerySyntax(pos + len(text[pos:]) - len(text[pos:].lstrip()), "a token")
        out.append((m.group(1), m.start(1)))
        pos = m.end()
    return out


def parse_query(text: str, target_names: Optional[List[str]] = None) -> Query:
    """Parse a query.

    Forms: ``SURE parity AND P>1/2 [F1] AND P>1/6 [F2]`` (strict),
    ``P>=...`` (non-strict), ``SURE parity LEXMAX [F2, F1]`` and
    ``FRONTIER``.  The ``SURE parity`` prefix is optional for threshold
    queries.
    """
    toks = _lex_query(text)
    k = 0

    def peek():
        return toks[k][0] if k < len(toks) else None

    def expect(word, what=None):
        nonlocal k
        if peek() != word:
            raise QuerySyntax(toks[k][1] if k < len(toks) else len(text), what or repr(word))
        k += 1

    def name():
        nonlocal k
        tok = peek()
        if tok is None or not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.\-']*", tok):
            raise QuerySyntax(toks[k][1] if k < len(toks) else len(text), "target name")
        k += 1
        if target_names is not None and tok not in target_names:
            raise UnknownTarget(tok)
        return tok

    if peek() == "FRONTIER":
        k += 1
        if k != len(toks):
            raise QuerySyntax(toks[k][1], "end of query")
        return Query(FRONTIER, text=text)
    sure = False
    if peek() == "SURE":
        k += 1
        expect("parity", "'parity'")
        sure = True
        if peek() == "LEXMAX":
            k += 1
            expect("[")
            order = [name()]
            while peek() == ",":
                k += 1
                order.append(name())
            expect("]")
            if k != len(toks):
                raise QuerySyntax(toks[k][1], "end of query")
            if len(set(order)) != len(order):
                raise QuerySyntax(0, "distinct targets in LEXMAX")
            return Query(LEX, order=tuple(order), text=text)
        if peek() is None:
            return Query(NONSTRICT, sure_parity=True, text=text)
        expect("AND", "'AND' or 'LEXMAX'")
    rels, ths, names = [], [], []
    while True:
        expect("P", "'P'")
        rel = peek()
        if rel not in (">", ">="):
            raise QuerySyntax(toks[k][1] if k < len(toks) else len(text), "'>' or '>='")
        k += 1
        tok = peek()
        try:
            val = parse_rational(tok or "")
        except ValueError:
            raise QuerySyntax(toks[k][1] if k < len(toks) else len(text), "rational threshold") from None
        if val > 1:
            raise QuerySyntax(toks[k][1], "threshold in [0,1]")
        k += 1
        expect("[")
        nm = name()
        expect("]")
        rels.append(rel)
        ths.append(val)
        names.append(nm)
        if peek() is None:
            break
        expect("AND", "'AND' or end of query")
    if len(set(rels)) > 1:
        raise MixedStrictness()
    if len(set(names)) != len(names):
        raise QuerySyntax(0, "each target at most once")
    mode = STRICT if rels[0] == ">" else NONSTRICT
    return Query(mode, tuple(ths), tuple(names), sure_parity=sure, text=text)


# ---------------------------------------------------------------------------
# strategy artifacts

STRATEGY_FORMAT = "sureparity-strategy/1"


def _dist_out(d):
    return {str(a): _fmt(w) for a, w in d.items()}


def _dist_in(d):
    return {a: Fraction(w) for a, w in d.items()}


def _enc(x):
    """JSON-safe, reversible encoding of a memory mode or state id."""
    if x is None or isinstance(x, (str, bool)):
        return x
    if isinstance(x, int):
        return {"int": str(x)}
    if isinstance(x, tuple):
        return {"tuple": [_enc(v) for v in x]}
    if isinstance(x, Fraction):
        return {"q": _fmt(x)}
    raise TypeError(f"cannot encode {x!r}")


def _dec(x):
    if x is None or isinstance(x, (str, bool)):
        return x
    if "int" in x:
        return int(x["int"])
    if "tuple" in x:
        return tuple(_dec(v) for v in x["tuple"])
    if "q" in x:
        return Fraction(x["q"])
    raise ValueError(f"cannot decode {x!r}")


def strategy_to_obj(sigma) -> dict:
    if isinstance(sigma, Memoryless):
        return {"kind": "Memoryless",
                "table": [[_enc(s), _dist_out(d)] for s, d in sigma.choice.items()]}
    if isinstance(sigma, Fsm):
        return {"kind": "Fsm", "initial": _enc(sigma.initial),
                "update": [[_enc(q), _enc(s), _enc(q2)] for (q, s), q2 in sigma.update.items()],
                "output": [[_enc(q), _enc(s), _dist_out(d)] for (q, s), d in sigma.output.items()]}
    if isinstance(sigma, Stitched):
        return {"kind": "Stitched", "first": strategy_to_obj(sigma.first),
                "horizon": str(sigma.horizon), "second": strategy_to_obj(sigma.second)}
    if isinstance(sigma, Mixture):
        return {"kind": "Mixture",
                "parts": [{"weight": _fmt(w), "strategy": strategy_to_obj(p)} for w, p in sigma.parts]}
    raise TypeError(f"unknown strategy type {type(sigma).__name__}")


def strategy_from_obj(obj: dict):
    kind = obj.get("kind")
    if kind == "Memoryless":
        return Memoryless({_dec(s): _dist_in(d) for s, d in obj["table"]})
    if kind == "Fsm":
        return Fsm(_dec(obj["initial"]),
                   {(_dec(q), _dec(s)): _dec(q2) for q, s, q2 in obj["update"]},
                   {(_dec(q), _dec(s)): _dist_in(d) for q, s, d in obj["output"]})
    if kind == "Stitched":
        first = strategy_from_obj(obj["first"])
        return Stitched(first, int(obj["horizon"]), strategy_from_obj(obj["second"]))
    if kind == "Mixture":
        return Mixture(tuple((Fraction(p["weight"]), strategy_from_obj(p["strategy"])) for p in obj["parts"]))
    raise ValueError(f"unknown strategy kind {kind!r}")


def export_strategy(sigma) -> str:
    """Self-describing JSON artifact; :func:`import_strategy` reverses it exactly."""
    return json.dumps({"format": STRATEGY_FORMAT, "strategy": strategy_to_obj(sigma)}, indent=1) + "\n"


def import_strategy(text: str):
    obj = json.loads(text)
    if obj.get("format") != STRATEGY_FORMAT:
        raise ValueError(f"not a {STRATEGY_FORMAT} artifact")
    return strategy_from_obj(obj["strategy"])
