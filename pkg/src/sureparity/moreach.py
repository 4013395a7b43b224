"""Multi-objective reachability to sink targets via occupation measures."""

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .arith import EQ, GE, LE, LinearProgram, Optimal, lex_vertex, lp_solve
from .errors import NotCleanTargets, ThresholdNotStrictlyExceeded
from .model import (Mdp, Memoryless, check_clean_targets, expected_hitting_time, induce, reach_to,
                    reach_vector)


class OccupationLp:
    """Flow LP over expected visit counts ``y(s,a)`` of the non-sink pairs.

    For each non-sink ``s``: ``sum_a y(s,a) = [s = s0] + sum y(s',a') P(s',a',s)``.
    Absorption into target ``i`` is ``r_i = sum y(s,a) P(s,a,F_i)``.
    """

    def __init__(self, m: Mdp, s0):
        self.m = m
        self.s0 = s0
        self.pairs = [(s, a) for s in m.states if not m.is_sink(s) for a in m.enabled[s]]
        self.index = {p: k for k, p in enumerate(self.pairs)}
        self.flow_states = [s for s in m.states if not m.is_sink(s)]
        n = len(self.pairs)
        rows = []
        for s in self.flow_states:
            row = [Fraction(0)] * n
            for (t, a), k in self.index.items():
                if t == s:
                    row[k] += 1
                row[k] -= m.trans[(t, a)].get(s, Fraction(0))
            rows.append((row, EQ, Fraction(int(s == s0))))
        self.flow = rows
        self.absorb = []
        for _, f in m.targets:
            self.absorb.append([sum((m.trans[(s, a)].get(t, Fraction(0)) for t in f), Fraction(0))
                                for (s, a) in self.pairs])
        # a sink start state absorbs immediately
        self.fixed = None
        if s0 in m.states and m.is_sink(s0):
            self.fixed = tuple(Fraction(int(s0 in f)) for _, f in m.targets)

    @property
    def variables(self) -> List[str]:
        return [f"y[{s},{a}]" for s, a in self.pairs]

    def base(self, extra_vars=(), extra_free=()) -> LinearProgram:
        k = len(extra_vars)
        cons = [(row + [Fraction(0)] * k, rel, rhs) for row, rel, rhs in self.flow]
        return LinearProgram(self.variables + list(extra_vars), cons,
                             nonneg=[True] * len(self.pairs) + [not f for f in extra_free] if k else None)

    def reach_of(self, y) -> Tuple[Fraction, ...]:
        if self.fixed is not None:
            return self.fixed
        return tuple(sum((c * v for c, v in zip(row, y)), Fraction(0)) for row in self.absorb)

    def direction_lp(self, w) -> LinearProgram:
        lp = self.base()
        lp.objective = [sum((wi * row[k] for wi, row in zip(w, self.absorb)), Fraction(0))
                        for k in range(len(self.pairs))]
        return lp

    def optimize(self, w, tiebreak=None):
        """Maximize ``w . r`` and return ``(r, y)``; ties broken lexicographically on r."""
        if self.fixed is not None:
            return self.fixed, ()
        lp = self.direction_lp(w)
        n = len(self.absorb)
        order = tiebreak if tiebreak is not None else range(n)
        out = lex_vertex(lp, [self.absorb[i] for i in order])
        assert isinstance(out, Optimal), out
        y = out.point
        return self.reach_of(y), y

    def strategy(self, y) -> Memoryless:
        return extract_memoryless(self, y)


@dataclass
class Achievability:
    answer: bool
    margin: Optional[Fraction] = None  # t* for the strict variant
    reach: Optional[Tuple[Fraction, ...]] = None
    y: Optional[Tuple[Fraction, ...]] = None
    olp: Optional[OccupationLp] = None


def achievable(m: Mdp, s0, p: Sequence, strict: bool, check: bool = True) -> Achievability:
    """Is ``p`` (strictly) achievable for the n reachability objectives from ``s0``?

    Strict: maximize ``t`` with ``r_i >= p_i + t``; yes iff ``t* > 0``.
    """
    p = [Fraction(x) for x in p]
    if check:
        ok, bad = check_clean_targets(m)
        if not ok:
            raise NotCleanTargets(bad)
    olp = OccupationLp(m, s0)
    n = len(m.targets)
    if len(p) != n:
        raise ValueError(f"threshold vector has length {len(p)}, model has {n} targets")
    if olp.fixed is not None:
        r = olp.fixed
        if strict:
            t = min((ri - pi for ri, pi in zip(r, p)), default=Fraction(1))
            return Achievability(t > 0, t, r, (), olp)
        return Achievability(all(ri >= pi for ri, pi in zip(r, p)), None, r, (), olp)
    if strict:
        lp = olp.base(["t"], [True])
        for i in range(n):
            lp.add(olp.absorb[i] + [Fraction(-1)], GE, p[i])
        lp.add([Fraction(0)] * len(olp.pairs) + [Fraction(1)], LE, 1)
        lp.objective = [Fraction(0)] * len(olp.pairs) + [Fraction(1)]
        out = lp_solve(lp)
        if not isinstance(out, Optimal):
            return Achievability(False, None, None, None, olp)
        y = out.point[:-1]
        return Achievability(out.value > 0, out.value, olp.reach_of(y), y, olp)
    lp = olp.base()
    for i in range(n):
        lp.add(olp.absorb[i], GE, p[i])
    out = lp_solve(lp)
    if not isinstance(out, Optimal):
        return Achievability(False, None, None, None, olp)
    return Achievability(True, None, olp.reach_of(out.point), out.point, olp)


def extract_memoryless(olp: OccupationLp, y) -> Memoryless:
    """``sigma(s)(a) = y(s,a) / sum_a' y(s,a')``; lowest enabled action where that sum is 0."""
    m = olp.m
    choice = {}
    for s in m.states:
        if m.is_sink(s):
            choice[s] = {m.enabled[s][0]: Fraction(1)}
            continue
        tot = sum((y[olp.index[(s, a)]] for a in m.enabled[s]), Fraction(0)) if y else Fraction(0)
        if tot > 0:
            choice[s] = {a: y[olp.index[(s, a)]] / tot for a in m.enabled[s] if y[olp.index[(s, a)]] > 0}
        else:
            choice[s] = {m.enabled[s][0]: Fraction(1)}
    return Memoryless(choice)


def _no_path_states(m: Mdp, goal) -> set:
    """States with no path at all into ``goal``."""
    can = set(goal)
    changed = True
    while changed:
        changed = False
        for s in m.states:
            if s in can:
                continue
            if any(t in can for a in m.enabled[s] for t in m.support(s, a)):
                can.add(s)
                changed = True
    return set(m.states) - can


def optimal_values(m: Mdp, terminal: Mapping) -> Dict:
    """``max_sigma E[value of the absorbing state]`` for fixed terminal values.

    ``terminal`` maps absorbing states to non-negative values.  The result
    is the least solution of the Bellman inequalities, found by an exact LP.
    """
    terminal = {t: Fraction(v) for t, v in terminal.items()}
    zero = _no_path_states(m, [t for t, v in terminal.items() if v > 0])
    unknown = [s for s in m.states if s not in terminal and s not in zero]
    idx = {s: k for k, s in enumerate(unknown)}
    n = len(unknown)
    val: Dict = dict(terminal)
    val.update({s: Fraction(0) for s in zero if s not in terminal})
    if n:
        lp = LinearProgram([f"x[{s}]" for s in unknown], objective=[Fraction(1)] * n, maximize=False)
        for s in unknown:
            for a in m.enabled[s]:
                row = [Fraction(0)] * n
                row[idx[s]] += 1
                rhs = Fraction(0)
                for t, p in m.trans[(s, a)].items():
                    if t in idx:
                        row[idx[t]] -= p
                    else:
                        rhs += p * val[t]
                lp.add(row, GE, rhs)
        out = lp_solve(lp)
        assert isinstance(out, Optimal), out
        for s in unknown:
            val[s] = out.point[idx[s]]
    return val


def optimal_actions(m: Mdp, val) -> Dict:
    """Actions attaining the value at each state."""
    return {s: [a for a in m.enabled[s] if action_value(m, s, a, val) == val[s]] for s in m.states}


def max_reach_values(m: Mdp, goal) -> Tuple[Dict, Memoryless]:
    """Optimal ``max_sigma Pr_s(<> goal)`` for every state plus an optimal strategy.

    The strategy picks, among the actions attaining the value, one that
    moves strictly closer to the goal in the graph of optimal actions.
    """
    goal = frozenset(goal)
    val = optimal_values(m, {g: 1 for g in goal})
    opt = optimal_actions(m, val)
    choice = {s: m.enabled[s][0] for s in m.states}
    done = set(goal) | {s for s in m.states if val[s] == 0}
    progress = True
    while progress:
        progress = False
        for s in m.states:
            if s in done:
                continue
            for a in opt[s]:
                if any(t in done and (t in goal or val[t] > 0) for t in m.support(s, a)):
                    choice[s] = a
                    done.add(s)
                    progress = True
                    break
    return val, Memoryless.deterministic(choice)


def action_value(m: Mdp, s, a, val) -> Fraction:
    return sum((p * val[t] for t, p in m.trans[(s, a)].items()), Fraction(0))


def bound_B(c, targets: Sequence, p: Sequence) -> int:
    """Step bound after which the chain has already beaten every threshold.

    ``B = max_i floor(E[X~_{F_i}] / (Pr(<>F_i) - p_i)) + 1`` at the initial node.
    ``targets`` holds target indices or node sets.
    """
    best = 0
    for i, (tgt, pi) in enumerate(zip(targets, p)):
        goal = c.in_target(tgt) if isinstance(tgt, int) else frozenset(tgt)
        pr = reach_to(c, goal)[c.initial]
        if pr <= Fraction(pi):
            raise ThresholdNotStrictlyExceeded(i)
        e = expected_hitting_time(c, goal)[c.initial]
        b = (e / (pr - Fraction(pi))).__floor__() + 1
        best = max(best, b)
    return best


def strategy_reach(m: Mdp, sigma, s0) -> Tuple[Fraction, ...]:
    return reach_vector(induce(m, sigma, s0))
