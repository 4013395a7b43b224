"""Parity games extracted from MDPs, and the sure-parity / almost-sure-reach checks.

The game has a controller vertex ``("c", s)`` per state and an adversary
vertex ``("a", s, a)`` per enabled pair; the adversary resolves the
probabilistic choice.  Adversary vertices carry the priority of their
source state, so the extra step never changes a play's winner.
"""

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Mapping, Optional, Tuple

from .errors import BudgetExceeded
from .model import (Fsm, Mdp, Memoryless, induce, reach_to, restrict,
                    sure_parity_on_chain)

EVEN, ODD = 0, 1


@dataclass(frozen=True, eq=False)
class TurnBasedGame:
    vertices: Tuple
    owner: Mapping  # vertex -> EVEN (controller) or ODD (adversary)
    succ: Mapping  # vertex -> tuple of vertices
    priority: Mapping
    fair: Mapping  # adversary vertex -> bool

    def controller(self, s):
        return ("c", s)

    def pred_map(self) -> Dict:
        pred = {v: [] for v in self.vertices}
        for v in self.vertices:
            for w in self.succ[v]:
                pred[w].append(v)
        return pred


def build_game(m: Mdp) -> TurnBasedGame:
    verts, owner, succ, prio, fair = [], {}, {}, {}, {}
    for s in m.states:
        v = ("c", s)
        verts.append(v)
        owner[v] = EVEN
        succ[v] = tuple(("a", s, a) for a in m.enabled[s])
        prio[v] = m.priorities[s]
    for s in m.states:
        for a in m.enabled[s]:
            u = ("a", s, a)
            verts.append(u)
            owner[u] = ODD
            succ[u] = tuple(("c", t) for t in m.trans[(s, a)])
            prio[u] = m.priorities[s]
            fair[u] = len(succ[u]) >= 1
    return TurnBasedGame(tuple(verts), owner, succ, prio, fair)


@dataclass
class WinningRegions:
    even: FrozenSet
    odd: FrozenSet
    strategy_even: Dict = field(default_factory=dict)
    strategy_odd: Dict = field(default_factory=dict)


def attractor(g: TurnBasedGame, player: int, target, arena, order: Mapping):
    """Vertices of ``arena`` from which ``player`` forces a visit to ``target``.

    Returns the set and a choice for the player's own vertices outside the
    target.  Vertices are processed in ``order`` so the output is
    deterministic.
    """
    attr = set(target)
    choice = {}
    changed = True
    arena_sorted = sorted(arena, key=order.__getitem__)
    while changed:
        changed = False
        for v in arena_sorted:
            if v in attr:
                continue
            nxt = [w for w in g.succ[v] if w in arena]
            if g.owner[v] == player:
                hit = next((w for w in nxt if w in attr), None)
                if hit is not None:
                    attr.add(v)
                    choice[v] = hit
                    changed = True
            elif nxt and all(w in attr for w in nxt):
                attr.add(v)
                changed = True
    return attr, choice


def zielonka(g: TurnBasedGame, arena=None) -> WinningRegions:
    """Classical recursive parity game solver (highest priority first)."""
    order = {v: k for k, v in enumerate(g.vertices)}
    arena = set(g.vertices if arena is None else arena)

    def solve(sub):
        if not sub:
            return set(), set(), {}, {}
        d = max(g.priority[v] for v in sub)
        p = d % 2
        top = {v for v in sub if g.priority[v] == d}
        a, a_choice = attractor(g, p, top, sub, order)
        w = [None, None]
        strat = [None, None]
        w[0], w[1], strat[0], strat[1] = solve(sub - a)
        if not w[1 - p]:
            win = set(sub)
            sp = dict(strat[p])
            sp.update(a_choice)
            for v in sorted(top, key=order.__getitem__):
                if g.owner[v] == p:
                    sp[v] = next(u for u in g.succ[v] if u in sub)
            out = [None, None]
            out_s = [None, None]
            out[p], out[1 - p] = win, set()
            out_s[p], out_s[1 - p] = sp, {}
            return out[0], out[1], out_s[0], out_s[1]
        b, b_choice = attractor(g, 1 - p, w[1 - p], sub, order)
        r = [None, None]
        rs = [None, None]
        r[0], r[1], rs[0], rs[1] = solve(sub - b)
        opp = set(r[1 - p]) | b
        so = dict(rs[1 - p])
        so.update(strat[1 - p])
        so.update(b_choice)
        out = [None, None]
        out_s = [None, None]
        out[p], out[1 - p] = set(r[p]), opp
        out_s[p], out_s[1 - p] = dict(rs[p]), so
        return out[0], out[1], out_s[0], out_s[1]

    w0, w1, s0, s1 = solve(arena)
    s0 = {v: u for v, u in s0.items() if v in w0 and g.owner[v] == EVEN}
    s1 = {v: u for v, u in s1.items() if v in w1 and g.owner[v] == ODD}
    return WinningRegions(frozenset(w0), frozenset(w1), s0, s1)


def sure_parity_region(m: Mdp):
    """States that surely satisfy parity, with a memoryless deterministic witness."""
    g = build_game(m)
    reg = zielonka(g)
    region = frozenset(s for s in m.states if ("c", s) in reg.even)
    choice = {s: reg.strategy_even[("c", s)][2] for s in region}
    return region, Memoryless.deterministic(choice)


def clean_wrt_parity(m: Mdp) -> Mdp:
    """Restrict ``m`` to its sure-parity region (iterated until stable)."""
    cur = m
    while True:
        region, _ = sure_parity_region(cur)
        nxt = restrict(cur, region)
        if len(nxt.states) == len(cur.states) and nxt.num_pairs() == cur.num_pairs():
            return nxt
        cur = nxt


# ---------------------------------------------------------------------------
# Sure parity together with almost-sure reachability of the goal.
#
# Solved on the game where adversary vertices are fair: the controller wins a
# play iff it satisfies parity and, if it is strongly transition-fair, it
# reaches the goal.  The recursion works on a set X of live states and a set
# Good of states already known to be winning (initially the goal sinks).
# Actions are usable when their support stays inside X | Good.


class _Fixed:
    def __init__(self, choice):
        self.choice = choice

    def start(self, s):
        return ()

    def out(self, q, s):
        return self.choice[s]

    def step(self, q, s2):
        return ()


class _Layered:
    """Play the strategy of the layer holding the current state; restart on layer change."""

    def __init__(self, layers):
        self.layers = [(frozenset(r), st) for r, st in layers if r]
        self.where = {}
        for k, (r, _) in enumerate(self.layers):
            for s in r:
                self.where.setdefault(s, k)

    def start(self, s):
        k = self.where[s]
        return (k, self.layers[k][1].start(s))

    def out(self, q, s):
        return self.layers[q[0]][1].out(q[1], s)

    def step(self, q, s2):
        k = self.where[s2]
        if k == q[0]:
            return (k, self.layers[k][1].step(q[1], s2))
        return (k, self.layers[k][1].start(s2))


class _Attempt:
    """Controller strategy for the even top-priority case.

    From each top-priority state it launches an attempt: follow the
    almost-sure progress actions while the progress rank keeps dropping.
    Between attempts it forces a return to the top-priority states, or plays
    the sub-strategy where that is impossible.
    """

    def __init__(self, top, attr_set, attr_choice, rank, prog, sub_region, sub):
        self.top, self.attr_set, self.attr_choice = top, attr_set, attr_choice
        self.rank, self.prog = rank, prog
        self.sub_region, self.sub = sub_region, sub

    def _enter(self, s):
        if s in self.top:
            return ("att", self.rank[s])
        if s in self.attr_set:
            return ("attr",)
        return ("sub", self.sub.start(s))

    def start(self, s):
        return self._enter(s)

    def out(self, q, s):
        if q[0] == "att":
            return self.prog[s]
        if q[0] == "attr":
            return self.attr_choice[s]
        return self.sub.out(q[1], s)

    def step(self, q, s2):
        if q[0] == "att" and self.rank[s2] < q[1]:
            return ("att", self.rank[s2])
        if q[0] == "sub" and s2 in self.sub_region:
            return ("sub", self.sub.step(q[1], s2))
        return self._enter(s2)


class _ConjSolver:
    def __init__(self, m: Mdp, goal):
        self.m = m
        self.g = build_game(m)
        self.goal = frozenset(goal)
        self.order = {s: k for k, s in enumerate(m.states)}
        self.calls = 0

    def acts(self, s):
        return [u[2] for u in self.g.succ[("c", s)]]

    def supp(self, s, a):
        return [w[1] for w in self.g.succ[("a", s, a)]]

    def usable(self, s, live):
        return [a for a in self.acts(s) if all(t in live for t in self.supp(s, a))]

    def sorted(self, xs):
        return sorted(xs, key=self.order.__getitem__)

    def almost_sure(self, x, good):
        """Greatest set Z inside x from which good is reached almost surely, staying in Z | good.

        Returns (Z, rank, progress action).
        """
        z = set(x)
        while True:
            live = z | good
            reached = set()
            rank, prog = {}, {}
            level = 0
            changed = True
            while changed:
                changed = False
                base = reached | good
                new = {}
                for s in self.sorted(z - reached):
                    for a in self.usable(s, live):
                        if any(t in base for t in self.supp(s, a)):
                            new[s] = a
                            break
                if new:
                    level += 1
                    for s, a in new.items():
                        rank[s], prog[s] = level, a
                    reached |= set(new)
                    changed = True
            if reached == z:
                return z, rank, prog
            z = reached

    def sure_attractor(self, x, target, good):
        """Controller surely reaches target | good from the returned set (inside x)."""
        live = x | good
        attr = set(target)
        choice = {}
        changed = True
        while changed:
            changed = False
            for s in self.sorted(x - attr):
                for a in self.usable(s, live):
                    if all(t in attr or t in good for t in self.supp(s, a)):
                        attr.add(s)
                        choice[s] = a
                        changed = True
                        break
        return attr, choice

    def nature_attractor(self, x, target, good):
        """Adversary surely forces target from the returned set (inside x)."""
        live = x | good
        attr = set(target)
        changed = True
        while changed:
            changed = False
            for s in self.sorted(x - attr):
                if all(any(t in attr for t in self.supp(s, a)) for a in self.usable(s, live)):
                    attr.add(s)
                    changed = True
        return attr

    def solve(self, x, good):
        self.calls += 1
        x, rank, prog = self.almost_sure(x, good)
        if not x:
            return set(), None
        d = max(self.m.priorities[s] for s in x)
        top = {s for s in x if self.m.priorities[s] == d}
        if d % 2 == 1:
            s0, s0_choice = self.sure_attractor(x, set(), good)
            if s0:
                rest, rest_strat = self.solve(x - s0, good | s0)
                return rest | s0, _Layered([(rest, rest_strat), (s0, _Fixed(s0_choice))])
            a1 = self.nature_attractor(x, top, good)
            w1, w1_strat = self.solve(x - a1, good)
            if not w1:
                return set(), None
            rest, rest_strat = self.solve(x - w1, good | w1)
            return rest | w1, _Layered([(rest, rest_strat), (w1, w1_strat)])
        a0, a0_choice = self.sure_attractor(x, top, good)
        sub = x - a0
        sub_win, sub_strat = self.solve(sub, good | a0) if sub else (set(), None)
        lost = sub - sub_win
        if not lost:
            return set(x), _Attempt(top, a0, a0_choice, rank, prog, sub_win, sub_strat)
        b = self.nature_attractor(x, lost, good)
        return self.solve(x - b, good)


def _materialize(m: Mdp, strat, region, goal) -> Fsm:
    """Explicit finite-state machine for a composed strategy, from every start in ``region``."""
    sink = {s: m.enabled[s][0] for s in goal}
    init = 0
    ids = {}

    def mode_id(q):
        if q not in ids:
            ids[q] = len(ids) + 1
        return ids[q]

    update, output = {}, {}
    todo = []
    for s in region:
        q = ("goal",) if s in goal else ("run", strat.start(s))
        update[(init, s)] = mode_id(q)
        todo.append((q, s))
    seen = set()
    while todo:
        q, s = todo.pop()
        key = (mode_id(q), s)
        if key in seen:
            continue
        seen.add(key)
        a = sink[s] if q[0] == "goal" else strat.out(q[1], s)
        output[key] = {a: 1}
        for t in m.trans[(s, a)]:
            if t in goal:
                q2 = ("goal",)
            else:
                q2 = ("run", strat.step(q[1], t))
            update[(key[0], t)] = mode_id(q2)
            todo.append((q2, t))
    output = {k: {a: Fraction(w) for a, w in d.items()} for k, d in output.items()}
    return Fsm(init, update, output)


@dataclass
class ConjResult:
    region: FrozenSet
    strategy: Optional[Fsm]
    memory: int
    verified: bool


def verify_conj_witness(m: Mdp, sigma, s, goal=None) -> bool:
    """Induced chain from ``s`` has no reachable odd cycle and reaches the goal surely-almost."""
    goal = m.goal if goal is None else frozenset(goal)
    c = induce(m, sigma, s)
    if not sure_parity_on_chain(c):
        return False
    nodes = [v for v in c.states if c.state_of[v] in goal]
    return reach_to(c, nodes)[c.initial] == 1


def conj_region(m: Mdp, goal=None, verify: bool = True) -> ConjResult:
    """States from which some strategy surely satisfies parity and reaches the goal with probability 1.

    ``goal`` defaults to the union of the targets plus the projection sink.
    The returned finite-memory strategy is re-checked from every state of the
    region on its induced chain.
    """
    goal = frozenset(m.goal if goal is None else goal)
    for s in goal:
        if not m.is_sink(s) or m.priorities[s] % 2:
            raise ValueError(f"goal state {s!r} must be an even-priority sink")
    solver = _ConjSolver(m, goal)
    live = set(m.states) - goal
    win, strat = solver.solve(live, set(goal))
    region = frozenset(win | goal)
    layered = strat if strat is not None else _Fixed({})
    fsm = _materialize(m, layered, region, goal) if region else None
    ok = True
    if verify and fsm is not None:
        for s in m.states:
            if s in region and not verify_conj_witness(m, fsm, s, goal):
                ok = False
                raise AssertionError(f"conj_region witness fails its re-check from {s!r}")
    return ConjResult(region, fsm, fsm.memory_size if fsm else 0, ok)


# ---------------------------------------------------------------------------
# brute-force oracle


def brute_force_conj(m: Mdp, memory_bound: int, goal=None, budget: int = 2_000_000) -> FrozenSet:
    """States won by some pure finite-state strategy with at most ``memory_bound`` modes.

    The induced graph of such a strategy has at most ``memory_bound`` nodes
    per state, no odd-max cycle, and a path to the goal from every node, so
    it carries a progress measure (per odd priority d, a counter bounded by
    the number of d-nodes) and a goal distance (bounded by the node count).
    The search runs over all (state, measure, distance) labels within those
    bounds.  A closed label set is itself a winning machine whose modes are
    the labels, so every accepted state has a witness
    (:func:`conj_oracle_witness`) and no bounded strategy is missed.
    """
    goal = frozenset(m.goal if goal is None else goal)
    if len(m.states) * max(1, len(m.actions)) * memory_bound > budget:
        raise BudgetExceeded(f"model too large for the oracle at memory {memory_bound}")
    table = _LabelSearch(m, goal, memory_bound)
    if table.size > budget:
        raise BudgetExceeded(f"{table.size} labels exceed the oracle budget {budget}")
    return frozenset(table.winners())


def conj_oracle_witness(m: Mdp, memory_bound: int, goal=None) -> Tuple[FrozenSet, Optional[Fsm]]:
    """Oracle winners plus the label machine that wins from each of them."""
    goal = frozenset(m.goal if goal is None else goal)
    table = _LabelSearch(m, goal, memory_bound)
    return frozenset(table.winners()), table.machine()


class _LabelSearch:
    """Greatest fixpoint over labels (state, measure) with least goal distances.

    A measure holds one counter per odd priority, highest first.  Leaving a
    state of priority p keeps the counters above p, resets those below p to
    their maximum and, when p is odd, decreases the block from p upwards
    lexicographically.  A label stays alive when some action keeps every
    non-goal successor on an alive label and gets strictly closer to the
    goal through one successor (or enters the goal directly).
    """

    def __init__(self, m: Mdp, goal, k: int):
        self.m, self.goal, self.k = m, goal, k
        self.live = [s for s in m.states if s not in goal]
        self.odd = sorted({m.priorities[s] for s in self.live if m.priorities[s] % 2}, reverse=True)
        self.cap = tuple(k * sum(1 for s in self.live if m.priorities[s] == d) for d in self.odd)
        self.far = k * len(self.live)
        n_meas = 1
        for c in self.cap:
            n_meas *= c + 1
        self.size = len(self.live) * n_meas
        self.dist = None

    def succ_measure(self, mu, p):
        """Largest measure allowed after leaving a priority-p state with measure mu (None if none)."""
        out = list(mu)
        block = [k for k, d in enumerate(self.odd) if d >= p]
        for k, d in enumerate(self.odd):
            if d < p:
                out[k] = self.cap[k]
        if p % 2 == 0:
            return tuple(out)
        for k in reversed(block):
            if out[k] > 0:
                out[k] -= 1
                for j in block:
                    if j > k:
                        out[j] = self.cap[j]
                return tuple(out)
        return None

    def solve(self):
        if self.dist is not None:
            return self.dist
        m, goal = self.m, self.goal
        measures = list(itertools.product(*[range(c + 1) for c in self.cap]))
        moves = {}
        for s in self.live:
            for mu in measures:
                nxt = self.succ_measure(mu, m.priorities[s])
                opts = []
                if nxt is not None:
                    for a in m.enabled[s]:
                        sup = m.trans[(s, a)]
                        opts.append((a, any(t in goal for t in sup),
                                     [(t, nxt) for t in sup if t not in goal]))
                moves[(s, mu)] = opts
        alive = set(moves)
        inf = self.far + 1
        while True:
            dist = dict.fromkeys(alive, inf)
            changed = True
            while changed:
                changed = False
                for v in alive:
                    best = dist[v]
                    for a, hits, succ in moves[v]:
                        if any(w not in alive for w in succ):
                            continue
                        d = 1 if hits else 1 + min(dist[w] for w in succ)
                        if d < best:
                            best = d
                    if best < dist[v]:
                        dist[v] = best
                        changed = True
            keep = {v for v in alive if dist[v] <= self.far}
            if keep == alive:
                self.dist, self.moves = dist, moves
                return dist
            alive = keep

    def winners(self):
        dist = self.solve()
        return set(self.goal & set(self.m.states)) | {s for s in self.live if (s, self.cap) in dist}

    def machine(self) -> Optional[Fsm]:
        """Label machine winning from every winner.

        Modes are (state, measure, distance): the state is part of the mode
        because the next measure depends on the priority just left.
        """
        dist = self.solve()
        m, goal = self.m, self.goal
        update, output = {}, {}
        done = ("goal",)

        def label(t, mu):
            return done if t in goal else (t, mu, dist[(t, mu)])

        todo = []
        for s in self.winners():
            q = label(s, self.cap)
            update[("init", s)] = q
            todo.append((q, s))
        seen = set()
        while todo:
            q, s = todo.pop()
            if (q, s) in seen:
                continue
            seen.add((q, s))
            if q == done:
                output[(q, s)] = {m.enabled[s][0]: Fraction(1)}
                update[(q, s)] = q
                continue
            _, mu, d = q
            a = self._pick(s, mu, d)
            output[(q, s)] = {a: Fraction(1)}
            nxt = self.succ_measure(mu, m.priorities[s])
            for t in m.trans[(s, a)]:
                q2 = label(t, nxt)
                update[(q, t)] = q2
                todo.append((q2, t))
        return Fsm("init", update, output) if output else None

    def _pick(self, s, mu, d):
        for a, hits, succ in self.moves[(s, mu)]:
            if any(w not in self.dist for w in succ):
                continue
            if hits or any(self.dist[w] < d for w in succ):
                return a
        raise AssertionError("alive label without a realising action")


def memory_bound_for(m: Mdp) -> int:
    """The 2|S||priorities| memory bound used as a corpus-level check."""
    return 2 * len(m.states) * len(set(m.priorities.values()))
