"""MDPs, Markov chains, strategies and exact chain analyses."""

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Hashable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx

from .arith import frac, solve_linear_system
from .errors import (InvalidModel, MaterializationCapExceeded, NoEnabledAction, RowNotStochastic,
                     StrategyActionNotEnabled, TargetNotSink)

SINK_ACTION = "*"
DEFAULT_CAP = 10 ** 5


class _MixRoot:
    """Marker for the fresh branching node of an induced mixture chain."""

    def __repr__(self):
        return "mix"


MIX_ROOT = _MixRoot()

State = Hashable
Action = Hashable
Dist = Mapping[Hashable, Fraction]


@dataclass(frozen=True, eq=False)
class Mdp:
    """A validated MDP.  Build instances with :func:`validate_mdp`.

    ``bottom`` names the extra sink added by a projection; it belongs to no
    target but counts as absorbing mass for the Pr=1 checks.
    """

    states: Tuple[State, ...]
    actions: Tuple[Action, ...]
    enabled: Mapping[State, Tuple[Action, ...]]
    trans: Mapping[Tuple[State, Action], Dist]
    priorities: Mapping[State, int]
    targets: Tuple[Tuple[str, FrozenSet[State]], ...]
    initial: Optional[State] = None
    bottom: Optional[State] = None

    @property
    def target_names(self) -> List[str]:
        return [name for name, _ in self.targets]

    def target_set(self, i: int) -> FrozenSet[State]:
        return self.targets[i][1]

    def target_index(self, name: str) -> int:
        for i, (n, _) in enumerate(self.targets):
            if n == name:
                return i
        raise KeyError(name)

    @property
    def goal(self) -> FrozenSet[State]:
        """Union of all targets, plus the projection sink if there is one."""
        out = set()
        for _, f in self.targets:
            out |= f
        if self.bottom is not None:
            out.add(self.bottom)
        return frozenset(out)

    def succ(self, s, a) -> Dist:
        return self.trans[(s, a)]

    def support(self, s, a):
        return self.trans[(s, a)].keys()

    def is_sink(self, s) -> bool:
        acts = self.enabled[s]
        return len(acts) == 1 and dict(self.trans[(s, acts[0])]) == {s: 1}

    def pairs(self):
        for s in self.states:
            for a in self.enabled[s]:
                yield s, a

    def num_pairs(self) -> int:
        return sum(len(self.enabled[s]) for s in self.states)

    def with_initial(self, s) -> "Mdp":
        if s not in self.enabled:
            raise InvalidModel(f"unknown state {s!r}")
        return Mdp(self.states, self.actions, self.enabled, self.trans, self.priorities,
                   self.targets, s, self.bottom)

    def __repr__(self):
        return f"Mdp({len(self.states)} states, {self.num_pairs()} pairs, targets={self.target_names})"


def validate_mdp(states: Sequence, priorities: Mapping, trans: Mapping, targets=(),
                 initial=None, sinks=(), bottom=None) -> Mdp:
    """Check every MDP invariant and return the frozen model.

    ``trans`` maps ``(state, action)`` to a distribution.  States listed in
    ``sinks`` (and target members without actions) receive the canonical
    ``*`` self-loop; target states whose actions are all self-loops are
    collapsed onto that single action.
    """
    states = tuple(dict.fromkeys(states))
    known = set(states)
    enabled: Dict = {s: [] for s in states}
    clean_trans = {}
    for (s, a), dist in trans.items():
        if s not in known:
            raise InvalidModel(f"transition from unknown state {s!r}")
        row = {}
        for t, w in dist.items():
            if t not in known:
                raise InvalidModel(f"transition {s!r}/{a!r} to unknown state {t!r}")
            w = frac(w)
            if w < 0 or w > 1:
                raise InvalidModel(f"weight {w} of {s!r}/{a!r}->{t!r} outside [0,1]")
            if w:
                row[t] = row.get(t, Fraction(0)) + w
        total = sum(row.values(), Fraction(0))
        if total != 1:
            raise RowNotStochastic(s, a, total)
        if a not in enabled[s]:
            enabled[s].append(a)
        clean_trans[(s, a)] = row
    target_list = []
    seen_names = set()
    for name, members in targets:
        if name in seen_names:
            raise InvalidModel(f"duplicate target name {name!r}")
        seen_names.add(name)
        members = frozenset(members)
        for s in members:
            if s not in known:
                raise InvalidModel(f"target {name!r} names unknown state {s!r}")
        target_list.append((name, members))
    in_targets = set().union(*(m for _, m in target_list)) if target_list else set()
    declared = set(sinks) | ({bottom} if bottom is not None else set())
    for s in states:
        acts = enabled[s]
        self_loops = all(clean_trans[(s, a)] == {s: 1} for a in acts)
        if (s in declared or s in in_targets) and self_loops:
            for a in acts:
                del clean_trans[(s, a)]
            enabled[s] = [SINK_ACTION]
            clean_trans[(s, SINK_ACTION)] = {s: Fraction(1)}
    for s in states:
        if not enabled[s]:
            raise NoEnabledAction(s)
    for s in sorted(in_targets, key=states.index):
        if not (len(enabled[s]) == 1 and clean_trans[(s, enabled[s][0])] == {s: 1}):
            raise TargetNotSink(s)
    prios = {}
    for s in states:
        p = priorities.get(s, 0)
        if not isinstance(p, int) or p < 0:
            raise InvalidModel(f"priority of {s!r} must be a natural number")
        prios[s] = p
    if initial is not None and initial not in known:
        raise InvalidModel(f"initial state {initial!r} unknown")
    actions = tuple(dict.fromkeys(a for s in states for a in enabled[s]))
    return Mdp(states, actions, {s: tuple(enabled[s]) for s in states}, clean_trans, prios,
               tuple(target_list), initial, bottom)


def restrict(m: Mdp, keep, actions: Optional[Mapping] = None) -> Mdp:
    """Largest sub-MDP inside ``keep`` (optionally also inside ``actions``).

    Actions whose support leaves the current state set are dropped, then
    states left without actions, until nothing changes.  The result may be
    empty; its ``initial`` is None when the initial state was dropped.
    """
    cur = set(keep) & set(m.states)
    allowed = {s: [a for a in m.enabled[s] if actions is None or a in actions.get(s, ())] for s in cur}
    changed = True
    while changed:
        changed = False
        for s in list(cur):
            acts = [a for a in allowed[s] if all(t in cur for t in m.support(s, a))]
            if len(acts) != len(allowed[s]):
                allowed[s] = acts
                changed = True
            if not acts:
                cur.discard(s)
                changed = True
    states = tuple(s for s in m.states if s in cur)
    enabled = {s: tuple(allowed[s]) for s in states}
    trans = {(s, a): m.trans[(s, a)] for s in states for a in enabled[s]}
    targets = tuple((name, frozenset(f & cur)) for name, f in m.targets)
    acts = tuple(dict.fromkeys(a for s in states for a in enabled[s]))
    return Mdp(states, acts, enabled, trans, {s: m.priorities[s] for s in states}, targets,
               m.initial if m.initial in cur else None,
               m.bottom if m.bottom in cur else None)


# ---------------------------------------------------------------------------
# Strategies
#
# A strategy is driven through three hooks: start(s) gives the memory mode at
# the first state, out(q, s) the action distribution, and step(q, s2) the new
# mode after moving to s2.


@dataclass(frozen=True, eq=False)
class Memoryless:
    choice: Mapping[State, Dist]

    @staticmethod
    def deterministic(mapping: Mapping) -> "Memoryless":
        return Memoryless({s: {a: Fraction(1)} for s, a in mapping.items()})

    def start(self, s):
        return None

    def out(self, q, s):
        try:
            return self.choice[s]
        except KeyError:
            raise StrategyActionNotEnabled(s, None) from None

    def step(self, q, s2):
        return None

    def is_deterministic(self) -> bool:
        return all(len(d) == 1 for d in self.choice.values())

    @property
    def memory_size(self) -> int:
        return 1


@dataclass(frozen=True, eq=False)
class Fsm:
    """Finite-state strategy.

    The mode at the first state ``s0`` is ``update[(initial, s0)]``; after a
    move to ``s2`` in mode ``q`` it becomes ``update[(q, s2)]``.  Applying the
    update to the first state lets one machine start from any state.
    """

    initial: Hashable
    update: Mapping[Tuple[Hashable, State], Hashable]
    output: Mapping[Tuple[Hashable, State], Dist]

    def start(self, s):
        return self._upd(self.initial, s)

    def out(self, q, s):
        try:
            return self.output[(q, s)]
        except KeyError:
            raise StrategyActionNotEnabled(s, None) from None

    def step(self, q, s2):
        return self._upd(q, s2)

    def _upd(self, q, s):
        try:
            return self.update[(q, s)]
        except KeyError:
            raise StrategyActionNotEnabled(s, None) from None

    @property
    def modes(self):
        out = {self.initial}
        out.update(q for q, _ in self.output)
        return out

    @property
    def memory_size(self) -> int:
        return len({q for q, _ in self.output})


@dataclass(frozen=True, eq=False)
class Stitched:
    """Play ``first`` for ``horizon`` steps, then ``second`` from wherever the play is."""

    first: Memoryless
    horizon: int
    second: object

    def start(self, s):
        return (self.horizon, self.second.start(s)) if self.horizon == 0 else (0, None)

    def out(self, q, s):
        k, inner = q
        return self.first.out(None, s) if k < self.horizon else self.second.out(inner, s)

    def step(self, q, s2):
        k, inner = q
        if k < self.horizon:
            k += 1
            return (k, self.second.start(s2)) if k == self.horizon else (k, None)
        return (k, self.second.step(inner, s2))

    @property
    def memory_size(self) -> int:
        return self.horizon + memory_size(self.second)


@dataclass(frozen=True, eq=False)
class Mixture:
    parts: Tuple[Tuple[Fraction, object], ...]

    def __post_init__(self):
        ws = [w for w, _ in self.parts]
        if not ws or any(w <= 0 for w in ws) or sum(ws, Fraction(0)) != 1:
            raise InvalidModel("mixture weights must be positive and sum to 1")

    @property
    def memory_size(self) -> int:
        return sum(memory_size(p) for _, p in self.parts)


def memory_size(sigma) -> int:
    return sigma.memory_size


def strategy_kind(sigma) -> str:
    return type(sigma).__name__


# ---------------------------------------------------------------------------
# Markov chains


@dataclass(frozen=True, eq=False)
class MarkovChain:
    states: Tuple[Hashable, ...]
    trans: Mapping[Hashable, Dist]
    initial: Hashable
    priorities: Mapping[Hashable, int]
    target_flags: Mapping[Hashable, FrozenSet[int]]
    num_targets: int = 0
    state_of: Mapping[Hashable, State] = field(default_factory=dict)

    def in_target(self, i) -> FrozenSet:
        return frozenset(v for v in self.states if i in self.target_flags.get(v, ()))

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.states)
        for v, row in self.trans.items():
            for w in row:
                g.add_edge(v, w)
        return g


def make_chain(trans: Mapping, initial, priorities=None, targets: Sequence = ()) -> MarkovChain:
    """Small helper for hand-built chains: ``targets`` is a list of node sets."""
    nodes = tuple(dict.fromkeys(list(trans) + [w for row in trans.values() for w in row]))
    rows = {}
    for v in nodes:
        row = {w: frac(p) for w, p in trans.get(v, {v: 1}).items() if frac(p)}
        if sum(row.values(), Fraction(0)) != 1:
            raise InvalidModel(f"chain row of {v!r} does not sum to 1")
        rows[v] = row
    flags = {v: frozenset(i for i, f in enumerate(targets) if v in f) for v in nodes}
    prios = {v: (priorities or {}).get(v, 0) for v in nodes}
    return MarkovChain(nodes, rows, initial, prios, flags, len(targets), {v: v for v in nodes})


def _mix(dist_actions: Dist, m: Mdp, s):
    """Combine an action distribution with the MDP rows: returns {(a, s2): p}."""
    out = {}
    for a, pa in dist_actions.items():
        if pa == 0:
            continue
        if a not in m.enabled.get(s, ()):
            raise StrategyActionNotEnabled(s, a)
        for s2, p in m.trans[(s, a)].items():
            out[s2] = out.get(s2, Fraction(0)) + pa * p
    return out


def _check_cap(sigma, cap):
    if isinstance(sigma, Stitched):
        if sigma.horizon > cap:
            raise MaterializationCapExceeded(sigma.horizon, cap)
        _check_cap(sigma.second, cap)
    elif isinstance(sigma, Mixture):
        for _, p in sigma.parts:
            _check_cap(p, cap)


def induce(m: Mdp, sigma, start=None, cap: int = DEFAULT_CAP) -> MarkovChain:
    """Reachable part of the product of ``m`` with the strategy's memory."""
    s0 = m.initial if start is None else start
    if s0 is None:
        raise InvalidModel("no start state given and the model has no initial state")
    _check_cap(sigma, cap)
    flags_of = {s: frozenset(i for i, (_, f) in enumerate(m.targets) if s in f) for s in m.states}
    trans, state_of = {}, {}
    if isinstance(sigma, Mixture):
        init = (MIX_ROOT, s0)
        roots = []
        row = {}
        for j, (w, part) in enumerate(sigma.parts):
            node = (s0, (j, part.start(s0)))
            row[node] = row.get(node, Fraction(0)) + w
            roots.append(node)
        trans[init] = row
        state_of[init] = s0

        def step_fn(node):
            s, (j, q) = node
            part = sigma.parts[j][1]
            dist = _mix(part.out(q, s), m, s)
            return {(s2, (j, part.step(q, s2))): p for s2, p in dist.items()}
    else:
        init = (s0, sigma.start(s0))
        roots = [init]

        def step_fn(node):
            s, q = node
            dist = _mix(sigma.out(q, s), m, s)
            return {(s2, sigma.step(q, s2)): p for s2, p in dist.items()}

    stack = list(roots)
    for r in roots:
        state_of[r] = r[0]
    while stack:
        node = stack.pop()
        if node in trans:
            continue
        row = step_fn(node)
        trans[node] = row
        for nxt in row:
            if nxt not in trans:
                state_of[nxt] = nxt[0]
                stack.append(nxt)
    nodes = tuple(trans)
    return MarkovChain(nodes, trans, init, {v: m.priorities[state_of[v]] for v in nodes},
                       {v: flags_of[state_of[v]] for v in nodes}, len(m.targets), state_of)


# ---------------------------------------------------------------------------
# chain analyses


def can_reach(c: MarkovChain, goal) -> FrozenSet:
    """Nodes with a path into ``goal``."""
    rev: Dict = {v: [] for v in c.states}
    for v, row in c.trans.items():
        for w in row:
            rev[w].append(v)
    seen = set(goal)
    stack = list(goal)
    while stack:
        w = stack.pop()
        for v in rev[w]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return frozenset(seen)


def _solve_on_sccs(c: MarkovChain, unknowns, const: Mapping, fixed: Mapping) -> Dict:
    """Solve ``x_v = const_v + sum_w P(v,w) x_w`` for ``v`` in ``unknowns``.

    Nodes outside ``unknowns`` take their value from ``fixed`` (0 if absent).
    The system is split along strongly connected components and solved
    bottom-up, so long transient prefixes cost no elimination work.
    """
    unknowns = set(unknowns)
    g = nx.DiGraph()
    g.add_nodes_from(unknowns)
    for v in unknowns:
        for w in c.trans[v]:
            if w in unknowns:
                g.add_edge(v, w)
    values = dict(fixed)
    cond = nx.condensation(g)
    for comp in reversed(list(nx.topological_sort(cond))):
        members = list(cond.nodes[comp]["members"])
        idx = {v: k for k, v in enumerate(members)}
        n = len(members)
        if n == 1 and members[0] not in c.trans[members[0]]:
            v = members[0]
            values[v] = const.get(v, Fraction(0)) + sum(
                (p * values.get(w, Fraction(0)) for w, p in c.trans[v].items()), Fraction(0))
            continue
        a = [[Fraction(0)] * n for _ in range(n)]
        b = [Fraction(0)] * n
        for v in members:
            i = idx[v]
            a[i][i] += 1
            b[i] = const.get(v, Fraction(0))
            for w, p in c.trans[v].items():
                if w in idx:
                    a[i][idx[w]] -= p
                else:
                    b[i] += p * values.get(w, Fraction(0))
        for v, x in zip(members, solve_linear_system(a, b)):
            values[v] = x
    return values


def reach_to(c: MarkovChain, goal) -> Dict:
    """Exact ``Pr_v(<> goal)`` for every node."""
    goal = frozenset(goal)
    able = can_reach(c, goal)
    fixed = {v: Fraction(1) for v in goal}
    vals = _solve_on_sccs(c, able - goal, {}, fixed)
    return {v: vals.get(v, Fraction(0)) if v in able else Fraction(0) for v in c.states}


def reach_probability(c: MarkovChain, target_index: int) -> Dict:
    return reach_to(c, c.in_target(target_index))


def reach_vector(c: MarkovChain, node=None) -> Tuple[Fraction, ...]:
    node = c.initial if node is None else node
    return tuple(reach_probability(c, i)[node] for i in range(c.num_targets))


def expected_hitting_time(c: MarkovChain, goal) -> Dict:
    """``E_v[X~_goal]`` where the hitting time is replaced by 0 when it is infinite.

    Solves ``x_v = Pr_v(<>goal) + sum_w P(v,w) x_w`` where ``Pr_v > 0`` and
    ``v`` is outside the goal, and ``x_v = 0`` otherwise.  ``goal`` is a node
    set or a target index.
    """
    if isinstance(goal, int):
        goal = c.in_target(goal)
    goal = frozenset(goal)
    pr = reach_to(c, goal)
    active = {v for v in c.states if v not in goal and pr[v] > 0}
    vals = _solve_on_sccs(c, active, {v: pr[v] for v in active}, {})
    return {v: vals.get(v, Fraction(0)) if v in active else Fraction(0) for v in c.states}


def bounded_reach(c: MarkovChain, goal, horizon: int, node=None) -> Fraction:
    """``Pr(<>^{<=horizon} goal)`` by forward transient analysis."""
    if isinstance(goal, int):
        goal = c.in_target(goal)
    goal = frozenset(goal)
    node = c.initial if node is None else node
    if node in goal:
        return Fraction(1)
    dist = {node: Fraction(1)}
    hit = Fraction(0)
    for _ in range(horizon):
        nxt = {}
        for v, p in dist.items():
            for w, q in c.trans[v].items():
                if w in goal:
                    hit += p * q
                else:
                    nxt[w] = nxt.get(w, Fraction(0)) + p * q
        dist = nxt
        if not dist:
            break
    return hit


def reachable(c: MarkovChain, node=None) -> FrozenSet:
    node = c.initial if node is None else node
    seen = {node}
    stack = [node]
    while stack:
        v = stack.pop()
        for w in c.trans[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return frozenset(seen)


def odd_cycle(c: MarkovChain, node=None):
    """A reachable node lying on a cycle whose maximal priority is odd, or None.

    For each odd ``d``, restrict to reachable nodes of priority at most ``d``
    and look for a nontrivial component (or self-loop) holding a
    priority-``d`` node.
    """
    reach = reachable(c, node)
    odd = sorted({c.priorities[v] for v in reach if c.priorities[v] % 2 == 1}, reverse=True)
    for d in odd:
        g = nx.DiGraph()
        keep = [v for v in reach if c.priorities[v] <= d]
        g.add_nodes_from(keep)
        ks = set(keep)
        for v in keep:
            for w in c.trans[v]:
                if w in ks:
                    g.add_edge(v, w)
        for comp in nx.strongly_connected_components(g):
            tops = [v for v in comp if c.priorities[v] == d]
            if not tops:
                continue
            for v in tops:
                if len(comp) > 1 or g.has_edge(v, v):
                    return d, v
    return None


def sure_parity_on_chain(c: MarkovChain, node=None) -> bool:
    """True iff every path from ``node`` (default: initial) satisfies parity."""
    return odd_cycle(c, node) is None


def check_clean_targets(m: Mdp):
    """Target cleanness: F-states are sinks and max Pr(<>F) is 1 everywhere.

    Returns ``(ok, offenders)``.
    """
    from .moreach import max_reach_values

    goal = m.goal
    offenders = [s for s in goal if not m.is_sink(s)]
    values, _ = max_reach_values(m, goal)
    offenders += [s for s in m.states if values[s] != 1]
    offenders = sorted(set(offenders), key=m.states.index)
    return not offenders, offenders


def simulate(c: MarkovChain, episodes: int, horizon: int, seed: int) -> dict:
    """Monte Carlo estimate of bounded reachability of each target.

    This is a sanity cross-check only: frequencies estimate
    ``Pr(<>^{<=horizon} F_i)`` and say nothing about sure properties.
    """
    if episodes < 1 or horizon < 1:
        raise ValueError("episodes and horizon must be at least 1")
    rng = random.Random(seed)
    table = {}
    for v, row in c.trans.items():
        succ = list(row)
        cum, acc = [], 0.0
        for w in succ:
            acc += float(row[w])
            cum.append(acc)
        table[v] = (succ, cum)
    hits = [0] * c.num_targets
    for _ in range(episodes):
        v = c.initial
        seen = set(c.target_flags.get(v, ()))
        for _ in range(horizon):
            succ, cum = table[v]
            if len(succ) == 1 and succ[0] == v:
                break
            r = rng.random() * cum[-1]
            k = 0
            while cum[k] < r:
                k += 1
            v = succ[k]
            seen |= c.target_flags.get(v, frozenset())
        for i in seen:
            hits[i] += 1
    return {
        "frequencies": [h / episodes for h in hits],
        "episodes": episodes,
        "horizon": horizon,
        "seed": seed,
        "note": "estimates bounded reachability only; sure parity cannot be sampled",
    }
