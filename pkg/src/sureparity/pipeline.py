"""End-to-end decision procedures: projection, strict and non-strict thresholds, lexicographic optimum.

Every yes-verdict carries a witness strategy for the original model, and the
witness is re-checked by :func:`verify_strategy`, which only looks at the
induced Markov chain.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import (InvalidModel, MaterializationCapExceeded, NotAVertex, NotCleanParity,
                     NotCleanTargets, NotRelativelyInterior)
from .geometry import (Polytope, dominating_weights, exposing_direction, frontier, is_vertex,
                       relative_interior_test, separating_direction)
from .model import (DEFAULT_CAP, Fsm, Mdp, Memoryless, Mixture, Stitched, bounded_reach,
                    check_clean_targets, expected_hitting_time, induce, memory_size, odd_cycle,
                    reach_to, reach_vector, restrict, sure_parity_on_chain, validate_mdp)
from .moreach import (achievable, action_value, bound_B, extract_memoryless, max_reach_values)
from .parity import conj_region, memory_bound_for, sure_parity_region

Vector = Tuple[Fraction, ...]

# longest stitched prefix whose exact reach vector is still computed step by step
EXACT_HORIZON = 20_000


@dataclass
class Check:
    """Outcome of the independent strategy checker."""

    ok: bool
    mode: str  # "direct" or "certified"
    sure_parity: bool
    reach: Optional[Vector]
    thresholds: Vector
    strict: bool
    checks: List[str] = field(default_factory=list)


@dataclass
class Verdict:
    answer: bool
    witness: object = None
    achieved: Optional[Vector] = None
    trace: List[dict] = field(default_factory=list)
    p_star: Optional[Vector] = None
    verification: Optional[Check] = None
    memory: Optional[int] = None
    flags: List[str] = field(default_factory=list)


def _vec(p) -> Vector:
    return tuple(Fraction(x) for x in p)


def _start(m: Mdp, s0):
    s0 = m.initial if s0 is None else s0
    if s0 is None or s0 not in m.enabled:
        raise InvalidModel(f"unknown start state {s0!r}")
    return s0


def check_clean(m: Mdp) -> None:
    """Raise unless every state surely satisfies parity and can reach the targets with probability 1."""
    ok, bad = check_clean_targets(m)
    if not ok:
        raise NotCleanTargets(bad)
    region, _ = sure_parity_region(m)
    if len(region) != len(m.states):
        raise NotCleanParity([s for s in m.states if s not in region])


# ---------------------------------------------------------------------------
# projection


def _fresh_bottom(m: Mdp):
    name = "⊥"
    while name in m.enabled:
        name += "'"
    return name


def project(m: Mdp, v) -> Mdp:
    """The model projected on direction ``v``.

    A fresh even sink ⊥ takes the share of every target-bound transition
    that ``v`` does not reward, then every action that does not attain the
    optimal value of reaching the targets is removed.
    """
    v = _vec(v)
    if len(v) != len(m.targets) or any(x < 0 for x in v) or sum(v) != 1:
        raise ValueError(f"direction {v} must be non-negative with unit l1 norm")
    bottom = m.bottom if m.bottom is not None else _fresh_bottom(m)
    weight = {}
    for i, (_, f) in enumerate(m.targets):
        for t in f:
            weight[t] = weight.get(t, Fraction(0)) + v[i]
    trans = {}
    for s, a in m.pairs():
        row = m.trans[(s, a)]
        if m.is_sink(s):
            trans[(s, a)] = dict(row)
            continue
        new = {}
        for t, q in row.items():
            if t in weight:
                if weight[t]:
                    new[t] = new.get(t, Fraction(0)) + q * weight[t]
                lost = q * (1 - weight[t])
                if lost:
                    new[bottom] = new.get(bottom, Fraction(0)) + lost
            else:
                new[t] = new.get(t, Fraction(0)) + q
        trans[(s, a)] = new
    states = list(m.states)
    if bottom not in m.enabled:
        states.append(bottom)
        trans[(bottom, "*")] = {bottom: Fraction(1)}
    prios = dict(m.priorities)
    prios.setdefault(bottom, 0)
    step1 = validate_mdp(states, prios, trans, m.targets, m.initial, bottom=bottom)
    targets = frozenset().union(*(f for _, f in m.targets)) if m.targets else frozenset()
    y, _ = max_reach_values(step1, targets)
    keep = {s: [a for a in step1.enabled[s] if action_value(step1, s, a, y) == y[s]]
            for s in step1.states}
    trans = {(s, a): step1.trans[(s, a)] for s in step1.states for a in keep[s]}
    return validate_mdp(step1.states, step1.priorities, trans, m.targets, m.initial, bottom=bottom)


def projected_actions(m: Mdp, v) -> Dict:
    """Actions of ``m`` that survive the projection on ``v``."""
    pm = project(m, v)
    return {s: pm.enabled[s] for s in m.states}


def project_and_prune(m: Mdp, v):
    """Restrict ``m`` (original probabilities) to the projected actions, then to the conjunction region.

    Returns the pruned model, the conjunction result, and a trace entry.
    """
    kept = projected_actions(m, v)
    proj = restrict(m, m.states, kept)
    res = conj_region(proj)
    pruned = restrict(proj, res.region)
    dropped = {s: [a for a in m.enabled[s] if a not in kept[s]] for s in m.states}
    entry = {"step": "project", "direction": _vec(v),
             "dropped_actions": {s: a for s, a in dropped.items() if a},
             "removed_states": [s for s in m.states if s not in pruned.enabled]}
    return pruned, res, entry


# ---------------------------------------------------------------------------
# independent checker


def _first_chain_states(m: Mdp, first: Memoryless, s0, horizon: int) -> set:
    """States that can be occupied exactly ``horizon`` steps in under ``first``."""
    cur = frozenset([s0])
    seen = {cur: 0}
    order = [cur]
    for k in range(1, horizon + 1):
        nxt = set()
        for s in cur:
            for a in first.out(None, s):
                nxt.update(m.trans[(s, a)])
        cur = frozenset(nxt)
        if cur in seen:
            start = seen[cur]
            period = k - start
            return set(order[start + (horizon - start) % period])
        seen[cur] = k
        order.append(cur)
    return set(cur)


def _step(m: Mdp, first: Memoryless, dist: Dict) -> Dict:
    out: Dict = {}
    for s, p in dist.items():
        for a, pa in first.out(None, s).items():
            for t, q in m.trans[(s, a)].items():
                out[t] = out.get(t, Fraction(0)) + p * pa * q
    return out


def exact_reach(m: Mdp, sigma, s0, cap: int = DEFAULT_CAP) -> Optional[Vector]:
    """Exact reach vector; stitched prefixes are unrolled step by step instead of materialized."""
    if isinstance(sigma, Mixture):
        parts = [exact_reach(m, part, s0, cap) for _, part in sigma.parts]
        if any(r is None for r in parts):
            return None
        n = len(m.targets)
        return tuple(sum((w * r[i] for (w, _), r in zip(sigma.parts, parts)), Fraction(0))
                     for i in range(n))
    if isinstance(sigma, Stitched) and isinstance(sigma.first, Memoryless):
        if sigma.horizon > EXACT_HORIZON:
            return None
        dist = {s0: Fraction(1)}
        for _ in range(sigma.horizon):
            dist = _step(m, sigma.first, dist)
        total = [Fraction(0)] * len(m.targets)
        cache: Dict = {}
        for s, p in dist.items():
            if s not in cache:
                cache[s] = exact_reach(m, sigma.second, s, cap)
                if cache[s] is None:
                    return None
            for i, r in enumerate(cache[s]):
                total[i] += p * r
        return tuple(total)
    return tuple(reach_vector(induce(m, sigma, s0, cap)))


def sure_parity_of(m: Mdp, sigma, s0, cap: int = DEFAULT_CAP) -> bool:
    """Does every play consistent with ``sigma`` from ``s0`` satisfy parity?

    Parity is prefix independent, so a stitched strategy is winning iff its
    second part wins from every state the first part can occupy at the switch.
    """
    if isinstance(sigma, Mixture):
        return all(sure_parity_of(m, part, s0, cap) for _, part in sigma.parts)
    if isinstance(sigma, Stitched) and isinstance(sigma.first, Memoryless):
        return all(sure_parity_of(m, sigma.second, s, cap)
                   for s in _first_chain_states(m, sigma.first, s0, sigma.horizon))
    return sure_parity_on_chain(induce(m, sigma, s0, cap))


def _meets(r: Vector, p: Vector, strict: bool) -> bool:
    return all((a > b) if strict else (a >= b) for a, b in zip(r, p))


def _odd_cycle_note(c) -> Optional[str]:
    hit = odd_cycle(c)
    if hit is None:
        return None
    d, node = hit
    return f"odd cycle with top priority {d} through state {c.state_of[node]!r}"


def verify_strategy(m: Mdp, sigma, p, strict: bool = False, s0=None, cap: int = DEFAULT_CAP) -> Check:
    """Check a strategy against sure parity and the thresholds ``p`` on its induced chain.

    Direct mode materializes the whole induced chain.  When that exceeds
    ``cap`` the check falls back to a compositional certificate for stitched
    strategies: sure parity of the tail from every switch state, and either
    the exact unrolled reach vector or the step bound of the prefix chain.
    """
    s0 = _start(m, s0)
    p = _vec(p)
    if len(p) != len(m.targets):
        raise ValueError("threshold vector and target count differ")
    try:
        c = induce(m, sigma, s0, cap)
    except MaterializationCapExceeded:
        c = None
    if c is not None:
        note = _odd_cycle_note(c)
        reach = tuple(reach_vector(c))
        ok = note is None and _meets(reach, p, strict)
        checks = ["induced chain with %d nodes" % len(c.states),
                  note or "sure parity: no reachable odd cycle", "exact reach vector"]
        return Check(ok, "direct", note is None, reach, p, strict, checks)
    parity = sure_parity_of(m, sigma, s0, cap)
    checks = ["sure parity of the tail from every switch state: %s" % ("holds" if parity else "fails")]
    certified = False
    if isinstance(sigma, Stitched) and isinstance(sigma.first, Memoryless):
        pre = induce(m, sigma.first, s0, cap)
        certified = strict
        for i, pi in enumerate(p):
            goal = pre.in_target(i)
            pr = reach_to(pre, goal)[pre.initial]
            e = expected_hitting_time(pre, goal)[pre.initial]
            if pr > pi:
                need = (e / (pr - pi)).__floor__() + 1
                checks.append(f"target {i}: Pr = {pr} > {pi}, E[hit] = {e}, "
                              f"floor(E / margin) + 1 = {need} <= horizon {sigma.horizon}: {need <= sigma.horizon}")
                certified = certified and need <= sigma.horizon
            else:
                checks.append(f"target {i}: prefix reach {pr} does not exceed {pi}")
                certified = False
    reach = exact_reach(m, sigma, s0, cap)
    if reach is not None:
        checks.append("exact reach vector by unrolling")
        ok = parity and _meets(reach, p, strict)
    else:
        checks.append("reach vector not unrolled; relying on the step bound")
        ok = parity and certified
    return Check(ok, "certified", parity, reach, p, strict, checks)


# ---------------------------------------------------------------------------
# strict thresholds


def decide_strict(m: Mdp, p, s0=None, cap: int = DEFAULT_CAP, check: bool = True) -> Verdict:
    """Sure parity together with ``Pr(<>F_i) > p_i`` for every i."""
    s0 = _start(m, s0)
    p = _vec(p)
    if check:
        check_clean(m)
    res = achievable(m, s0, p, strict=True, check=False)
    trace = [{"step": "strict_lp", "margin": res.margin}]
    if not res.answer:
        return Verdict(False, trace=trace)
    shrunk = tuple(x + res.margin / 2 for x in p)
    inner = achievable(m, s0, shrunk, strict=False, check=False)
    sigma_pr = extract_memoryless(inner.olp, inner.y)
    chain = induce(m, sigma_pr, s0)
    horizon = bound_B(chain, range(len(p)), p)
    _, sigma_phi = sure_parity_region(m)
    witness = Stitched(sigma_pr, horizon, sigma_phi)
    trace.append({"step": "stitch", "thresholds": shrunk, "prefix_reach": tuple(reach_vector(chain)),
                  "horizon": horizon})
    if horizon <= cap:
        bounded = tuple(bounded_reach(chain, i, horizon) for i in range(len(p)))
        trace.append({"step": "bounded_reach", "horizon": horizon, "values": bounded})
    ver = verify_strategy(m, witness, p, strict=True, s0=s0, cap=cap)
    return Verdict(True, witness, ver.reach, trace, verification=ver, memory=memory_size(witness))


# ---------------------------------------------------------------------------
# projection stages
#
# A stage is the current model together with the coordinates fixed by earlier
# projections.  Maximizing w only forces a strategy to leave, almost surely,
# the states where w still has positive value; states that cannot reach any
# target rewarded by w (the zone) are free.  Across several projections the
# zone is the intersection of these value-zero sets.  Every state of a stage
# is won by the finisher: sure parity while almost surely reaching a pinned
# target or the zone, then sure parity inside the zone.


ZONE_MODE = -1


@dataclass
class Stage:
    model: Mdp
    pinned: frozenset
    zone: frozenset
    finisher: Fsm


def _can_reach(m: Mdp, goal) -> set:
    back: Dict = {s: set() for s in m.states}
    for s, a in m.pairs():
        for t in m.trans[(s, a)]:
            back[t].add(s)
    seen = set(g for g in goal if g in back)
    todo = list(seen)
    while todo:
        t = todo.pop()
        for s in back[t] - seen:
            seen.add(s)
            todo.append(s)
    return seen


def _pinned_targets(m: Mdp, pinned) -> frozenset:
    return frozenset().union(*(f for i, (_, f) in enumerate(m.targets) if i in pinned))


def _finisher(m: Mdp, pinned, zone):
    """Region won by the finisher in ``m`` and the finisher itself."""
    zone = frozenset(zone) & frozenset(m.states)
    zm = restrict(m, zone)
    zgood, sigma_z = sure_parity_region(zm) if zm.states else (frozenset(), None)
    goal = _pinned_targets(m, pinned)
    outside = [s for s in m.states if s not in zone]
    prios = {s: m.priorities[s] for s in outside}
    prios.update({z: 0 for z in zgood})
    trans = {(s, a): m.trans[(s, a)] for s in outside for a in m.enabled[s]}
    trans.update({(z, "*"): {z: Fraction(1)} for z in zgood})
    keep = set(outside) | set(zgood)
    aux = restrict(validate_mdp(list(keep), prios,
                                {k: d for k, d in trans.items() if all(t in keep for t in d)},
                                tuple((n, f & keep) for n, f in m.targets), sinks=list(zgood)),
                   keep)
    region, fsm = frozenset(zgood), None
    if any(s not in zgood for s in aux.states):
        res = conj_region(aux, goal=(goal & set(aux.states)) | set(zgood))
        region, fsm = res.region, res.strategy
    update, output = {}, {}
    if fsm is not None:
        for (q, t), q2 in fsm.update.items():
            update[(q, t)] = ZONE_MODE if t in zgood else q2
        output = {(q, t): d for (q, t), d in fsm.output.items() if t not in zgood}
    for z in zgood:
        update[(0, z)] = ZONE_MODE
        update[(ZONE_MODE, z)] = ZONE_MODE
        output[(ZONE_MODE, z)] = sigma_z.choice[z]
    return region, Fsm(0, update, output)


def initial_stage(m: Mdp) -> Stage:
    """No coordinate pinned yet: the finisher only has to keep sure parity."""
    region, fin = _finisher(m, frozenset(), m.states)
    return Stage(restrict(m, region), frozenset(), frozenset(region), fin)


def advance(stage: Stage, w):
    """Project the stage on ``w`` and prune to the finisher region.

    Returns the next stage and a trace entry.
    """
    m = stage.model
    w = _vec(w)
    kept = projected_actions(m, w)
    rewarded = _pinned_targets(m, {i for i, x in enumerate(w) if x > 0})
    zone = stage.zone & (frozenset(m.states) - _can_reach(m, rewarded))
    pinned = stage.pinned | {i for i, x in enumerate(w) if x > 0}
    proj = restrict(m, m.states, kept)
    region, fin = _finisher(proj, pinned, zone)
    nxt = restrict(proj, region)
    dropped = {s: [a for a in m.enabled[s] if a not in kept[s]] for s in m.states}
    entry = {"step": "project", "direction": w,
             "dropped_actions": {s: a for s, a in dropped.items() if a},
             "removed_states": [s for s in m.states if s not in nxt.enabled]}
    return Stage(nxt, frozenset(pinned), frozenset(zone & set(nxt.states)), fin), entry


# ---------------------------------------------------------------------------
# lexicographic optimum


def lex_optimize(m: Mdp, order: Sequence[int], s0=None, check: bool = True) -> Verdict:
    """Lexicographically optimal reachability under sure parity, for the given target order."""
    s0 = _start(m, s0)
    order = list(order)
    n = len(m.targets)
    if not order or len(set(order)) != len(order) or any(not 0 <= i < n for i in order):
        raise ValueError(f"order {order} must list distinct target indices")
    if check:
        check_clean(m)
    stage, trace = initial_stage(m), []
    for i in order:
        e = tuple(Fraction(int(j == i)) for j in range(n))
        stage, entry = advance(stage, e)
        entry["objective"] = m.targets[i][0]
        trace.append(entry)
        if s0 not in stage.model.enabled:
            trace.append({"step": "removed", "state": s0})
            return Verdict(False, trace=trace)
    witness = stage.finisher
    reach = tuple(reach_vector(induce(m, witness, s0)))
    p_star = tuple(reach[i] for i in order)
    ver = verify_strategy(m, witness, reach, strict=False, s0=s0)
    mem = memory_size(witness)
    flags = []
    if mem > memory_bound_for(m):
        flags.append(f"memory {mem} exceeds 2|S||priorities| = {memory_bound_for(m)}")
    return Verdict(ver.ok, witness, reach, trace, p_star, ver, mem, flags)


# ---------------------------------------------------------------------------
# non-strict thresholds


def _vertex_step(stage: Stage, p: Vector, s0, poly: Polytope, m: Mdp, cap: int) -> Verdict:
    w = separating_direction(poly, p)
    nxt, entry = advance(stage, w)
    entry["case"] = "vertex"
    trace = [entry]
    if s0 not in nxt.model.enabled:
        trace.append({"step": "removed", "state": s0})
        return Verdict(False, trace=trace)
    witness = nxt.finisher
    ver = verify_strategy(m, witness, p, strict=False, s0=s0, cap=cap)
    return Verdict(ver.ok, witness, ver.reach, trace, verification=ver, memory=memory_size(witness))


def vertex_case(m: Mdp, p, s0=None, poly: Optional[Polytope] = None, cap: int = DEFAULT_CAP) -> Verdict:
    """Decide a vertex of the frontier by projecting on a direction that singles it out."""
    s0 = _start(m, s0)
    p = _vec(p)
    poly = frontier(m, s0, check=False) if poly is None else poly
    if not is_vertex(poly, p):
        raise NotAVertex(p)
    return _vertex_step(initial_stage(m), p, s0, poly, m, cap)


def _stitch_towards(m: Mdp, x: Vector, s0, cap: int, poly: Polytope, finisher):
    """Mixture of stitched strategies whose exact reach dominates ``x``, or None past the cap.

    Each maximal point y is played by its memoryless strategy for k steps
    before switching to ``finisher``; k starts at |S| and
    doubles until some convex combination of the stitched vectors
    dominates ``x``.
    """
    base = list(poly.points)
    k = max(1, len(m.states))
    while k <= cap:
        parts = [Stitched(poly.witness[y], k, finisher) for y in base]
        zs = [exact_reach(m, st, s0, cap) for st in parts]
        if all(z is not None for z in zs):
            lam = dominating_weights(zs, x)
            if lam is not None:
                mix = Mixture(tuple((w, st) for w, st in zip(lam, parts) if w > 0))
                return mix, {"step": "interior", "k": k, "weights": lam, "stitched": zs}
        k *= 2
    return None


def _pruned_conj(m: Mdp):
    conj = conj_region(m)
    if len(conj.region) != len(m.states):
        raise ValueError("interior_case needs a model pruned to its conjunction region")
    return conj


def interior_case(m: Mdp, x, s0=None, cap: int = DEFAULT_CAP, poly: Optional[Polytope] = None):
    """Mixture of stitched strategies achieving at least ``x``.

    ``m`` must already be pruned so that every state wins sure parity with
    almost-sure reachability, and ``x`` must be a strictly positive convex
    combination of the maximal points of its frontier.
    """
    s0 = _start(m, s0)
    x = _vec(x)
    poly = frontier(m, s0, check=False) if poly is None else poly
    if not relative_interior_test(poly.points, x):
        raise NotRelativelyInterior(x)
    out = _stitch_towards(m, x, s0, cap, poly, _pruned_conj(m).strategy)
    if out is None:
        raise MaterializationCapExceeded(cap, cap)
    return out


def decide_nonstrict(m: Mdp, p, s0=None, cap: int = DEFAULT_CAP, check: bool = True) -> Verdict:
    """Sure parity together with ``Pr(<>F_i) >= p_i`` for every i.

    Repeatedly project on a non-negative direction exposing a face that
    contains ``p`` and prune to the conjunction region.  Coordinates touched
    by some projection are pinned: every strategy that reaches the targets
    almost surely in the pruned model meets those equations exactly.  The
    loop stops at a vertex, or once a strictly positive combination of the
    frontier points dominates ``p`` with slack on the unpinned coordinates.
    Each round either removes an action or pins a new coordinate.
    """
    s0 = _start(m, s0)
    p = _vec(p)
    n = len(p)
    if check:
        check_clean(m)
    if not achievable(m, s0, p, strict=False, check=False).answer:
        return Verdict(False, trace=[{"step": "nonstrict_lp", "feasible": False}])
    if achievable(m, s0, p, strict=True, check=False).answer:
        v = decide_strict(m, p, s0, cap, check=False)
        v.trace.insert(0, {"step": "strictly_inside"})
        return v
    trace: List[dict] = []
    stage = initial_stage(m)
    budget = n + m.num_pairs() + 1
    for _ in range(budget):
        cur = stage.model
        poly = frontier(cur, s0, check=False)
        trace.append({"step": "frontier", "states": len(cur.states), "extreme": poly.extreme,
                      "points": poly.points})
        if is_vertex(poly, p):
            out = _vertex_step(stage, p, s0, poly, m, cap)
            out.trace = trace + out.trace
            return out
        if dominating_weights(poly.points, p) is None:
            trace.append({"step": "outside"})
            return Verdict(False, trace=trace)
        free = [i for i in range(n) if i not in stage.pinned]
        w = exposing_direction(poly.points, p, free)
        if w is None:
            out = _stitch_towards(cur, p, s0, cap, poly, stage.finisher)
            if out is None:
                raise MaterializationCapExceeded(cap, cap)
            mix, entry = out
            trace.append(entry)
            ver = verify_strategy(m, mix, p, False, s0, cap)
            return Verdict(ver.ok, mix, ver.reach, trace, verification=ver, memory=memory_size(mix))
        stage, entry = advance(stage, w)
        trace.append(entry)
        if s0 not in stage.model.enabled:
            trace.append({"step": "removed", "state": s0})
            return Verdict(False, trace=trace)
    raise AssertionError("projection loop made no progress")
