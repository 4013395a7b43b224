"""Exact geometry of achievable reachability vectors.

Only the upper (<=-maximal) boundary is represented: a polytope here is
conv(V) minus the non-negative orthant, described by its extreme points and
by the facets whose normals are non-negative.
"""

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .arith import EQ, GE, LE, LinearProgram, Optimal, affine_rank, dot, lp_solve, null_space
from .errors import NotAVertex, NotCleanTargets, PointOutside, PointStrictlyInside
from .model import Mdp, Memoryless, check_clean_targets, induce, reach_vector
from .moreach import OccupationLp, extract_memoryless, optimal_actions, optimal_values

Point = Tuple[Fraction, ...]

PURE_SWEEP_CAP = 4096


@dataclass
class Polytope:
    n: int
    extreme: List[Point]  # <=-maximal extreme points
    upper_facets: List[Tuple[Point, Fraction]]  # (w >= 0 with |w|_1 = 1, c): w.x <= c
    certificates: List[Fraction] = field(default_factory=list)  # LP optimum per facet
    points: List[Point] = field(default_factory=list)  # <=-maximal points of pure memoryless strategies
    witness: Dict[Point, object] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    @property
    def vertices(self) -> List[Point]:
        return self.extreme

    def contains(self, x) -> bool:
        x = tuple(Fraction(v) for v in x)
        return all(dot(w, x) <= c for w, c in self.upper_facets)


@dataclass
class Face:
    parent: Polytope
    tight: List[int]
    vertices: List[Point]
    dimension: int


def _pt(x) -> Point:
    return tuple(Fraction(v) for v in x)


def _normalize(w) -> Point:
    tot = sum(w, Fraction(0))
    return tuple(v / tot for v in w)


def upper_hull(points: Sequence[Point], n: int) -> List[Tuple[Point, Fraction]]:
    """Facets of conv(points) - R^n_+ as (normal, offset), normals >= 0 with unit l1 norm.

    Each facet is spanned by n generators: at least one point, the rest
    taken from the recession directions -e_j.
    """
    pts = sorted(set(points))
    found = {}
    for kp in range(1, min(n, len(pts)) + 1):
        for chosen in itertools.combinations(pts, kp):
            for dirs in itertools.combinations(range(n), n - kp):
                rows = [[a - b for a, b in zip(p, chosen[0])] for p in chosen[1:]]
                rows += [[Fraction(int(j == d)) for j in range(n)] for d in dirs]
                basis = null_space(rows, n)
                if len(basis) != 1:
                    continue
                w = basis[0]
                if all(v <= 0 for v in w):
                    w = [-v for v in w]
                if any(v < 0 for v in w) or all(v == 0 for v in w):
                    continue
                w = _normalize(w)
                c = dot(w, chosen[0])
                if all(dot(w, p) <= c for p in pts):
                    found[(w, c)] = None
    return sorted(found)


def _dominated_by_hull(x: Point, others: Sequence[Point]) -> bool:
    """Is x in conv(others) - R^n_+?"""
    if not others:
        return False
    k = len(others)
    lp = LinearProgram([f"l{j}" for j in range(k)], objective=[Fraction(0)] * k)
    lp.add([Fraction(1)] * k, EQ, 1)
    for i in range(len(x)):
        lp.add([o[i] for o in others], GE, x[i])
    return isinstance(lp_solve(lp), Optimal)


def maximal_points(points) -> List[Point]:
    """Points not weakly dominated by another point (duplicates removed)."""
    pts = sorted(set(points))
    out = []
    for p in pts:
        if not any(q != p and all(a >= b for a, b in zip(q, p)) for q in pts):
            out.append(p)
    return out


def extreme_upper(points) -> List[Point]:
    """<=-maximal extreme points of conv(points) - R^n_+."""
    pts = maximal_points(points)
    return [p for p in pts if not _dominated_by_hull(p, [q for q in pts if q != p])]


def frontier(m: Mdp, s0=None, check: bool = True, pure_points: bool = True) -> Polytope:
    """Exact upper boundary of the achievable reachability vectors from ``s0``.

    Outer approximation: start from the axis maximizers, then repeatedly
    maximize each uncertified facet normal over the occupation LP.  A facet
    is certified when the optimum equals its offset; otherwise the optimum
    becomes a new vertex and the hull is recomputed.
    """
    s0 = m.initial if s0 is None else s0
    if check:
        ok, bad = check_clean_targets(m)
        if not ok:
            raise NotCleanTargets(bad)
    n = len(m.targets)
    olp = OccupationLp(m, s0)
    witness = {}
    if olp.fixed is not None:
        x = _pt(olp.fixed)
        facets = upper_hull([x], n)
        strat = Memoryless.deterministic({s: m.enabled[s][0] for s in m.states})
        return Polytope(n, [x], facets, [dot(w, x) for w, _ in facets], [x], {x: strat})

    def add(w, order=None):
        r, y = olp.optimize(w, order)
        r = _pt(r)
        if r not in witness:
            witness[r] = extract_memoryless(olp, y)
        return r

    verts = []
    for i in range(n):
        w = [Fraction(int(j == i)) for j in range(n)]
        order = [i] + [j for j in range(n) if j != i]
        r = add(w, order)
        if r not in verts:
            verts.append(r)
    certified = {}
    while True:
        facets = upper_hull(verts, n)
        pending = [f for f in facets if f not in certified]
        if not pending:
            break
        grew = False
        for w, c in pending:
            r = add(w)
            val = dot(w, r)
            if val == c:
                certified[(w, c)] = val
            elif val > c:
                if r not in verts:
                    verts.append(r)
                grew = True
                break
            else:
                raise AssertionError("LP optimum below a facet of the inner hull")
        if not grew and all(f in certified for f in facets):
            break
    facets = upper_hull(verts, n)
    extreme = extreme_upper(verts)
    poly = Polytope(n, extreme, facets, [certified[f] for f in facets], list(extreme),
                    {x: witness[x] for x in extreme})
    if pure_points:
        _add_pure_points(poly, m, s0)
    return poly


def _add_pure_points(poly: Polytope, m: Mdp, s0) -> None:
    """Collect frontier points realised by deterministic memoryless strategies.

    For each facet, strategies are enumerated over the actions that are
    optimal for the facet's weighted objective; those whose vector lies on
    the facet are kept.  Collinear frontier points show up here even when
    they are not extreme.
    """
    found = dict(poly.witness)
    for w, c in poly.upper_facets:
        terminal = {}
        for s in m.states:
            if m.is_sink(s):
                terminal[s] = sum((wi for wi, (_, f) in zip(w, m.targets) if s in f), Fraction(0))
        val = optimal_values(m, terminal)
        opt = optimal_actions(m, val)
        free = [s for s in m.states if not m.is_sink(s) and len(opt[s]) > 1]
        count = 1
        for s in free:
            count *= len(opt[s])
        if count > PURE_SWEEP_CAP:
            poly.notes.append(f"pure-point sweep skipped on facet {w}: {count} strategies")
            continue
        base = {s: opt[s][0] for s in m.states}
        for combo in itertools.product(*[opt[s] for s in free]):
            choice = dict(base)
            choice.update(zip(free, combo))
            sigma = Memoryless.deterministic(choice)
            r = _pt(reach_vector(induce(m, sigma, s0)))
            if dot(w, r) == c and r not in found:
                found[r] = sigma
    pts = maximal_points(found)
    poly.points = pts
    poly.witness = {x: found[x] for x in pts}


def sweep_frontier(m: Mdp, s0=None, max_pairs: int = 8):
    """Test oracle: <=-maximal extreme points over every deterministic memoryless strategy."""
    s0 = m.initial if s0 is None else s0
    if m.num_pairs() > max_pairs + sum(1 for s in m.states if m.is_sink(s)):
        raise ValueError("model too large for the exhaustive sweep")
    states = [s for s in m.states if not m.is_sink(s)]
    vals = set()
    for combo in itertools.product(*[m.enabled[s] for s in states]):
        choice = {s: m.enabled[s][0] for s in m.states}
        choice.update(zip(states, combo))
        vals.add(_pt(reach_vector(induce(m, Memoryless.deterministic(choice), s0))))
    return extreme_upper(vals), maximal_points(vals)


def smallest_face(p: Polytope, x) -> Face:
    x = _pt(x)
    bad = [k for k, (w, c) in enumerate(p.upper_facets) if dot(w, x) > c]
    if bad:
        raise PointOutside(x)
    tight = [k for k, (w, c) in enumerate(p.upper_facets) if dot(w, x) == c]
    if not tight:
        raise PointStrictlyInside(x)
    verts = [v for v in p.extreme if all(dot(p.upper_facets[k][0], v) == p.upper_facets[k][1] for k in tight)]
    return Face(p, tight, verts, affine_rank(verts) if verts else -1)


def face_normal(f: Face) -> Point:
    """Sum of the tight normals, each scaled to largest component 1, normalized to unit l1 norm."""
    n = f.parent.n
    acc = [Fraction(0)] * n
    for k in f.tight:
        w = f.parent.upper_facets[k][0]
        top = max(w)
        for i in range(n):
            acc[i] += w[i] / top
    return _normalize(acc)


def is_vertex(p: Polytope, x) -> bool:
    return _pt(x) in p.extreme


def separating_direction(p: Polytope, x) -> Point:
    """w >= 0 with unit l1 norm such that x is the unique maximizer of w over the extreme points."""
    x = _pt(x)
    if not is_vertex(p, x):
        raise NotAVertex(x)
    face = smallest_face(p, x)
    others = [y for y in p.extreme if y != x]

    def separates(w):
        return all(dot(w, x) > dot(w, y) for y in others)

    w = face_normal(face)
    if separates(w):
        return w
    normals = [p.upper_facets[k][0] for k in face.tight]
    for extra in range(1, 8):
        for k in range(len(normals)):
            acc = [sum((nm[i] / max(nm) for nm in normals), Fraction(0)) for i in range(p.n)]
            for i in range(p.n):
                acc[i] += Fraction(extra) * normals[k][i] / max(normals[k])
            cand = _normalize(acc)
            if separates(cand):
                return cand
    raise NotAVertex(x)


def in_hull(points: Sequence, x) -> Optional[Tuple[Fraction, ...]]:
    """Weights lambda >= 0 summing to 1 with sum lambda_j z_j = x, or None."""
    pts = [_pt(z) for z in points]
    x = _pt(x)
    k = len(pts)
    lp = LinearProgram([f"l{j}" for j in range(k)], objective=[Fraction(0)] * k)
    lp.add([Fraction(1)] * k, EQ, 1)
    for i in range(len(x)):
        lp.add([z[i] for z in pts], EQ, x[i])
    out = lp_solve(lp)
    return tuple(out.point) if isinstance(out, Optimal) else None


def dominating_weights(points: Sequence, x) -> Optional[Tuple[Fraction, ...]]:
    """Weights lambda >= 0 summing to 1 with sum lambda_j z_j >= x componentwise, or None."""
    pts = [_pt(z) for z in points]
    x = _pt(x)
    k = len(pts)
    lp = LinearProgram([f"l{j}" for j in range(k)], objective=[Fraction(0)] * k)
    lp.add([Fraction(1)] * k, EQ, 1)
    for i in range(len(x)):
        lp.add([z[i] for z in pts], GE, x[i])
    out = lp_solve(lp)
    return tuple(out.point) if isinstance(out, Optimal) else None


def relative_interior_test(points: Sequence, x) -> bool:
    """Is x a strictly positive convex combination of the points (relative interior of their hull)?"""
    pts = [_pt(z) for z in points]
    x = _pt(x)
    k = len(pts)
    lp = LinearProgram([f"l{j}" for j in range(k)] + ["t"],
                       objective=[Fraction(0)] * k + [Fraction(1)],
                       nonneg=[True] * k + [False])
    lp.add([Fraction(1)] * k + [Fraction(0)], EQ, 1)
    for i in range(len(x)):
        lp.add([z[i] for z in pts] + [Fraction(0)], EQ, x[i])
    for j in range(k):
        row = [Fraction(0)] * (k + 1)
        row[j], row[k] = Fraction(1), Fraction(-1)
        lp.add(row, GE, 0)
    lp.add([Fraction(0)] * k + [Fraction(1)], LE, 1)
    out = lp_solve(lp)
    return isinstance(out, Optimal) and out.value > 0


def exposing_direction(points: Sequence, x, free: Sequence[int]) -> Optional[Point]:
    """A direction w >= 0 that blocks synthesis of ``x`` from ``points``, or None.

    ``x`` is assumed dominated by conv(points).  Coordinates in ``free`` can
    still drift downwards when a point is approximated, so they need slack;
    the others are pinned by earlier projections.  Synthesis works when some
    strictly positive combination of the points dominates ``x`` with slack
    on every free coordinate.  Otherwise LP duality gives w >= 0 with
    w.z <= w.x for every point, where either w puts weight on a free
    coordinate or some point falls strictly below.  Such a w exposes a face
    of the achievable set that contains ``x``.  The returned w has unit l1 norm.
    """
    pts = [_pt(z) for z in points]
    x = _pt(x)
    n, k = len(x), len(pts)
    free = set(free)
    # variables: w_0..w_{n-1}, mu_0..mu_{k-1}
    lp = LinearProgram([f"w{i}" for i in range(n)] + [f"mu{j}" for j in range(k)],
                       objective=[Fraction(int(i in free)) for i in range(n)] + [Fraction(0)] * k)
    lp.add([Fraction(int(i in free)) for i in range(n)] + [Fraction(1)] * k, EQ, 1)
    for j, z in enumerate(pts):
        row = [z[i] - x[i] for i in range(n)] + [Fraction(int(j == jj)) for jj in range(k)]
        lp.add(row, LE, 0)
    out = lp_solve(lp)
    if not isinstance(out, Optimal):
        return None
    w = out.point[:n]
    return _normalize(w)
