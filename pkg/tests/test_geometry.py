import random
import time
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from sureparity.errors import NotAVertex, PointOutside, PointStrictlyInside
from sureparity.gen import random_mdp
from sureparity.geometry import (dominating_weights, extreme_upper, face_normal, frontier, in_hull, is_vertex,
                                 maximal_points, relative_interior_test, separating_direction, smallest_face,
                                 sweep_frontier, upper_hull)
from sureparity.model import induce, reach_vector, restrict
from sureparity.moreach import max_reach_values
from sureparity.parity import conj_region

T = F(1, 3)
TT = F(2, 3)


@pytest.fixture(scope="module")
def pruned(corpus):
    m = corpus["gameshow_v11"]
    return restrict(m, conj_region(m).region)


def test_gameshow_frontier(gameshow):
    t0 = time.perf_counter()
    poly = frontier(gameshow)
    assert time.perf_counter() - t0 < 1
    assert poly.points == [(T, 1), (TT, TT), (1, T)]
    assert poly.extreme == [(T, 1), (1, T)]
    assert poly.upper_facets == [((0, 1), 1), ((F(1, 2), F(1, 2)), TT), ((1, 0), 1)]
    for x, sigma in poly.witness.items():
        assert reach_vector(induce(gameshow, sigma)) == x
    assert poly.contains((F(1, 2), F(5, 6)))
    assert not poly.contains((1, F(1, 2)))


def test_hull_helpers():
    pts = [(T, 1), (TT, TT), (1, T), (F(1, 2), F(1, 2))]
    assert maximal_points(pts) == [(T, 1), (TT, TT), (1, T)]
    assert extreme_upper(pts) == [(T, 1), (1, T)]
    facets = upper_hull([(T, 1), (1, T)], 2)
    assert ((F(1, 2), F(1, 2)), TT) in facets


def test_faces_on_gameshow(gameshow):
    poly = frontier(gameshow)
    face = smallest_face(poly, (TT, TT))
    assert face.dimension == 1
    assert face_normal(face) == (F(1, 2), F(1, 2))
    assert not is_vertex(poly, (TT, TT))
    with pytest.raises(NotAVertex):
        separating_direction(poly, (TT, TT))
    assert separating_direction(poly, (1, T)) == (TT, T)
    with pytest.raises(PointOutside):
        smallest_face(poly, (1, 1))
    with pytest.raises(PointStrictlyInside):
        smallest_face(poly, (F(1, 2), F(1, 2)))


def test_pruned_polytope(pruned):
    poly = frontier(pruned, "s")
    assert poly.extreme == [(T, 1), (TT, TT)]
    assert separating_direction(poly, (TT, TT)) == (TT, T)
    face = smallest_face(poly, (F(1, 2), F(5, 6)))
    assert face.vertices == [(T, 1), (TT, TT)]
    assert in_hull(poly.points, (F(1, 2), F(5, 6))) == (F(1, 2), F(1, 2))
    assert relative_interior_test(poly.points, (F(1, 2), F(5, 6)))
    assert not relative_interior_test(poly.points, (TT, TT))


def test_hull_membership():
    assert relative_interior_test([(F(1, 2), F(1, 2))], (F(1, 2), F(1, 2)))
    assert in_hull([(0, 1), (1, 0)], (1, 1)) is None
    assert dominating_weights([(0, 1), (1, 0)], (F(1, 4), F(1, 4))) is not None
    assert dominating_weights([(0, 1), (1, 0)], (F(3, 4), F(3, 4))) is None


def _clean(m):
    return all(v == 1 for v in max_reach_values(m, m.goal)[0].values())


@given(st.integers(0, 100_000))
def test_frontier_matches_strategy_sweep(seed):
    m = random_mdp(random.Random(seed), max_states=5, max_actions=2, n_targets=2)
    if not _clean(m):
        return
    poly = frontier(m)
    extreme, maximal = sweep_frontier(m)
    assert poly.extreme == extreme
    assert set(poly.points) <= set(maximal)
    for x in maximal:
        assert poly.contains(x)
    for (w, c), cert in zip(poly.upper_facets, poly.certificates):
        assert cert == c
        assert max(sum(wi * xi for wi, xi in zip(w, x)) for x in extreme) == c


def test_three_targets(corpus):
    m = corpus["three_targets"]
    poly = frontier(m)
    extreme, _ = sweep_frontier(m)
    assert poly.extreme == extreme
    for x in poly.extreme:
        w = separating_direction(poly, x)
        assert all(sum(a * b for a, b in zip(w, x)) > sum(a * b for a, b in zip(w, y))
                   for y in poly.extreme if y != x)
