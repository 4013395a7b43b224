import itertools
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from sureparity.errors import NotCleanTargets, ThresholdNotStrictlyExceeded
from sureparity.gen import random_chain, random_mdp
from sureparity.model import Memoryless, bounded_reach, induce, make_chain, reach_to, validate_mdp
from sureparity.moreach import (OccupationLp, achievable, bound_B, extract_memoryless, max_reach_values,
                                optimal_values, strategy_reach)


def pure_strategies(m):
    live = [s for s in m.states if not m.is_sink(s)]
    for combo in itertools.product(*[m.enabled[s] for s in live]):
        choice = {s: m.enabled[s][0] for s in m.states}
        choice.update(zip(live, combo))
        yield Memoryless.deterministic(choice)


def test_achievable_on_gameshow(gameshow):
    assert achievable(gameshow, "s", (F(1, 2), F(1, 6)), strict=True).answer
    res = achievable(gameshow, "s", (F(1, 2), F(1, 6)), strict=True)
    assert res.margin == F(1, 3)
    assert achievable(gameshow, "s", (1, F(1, 3)), strict=False).answer
    assert not achievable(gameshow, "s", (1, F(1, 3)), strict=True).answer
    assert not achievable(gameshow, "s", (1, F(1, 2)), strict=False).answer


def test_achievable_requires_clean_targets():
    m = validate_mdp(["s", "f"], {}, {("s", "a"): {"s": 1}, ("s", "b"): {"f": F(1, 2), "s": F(1, 2)}},
                     [("F", {"f"})], initial="s", sinks=["f"])
    assert achievable(m, "s", (1,), strict=False).answer
    bad = validate_mdp(["s", "t", "f"], {}, {("s", "a"): {"t": F(1, 2), "f": F(1, 2)}, ("t", "a"): {"t": 1}},
                       [("F", {"f"})], initial="s", sinks=["f"])
    with pytest.raises(NotCleanTargets):
        achievable(bad, "s", (F(1, 2),), strict=False)


def test_extracted_strategy_reproduces_the_lp_point(gameshow):
    res = achievable(gameshow, "s", (F(1, 2), F(1, 2)), strict=False)
    sigma = extract_memoryless(res.olp, res.y)
    assert strategy_reach(gameshow, sigma, "s") == res.reach


@given(st.integers(0, 10_000))
def test_max_reach_matches_pure_strategies(seed):
    m = random_mdp(random.Random(seed), max_states=5, max_actions=2)
    val, sigma = max_reach_values(m, m.goal)
    for s in m.states:
        best = max(reach_to(induce(m, t, s), {v for v in induce(m, t, s).states if v[0] in m.goal})[(s, None)]
                   for t in pure_strategies(m))
        assert val[s] == best
        c = induce(m, sigma, s)
        assert reach_to(c, {v for v in c.states if v[0] in m.goal})[c.initial] == best


def test_optimal_values_with_weights(gameshow):
    val = optimal_values(gameshow, {"r1": F(1, 2), "r2": F(1, 2), "r12": 1})
    assert val["s"] == F(2, 3)
    assert val["s1"] == F(2, 3) and val["s2"] == F(2, 3)


@given(st.integers(0, 10_000))
def test_lp_optimum_is_attained_by_extraction(seed):
    m = random_mdp(random.Random(seed), n_targets=2)
    ok = all(v == 1 for v in max_reach_values(m, m.goal)[0].values())
    if not ok:
        return
    olp = OccupationLp(m, m.initial)
    for w in ((1, 0), (0, 1), (F(1, 2), F(1, 2))):
        r, y = olp.optimize([F(x) for x in w])
        assert strategy_reach(m, extract_memoryless(olp, y), m.initial) == r


def test_bound_on_the_coin_chain():
    c = make_chain({"x": {"f": F(1, 2), "x": F(1, 2)}, "f": {"f": 1}}, "x", targets=[{"f"}])
    assert bound_B(c, [0], [F(1, 2)]) == 5
    assert bounded_reach(c, 0, 5) == F(31, 32)
    with pytest.raises(ThresholdNotStrictlyExceeded):
        bound_B(c, [0], [1])


@given(st.integers(0, 10_000), st.fractions(min_value=0, max_value=1, max_denominator=50))
def test_bound_guarantee_on_random_chains(seed, frac):
    c = random_chain(random.Random(seed))
    pr = reach_to(c, {"goal"})[0]
    p = pr * frac * F(99, 100)  # strictly below the reach probability
    b = bound_B(c, [{"goal"}], [p])
    assert bounded_reach(c, {"goal"}, b) > p
