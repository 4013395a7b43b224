from fractions import Fraction as F
import random

import pytest
from hypothesis import given, strategies as st

from sureparity.errors import (InvalidModel, MaterializationCapExceeded, NoEnabledAction,
                               RowNotStochastic, StrategyActionNotEnabled, TargetNotSink)
from sureparity.gen import random_chain, random_mdp
from sureparity.model import (Fsm, Memoryless, Mixture, Stitched, bounded_reach, check_clean_targets,
                              expected_hitting_time, induce, make_chain, odd_cycle, reach_to,
                              reach_vector, restrict, simulate, sure_parity_on_chain, validate_mdp)


def test_validate_rejects_bad_rows():
    with pytest.raises(RowNotStochastic):
        validate_mdp(["s", "t"], {}, {("s", "a"): {"t": F(1, 3)}, ("t", "a"): {"t": 1}})
    with pytest.raises(NoEnabledAction):
        validate_mdp(["s", "t"], {}, {("s", "a"): {"t": 1}})
    with pytest.raises(TargetNotSink):
        validate_mdp(["s", "t"], {}, {("s", "a"): {"t": 1}, ("t", "a"): {"s": 1}}, [("F", {"t"})])
    with pytest.raises(InvalidModel):
        validate_mdp(["s"], {}, {("s", "a"): {"nowhere": 1}})


def test_sinks_get_the_canonical_self_loop(gameshow):
    assert gameshow.enabled["r1"] == ("*",)
    assert gameshow.is_sink("r12")
    assert not gameshow.is_sink("s1")
    assert gameshow.goal == {"r1", "r2", "r12"}
    assert gameshow.target_set(0) == {"r1", "r12"}


def test_restrict_drops_actions_leaving_the_set(gameshow):
    sub = restrict(gameshow, set(gameshow.states) - {"s1"})
    assert "s1" not in sub.enabled
    assert sub.enabled["s"] == ("pair2",)
    only_b = restrict(gameshow, gameshow.states, {"s": ["pair1"], "s1": ["b"], "r1": ["*"], "r2": ["*"], "r12": ["*"]})
    assert set(only_b.states) == {"s", "s1", "r1", "r2", "r12"}


def test_memoryless_reach_vector(gameshow):
    sigma = Memoryless.deterministic({"s": "pair2", "s2": "b", "s1": "a", "r1": "*", "r2": "*", "r12": "*"})
    c = induce(gameshow, sigma)
    assert reach_vector(c) == (F(2, 3), F(2, 3))
    assert sure_parity_on_chain(c)


def test_odd_loop_is_found(gameshow):
    sigma = Memoryless.deterministic({"s": "pair1", "s1": "a", "s2": "a", "r1": "*", "r2": "*", "r12": "*"})
    c = induce(gameshow, sigma)
    d, node = odd_cycle(c)
    assert d == 1 and c.state_of[node] == "s1"
    assert not sure_parity_on_chain(c)


def test_stitched_hand_strategy(gameshow):
    first = Memoryless.deterministic({"s": "pair1", "s1": "a", "s2": "a", "r1": "*", "r2": "*", "r12": "*"})
    second = Memoryless.deterministic({"s": "pair1", "s1": "b", "s2": "b", "r1": "*", "r2": "*", "r12": "*"})
    c = induce(gameshow, Stitched(first, 3, second))
    assert reach_vector(c) == (F(3, 4), F(1, 2))
    assert sure_parity_on_chain(c)
    with pytest.raises(MaterializationCapExceeded):
        induce(gameshow, Stitched(first, 50, second), cap=10)


def test_mixture_and_fsm(gameshow):
    a = Memoryless.deterministic({"s": "pair2", "s2": "b", "r1": "*", "r2": "*", "r12": "*"})
    b = Memoryless.deterministic({"s": "pair1", "s1": "b", "r1": "*", "r2": "*", "r12": "*"})
    mix = Mixture(((F(1, 2), a), (F(1, 2), b)))
    assert reach_vector(induce(gameshow, mix)) == (F(1, 3), F(5, 6))
    with pytest.raises(InvalidModel):
        Mixture(((F(1, 2), a),))
    # a machine that plays a once at s2 and then b
    upd = {("i", "s"): 0, (0, "s2"): 1, (1, "s2"): 2, (2, "s2"): 2}
    for q in (0, 1, 2, "g"):
        for g in ("r1", "r2", "r12"):
            upd[(q, g)] = "g"
    out = {(0, "s"): {"pair2": F(1)}, (1, "s2"): {"a": F(1)}, (2, "s2"): {"b": F(1)}}
    out.update({("g", g): {"*": F(1)} for g in ("r1", "r2", "r12")})
    fsm = Fsm("i", upd, out)
    assert reach_vector(induce(gameshow, fsm)) == (F(1, 2), F(5, 6))
    assert fsm.memory_size == 4
    with pytest.raises(StrategyActionNotEnabled):
        induce(gameshow, Memoryless.deterministic({"s": "pair1"}))


def test_coin_chain_quantities():
    c = make_chain({"x": {"f": F(1, 2), "x": F(1, 2)}, "f": {"f": 1}}, "x", targets=[{"f"}])
    assert reach_to(c, {"f"})["x"] == 1
    assert expected_hitting_time(c, 0)["x"] == 2
    assert bounded_reach(c, 0, 5) == F(31, 32)


@given(st.integers(0, 10_000))
def test_bounded_reach_increases_to_the_limit(seed):
    c = random_chain(random.Random(seed))
    pr = reach_to(c, {"goal"})[0]
    prev = F(0)
    for k in range(12):
        cur = bounded_reach(c, 0, k)
        assert prev <= cur <= pr
        prev = cur


@given(st.integers(0, 10_000))
def test_hitting_time_satisfies_its_equations(seed):
    c = random_chain(random.Random(seed))
    goal = c.in_target(0)
    e = expected_hitting_time(c, goal)
    pr = reach_to(c, goal)
    for v in c.states:
        if v in goal or pr[v] == 0:
            assert e[v] == 0
        else:
            assert e[v] == pr[v] + sum(p * e[w] for w, p in c.trans[v].items())


@given(st.integers(0, 10_000))
def test_random_models_are_valid(seed):
    m = random_mdp(random.Random(seed))
    assert len(m.states) <= 5
    for s, a in m.pairs():
        assert sum(m.trans[(s, a)].values()) == 1
    for g in m.goal:
        assert m.is_sink(g)


def test_clean_targets_report(corpus):
    assert check_clean_targets(corpus["gameshow"]) == (True, [])
    m = validate_mdp(["s", "t", "f"], {}, {("s", "a"): {"f": F(1, 2), "t": F(1, 2)}, ("t", "a"): {"t": 1}},
                     [("F", {"f"})], initial="s", sinks=["f"])
    ok, bad = check_clean_targets(m)
    assert not ok and set(bad) == {"s", "t"}


def test_simulation_is_seeded(gameshow):
    sigma = Memoryless.deterministic({"s": "pair2", "s2": "b", "r1": "*", "r2": "*", "r12": "*"})
    c = induce(gameshow, sigma)
    one = simulate(c, 500, 20, seed=4)
    assert one == simulate(c, 500, 20, seed=4)
    assert all(abs(f - 2 / 3) < 0.1 for f in one["frequencies"])
