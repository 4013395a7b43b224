import itertools
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from sureparity.errors import BudgetExceeded
from sureparity.gen import random_mdp
from sureparity.model import Memoryless, induce, restrict, sure_parity_on_chain, validate_mdp
from sureparity.parity import (EVEN, ODD, brute_force_conj, build_game, clean_wrt_parity, conj_oracle_witness,
                               conj_region, memory_bound_for, sure_parity_region, verify_conj_witness,
                               zielonka)


def positional_sure_parity(m):
    """States won by some pure memoryless strategy (enough for sure parity)."""
    won = set()
    live = [s for s in m.states]
    for combo in itertools.product(*[m.enabled[s] for s in live]):
        sigma = Memoryless.deterministic(dict(zip(live, combo)))
        for s in m.states:
            if s not in won and sure_parity_on_chain(induce(m, sigma, s)):
                won.add(s)
    return frozenset(won)


def s3_t2(loop_only=False):
    trans = {("s", "go"): {"t": 1}, ("t", "c"): {"t": 1}}
    if not loop_only:
        trans[("t", "b")] = {"f": F(1, 2), "s": F(1, 2)}
    return validate_mdp(["s", "t", "f"], {"s": 3, "t": 2, "f": 0}, trans, [("F", {"f"})], "t", sinks=["f"])


def test_game_shape(gameshow):
    g = build_game(gameshow)
    ctrl = [v for v in g.vertices if g.owner[v] == EVEN]
    adv = [v for v in g.vertices if g.owner[v] == ODD]
    assert len(ctrl) == 6 and len(adv) == 9
    assert g.priority[("a", "s1", "a")] == gameshow.priorities["s1"]


def test_zielonka_small_games(gameshow):
    single = validate_mdp(["x"], {"x": 1}, {("x", "a"): {"x": 1}})
    reg = zielonka(build_game(single))
    assert ("c", "x") in reg.odd
    reg = zielonka(build_game(s3_t2()))
    assert ("c", "s") in reg.even and ("c", "t") in reg.even
    assert reg.strategy_even[("c", "t")] == ("a", "t", "c")
    region, _ = sure_parity_region(gameshow)
    assert region == set(gameshow.states)


def test_projected_gameshow_loses_the_upper_state(corpus):
    m = corpus["gameshow_v11"]
    region, sigma = sure_parity_region(m)
    assert region == set(m.states) - {"s1"}
    cleaned = clean_wrt_parity(m)
    assert "s1" not in cleaned.enabled and cleaned.enabled["s"] == ("pair2",)


@given(st.integers(0, 10_000))
def test_sure_parity_matches_positional_enumeration(seed):
    m = random_mdp(random.Random(seed), max_states=5, max_actions=2)
    region, sigma = sure_parity_region(m)
    assert region == positional_sure_parity(m)
    for s in region:
        assert sure_parity_on_chain(induce(m, sigma, s))
    reg = zielonka(build_game(m))
    assert reg.even | reg.odd == set(build_game(m).vertices)
    assert not reg.even & reg.odd


def test_conj_on_the_trap():
    m = s3_t2()
    res = conj_region(m)
    assert res.region == {"f"}
    assert brute_force_conj(m, 4) == {"f"}
    assert sure_parity_region(m)[0] == {"s", "t", "f"}


def test_naive_alternation_is_not_enough():
    m = validate_mdp(["q1", "q2", "g"], {"q1": 0, "q2": 1, "g": 0},
                     {("q1", "a1"): {"q1": 1}, ("q1", "a0"): {"q2": 1},
                      ("q2", "b"): {"q1": F(1, 2), "g": F(1, 2)}},
                     [("F", {"g"})], "q1", sinks=["g"])
    assert sure_parity_region(m)[0] == {"q1", "q2", "g"}
    assert conj_region(m).region == {"g"}
    assert brute_force_conj(m, 6) == {"g"}


def test_conj_on_the_fig3_structure(corpus):
    m = corpus["gameshow_v01"]
    res = conj_region(m)
    assert res.region == set(m.states) - {"s2"}
    assert brute_force_conj(m, 2) == res.region
    for s in res.region:
        assert verify_conj_witness(m, res.strategy, s)


def test_all_goal_model():
    m = validate_mdp(["f"], {"f": 0}, {}, [("F", {"f"})], sinks=["f"])
    assert conj_region(m).region == {"f"}
    assert brute_force_conj(m, 1) == {"f"}


def test_oracle_budget():
    m = s3_t2()
    with pytest.raises(BudgetExceeded):
        brute_force_conj(m, 6, budget=10)


@pytest.mark.parametrize("name", ["gameshow", "gameshow_v01", "gameshow_v11", "odd_trap", "coin",
                                  "three_targets", "retry_parity"])
def test_corpus_oracle_agreement(corpus, name):
    m = corpus[name]
    bound = min(memory_bound_for(m), 6)
    assert conj_region(m).region == brute_force_conj(m, bound)


@given(st.integers(0, 100_000))
def test_conj_matches_oracle_on_random_models(seed):
    m = random_mdp(random.Random(seed), max_states=5, max_actions=2, max_priority=3)
    res = conj_region(m)
    bound = min(memory_bound_for(m), 6)
    won, machine = conj_oracle_witness(m, bound)
    assert res.region == won
    for s in won:
        assert verify_conj_witness(m, machine, s)
        assert verify_conj_witness(m, res.strategy, s)


@given(st.integers(0, 100_000), st.integers(0, 2 ** 5 - 1))
def test_conj_is_monotone_under_restriction(seed, mask):
    m = random_mdp(random.Random(seed))
    keep = {s for k, s in enumerate(m.states) if mask >> k & 1} | set(m.goal)
    sub = restrict(m, keep)
    small = conj_region(sub).region if sub.states else frozenset()
    assert small <= conj_region(m).region & keep
