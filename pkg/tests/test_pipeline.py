import itertools
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from sureparity.errors import NotAVertex, NotCleanParity, NotCleanTargets, NotRelativelyInterior
from sureparity.gen import random_clean_mdp
from sureparity.geometry import frontier
from sureparity.formats import export_strategy, import_strategy, parse_mdp_file
from sureparity.model import (Memoryless, Stitched, induce, reach_to, reach_vector, sure_parity_on_chain,
                              validate_mdp)
from sureparity.moreach import achievable
from sureparity.pipeline import (_can_reach, check_clean, decide_nonstrict, decide_strict, exact_reach, interior_case,
                                 lex_optimize, project, project_and_prune, sure_parity_of, verify_strategy,
                                 vertex_case)

T, TT = F(1, 3), F(2, 3)
SINKS = {"r1": "*", "r2": "*", "r12": "*"}


def pure(m):
    live = [s for s in m.states if not m.is_sink(s)]
    for combo in itertools.product(*[m.enabled[s] for s in live]):
        choice = {s: m.enabled[s][0] for s in m.states}
        choice.update(zip(live, combo))
        yield Memoryless.deterministic(choice)


def small_pure_strategies(m, horizons=(1, 2, 3)):
    """Memoryless strategies and two-phase switches between them (finite memory)."""
    base = list(pure(m))
    yield from base
    for k in horizons:
        for a in base:
            for b in base:
                if a is not b:
                    yield Stitched(a, k, b)


def test_projection_structure(gameshow):
    pm = project(gameshow, (0, 1))
    assert pm.enabled["s1"] == ("b",) and pm.enabled["s2"] == ("a",)
    assert pm.bottom == "⊥" and pm.priorities["⊥"] == 0
    assert all("⊥" not in f for _, f in pm.targets)
    pm = project(gameshow, (F(1, 2), F(1, 2)))
    assert pm.enabled["s1"] == ("a",) and pm.enabled["s2"] == ("a", "b")
    assert pm.trans[("s1", "a")] == {"r1": F(1, 6), "r12": F(1, 6), "⊥": F(1, 6), "s1": F(1, 2)}
    with pytest.raises(ValueError):
        project(gameshow, (1, 1))


def test_projection_then_prune(gameshow):
    pruned, res, entry = project_and_prune(gameshow, (0, 1))
    assert "s2" not in pruned.enabled
    assert entry["removed_states"] == ["s2"]
    assert res.region == set(gameshow.states) - {"s2"}


def test_dominated_actions_vanish():
    m = validate_mdp(["s", "f", "g"], {}, {("s", "good"): {"f": 1}, ("s", "poor"): {"f": F(1, 2), "g": F(1, 2)}},
                     [("F", {"f"}), ("G", {"g"})], "s", sinks=["f", "g"])
    assert project(m, (1, 0)).enabled["s"] == ("good",)


def test_strict_examples(gameshow):
    v = decide_strict(gameshow, (F(1, 2), F(1, 6)))
    assert v.answer and v.verification.ok
    assert all(a > p for a, p in zip(v.achieved, (F(1, 2), F(1, 6))))
    assert not decide_strict(gameshow, (1, T)).answer
    assert decide_strict(gameshow, (0, 0)).answer
    hand = Stitched(Memoryless.deterministic({"s": "pair1", "s1": "a", "s2": "a", **SINKS}), 3,
                    Memoryless.deterministic({"s": "pair1", "s1": "b", "s2": "b", **SINKS}))
    chk = verify_strategy(gameshow, hand, (F(1, 2), F(1, 6)), strict=True)
    assert chk.ok and chk.reach == (F(3, 4), F(1, 2))


def test_certified_mode_matches_direct(gameshow):
    v = decide_strict(gameshow, (F(1, 2), F(1, 6)))
    chk = verify_strategy(gameshow, v.witness, (F(1, 2), F(1, 6)), strict=True, cap=2)
    assert chk.mode == "certified" and chk.ok
    assert chk.reach == v.achieved
    big = Stitched(v.witness.first, 10 ** 6, v.witness.second)
    chk = verify_strategy(gameshow, big, (F(1, 2), F(1, 6)), strict=True)
    assert chk.mode == "certified" and chk.ok and chk.reach is None


def test_checker_finds_the_odd_loop(gameshow):
    forever = Memoryless.deterministic({"s": "pair1", "s1": "a", "s2": "a", **SINKS})
    chk = verify_strategy(gameshow, forever, (0, 0))
    assert not chk.ok and not chk.sure_parity
    assert any("'s1'" in c for c in chk.checks)


def test_lex_examples(gameshow):
    assert not lex_optimize(gameshow, [0, 1]).answer
    v = lex_optimize(gameshow, [1, 0])
    assert v.answer and v.p_star == (1, 0)
    assert v.verification.ok and v.memory is not None and not v.flags


def test_nonstrict_examples(gameshow):
    v = decide_nonstrict(gameshow, (TT, TT))
    assert v.answer and v.achieved == (TT, TT)
    steps = [e for e in v.trace if e["step"] == "project"]
    assert steps[0]["direction"] == (F(1, 2), F(1, 2)) and steps[0]["removed_states"] == ["s1"]
    assert steps[1]["case"] == "vertex" and steps[1]["direction"] == (TT, T)
    assert not decide_nonstrict(gameshow, (1, T)).answer
    assert achievable(gameshow, "s", (1, T), strict=False).answer
    v = decide_nonstrict(gameshow, (0, 1))
    assert v.answer and v.verification.ok
    assert not decide_nonstrict(gameshow, (T, 1)).answer


def test_vertex_case_directly(gameshow):
    assert not vertex_case(gameshow, (1, T)).answer
    with pytest.raises(NotAVertex):
        vertex_case(gameshow, (TT, TT))


def test_interior_case(gameshow):
    pruned, _, _ = project_and_prune(gameshow, (F(1, 2), F(1, 2)))
    mix, info = interior_case(pruned, (F(1, 2), F(5, 6)), "s")
    chk = verify_strategy(gameshow, mix, (F(1, 2), F(5, 6)))
    assert chk.ok
    with pytest.raises(NotRelativelyInterior):
        interior_case(pruned, (TT, TT), "s")
    hand = Stitched(Memoryless.deterministic({"s": "pair2", "s2": "a", **SINKS}), 2,
                    Memoryless.deterministic({"s": "pair2", "s2": "b", **SINKS}))
    assert verify_strategy(gameshow, hand, (F(1, 2), F(5, 6))).ok


def test_cleanness_is_enforced(corpus):
    with pytest.raises(NotCleanParity):
        check_clean(corpus["gameshow_v11"])
    m = validate_mdp(["s", "t", "f"], {}, {("s", "a"): {"t": F(1, 2), "f": F(1, 2)}, ("t", "a"): {"t": 1}},
                     [("F", {"f"})], "s", sinks=["f"])
    with pytest.raises(NotCleanTargets):
        decide_strict(m, (0,))


def test_single_target_collapse(corpus):
    m = corpus["coin"]
    v = lex_optimize(m, [0])
    assert v.answer and v.p_star == (1,)
    v = decide_nonstrict(m, (1,))
    assert v.answer and v.achieved == (1,)


def test_trap_needs_the_limit(corpus):
    m = corpus["odd_trap"]
    assert not decide_nonstrict(m, (1,)).answer
    assert decide_nonstrict(m, (F(99, 100),)).answer
    assert not lex_optimize(m, [0]).answer


def test_projection_correspondence(corpus):
    """A memoryless strategy of the projection is almost-surely absorbing iff it is optimal for v."""
    for name in ("gameshow", "three_targets", "retry_parity"):
        m = corpus[name]
        poly = frontier(m)
        n = len(m.targets)
        dirs = [w for w, _ in poly.upper_facets] + [tuple(F(int(i == j)) for j in range(n)) for i in range(n)]
        for w in dirs:
            pm = project(m, w)
            best = max(sum(a * b for a, b in zip(w, x)) for x in poly.extreme)
            for sigma in pure(pm):
                c = induce(pm, sigma, m.initial)
                absorbed = reach_to(c, {v for v in c.states if c.state_of[v] in pm.goal})[c.initial] == 1
                value = sum(a * b for a, b in zip(w, reach_vector(induce(m, sigma, m.initial))))
                if absorbed:
                    assert value == best
                elif value == best:
                    # optimal yet not absorbing: the stuck mass sits where w earns nothing
                    goal = {v for v in c.states if c.state_of[v] in pm.goal}
                    lost = reach_to(c, goal)
                    rewarded = {t for x, (_, f) in zip(w, m.targets) if x > 0 for t in f}
                    live = _can_reach(m, rewarded)
                    assert all(c.state_of[v] not in live for v in c.states if lost[v] == 0)


@pytest.mark.parametrize("name", ["gameshow", "three_targets", "retry_parity", "coin"])
def test_lex_optimum_is_not_beaten(corpus, name):
    m = corpus[name]
    n = len(m.targets)
    for order in itertools.permutations(range(n)):
        v = lex_optimize(m, list(order))
        for sigma in small_pure_strategies(m):
            c = induce(m, sigma)
            if not sure_parity_on_chain(c):
                continue
            r = reach_vector(c)
            key = tuple(r[i] for i in order)
            if v.answer:
                assert key <= v.p_star


@given(st.integers(0, 100_000), st.lists(st.fractions(0, 1, max_denominator=12), min_size=2, max_size=2))
def test_strict_verdict_ignores_the_sure_conjunct(seed, p):
    m = random_clean_mdp(random.Random(seed), max_states=6, n_targets=2)
    if m is None:
        return
    v = decide_strict(m, p)
    assert v.answer == achievable(m, m.initial, p, strict=True).answer
    if v.answer:
        assert v.verification.ok


@given(st.integers(0, 100_000))
def test_attained_points_are_accepted(seed):
    m = random_clean_mdp(random.Random(seed), max_states=6, n_targets=2)
    if m is None:
        return
    for sigma in itertools.islice(small_pure_strategies(m, horizons=(2,)), 12):
        c = induce(m, sigma)
        if sure_parity_on_chain(c):
            p = reach_vector(c)
            v = decide_nonstrict(m, p)
            assert v.answer and v.verification.ok
            assert all(a >= b for a, b in zip(v.achieved, p))


@given(st.integers(0, 100_000), st.lists(st.fractions(0, 1, max_denominator=6), min_size=2, max_size=2),
       st.lists(st.fractions(0, 1, max_denominator=6), min_size=2, max_size=2))
def test_nonstrict_is_monotone(seed, p, shrink):
    m = random_clean_mdp(random.Random(seed), max_states=6, n_targets=2)
    if m is None:
        return
    q = tuple(a * b for a, b in zip(p, shrink))
    vp = decide_nonstrict(m, p)
    vq = decide_nonstrict(m, q)
    if vp.answer:
        assert vq.answer
    for v in (vp, vq):
        if v.answer:
            assert v.verification.ok


def test_exact_reach_agrees_with_induce(gameshow):
    v = decide_strict(gameshow, (F(1, 2), F(1, 2)))
    assert exact_reach(gameshow, v.witness, "s") == reach_vector(induce(gameshow, v.witness))
    assert sure_parity_of(gameshow, v.witness, "s")


LOOPER = """
state q0 priority 1
state q1 priority 2
state q2 priority 0
state q3 priority 3
sink g0 priority 0 target F1
sink g1 priority 0 target F2
init q0
act q0 a0 q2:1/2 q3:1/2
act q1 a0 q2:1
act q2 a0 q2:1
act q2 a1 q0:3/4 q3:1/4
act q3 a0 q1:1/4 q3:3/4
act q3 a1 g1:1/4 q1:3/4
"""


def test_mass_may_stay_where_it_earns_nothing():
    # F1 is unreachable, so maximizing it forces nothing; parking at q2 keeps parity,
    # and each retry through q3 adds to F2 without ever reaching it surely
    m = parse_mdp_file(LOOPER)
    assert conj_free(m)
    for p in [(0, F(1, 8)), (0, F(99, 100))]:
        v = decide_nonstrict(m, p)
        assert v.answer and v.verification.ok
        again = import_strategy(export_strategy(v.witness))
        assert verify_strategy(m, again, p).ok
    assert not decide_nonstrict(m, (0, 1)).answer
    assert not lex_optimize(m, [0, 1]).answer
    assert not lex_optimize(m, [1, 0]).answer


def conj_free(m):
    """No state wins sure parity together with almost-sure reachability."""
    from sureparity.parity import conj_region
    return not conj_region(m).region - m.goal


def test_point_below_a_single_maximal_point():
    m = parse_mdp_file("""
state q0 priority 2
state q1 priority 2
state q2 priority 1
sink g0 priority 0 target F1
sink g1 priority 0 target F2
init q0
act q0 a0 q0:1
act q0 a1 g0:1
act q1 a0 g1:3/4 q2:1/4
act q1 a1 g0:1/4 q2:3/4
act q2 a0 g1:1
""")
    for p in [(0, 0), (F(1, 2), 0), (1, 0)]:
        v = decide_nonstrict(m, p)
        assert v.answer and v.verification.ok
    assert not decide_nonstrict(m, (0, F(1, 100))).answer
