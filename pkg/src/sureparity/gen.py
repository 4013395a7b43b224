"""Random small models for property tests and oracle cross-checks."""

import random
from fractions import Fraction
from typing import Optional

from .model import Mdp, make_chain, reach_to, validate_mdp
from .moreach import max_reach_values
from .parity import clean_wrt_parity


def _random_dist(rng: random.Random, targets, denom: int = 4):
    k = rng.randint(1, min(3, len(targets)))
    picks = rng.sample(list(targets), k)
    cuts = sorted(rng.randint(1, denom - 1) for _ in range(k - 1)) if denom > 1 else []
    bounds = [0] + cuts + [denom]
    dist = {}
    for t, lo, hi in zip(picks, bounds, bounds[1:]):
        if hi > lo:
            dist[t] = dist.get(t, Fraction(0)) + Fraction(hi - lo, denom)
    return dist


def random_mdp(rng: random.Random, max_states: int = 5, max_actions: int = 2, max_priority: int = 3,
               n_targets: Optional[int] = None) -> Mdp:
    """A random MDP with sink targets and at most ``max_states`` states in total.

    Non-sink states get 1..max_actions actions with dyadic probabilities.
    Each target owns one sink; at most one extra sink shares two targets.
    """
    nt = n_targets if n_targets is not None else rng.randint(1, 2)
    sinks = [f"g{k}" for k in range(nt)]
    targets = [(f"F{k + 1}", {sinks[k]}) for k in range(nt)]
    if nt >= 2 and max_states - nt >= 2 and rng.random() < 0.3:
        sinks.append("g12")
        targets[0][1].add("g12")
        targets[1][1].add("g12")
    n = rng.randint(1, max(1, max_states - len(sinks)))
    states = [f"q{k}" for k in range(n)]
    everything = states + sinks
    prios = {s: rng.randint(0, max_priority) for s in states}
    prios.update({s: 0 for s in sinks})
    trans = {}
    for s in states:
        for a in range(rng.randint(1, max_actions)):
            trans[(s, f"a{a}")] = _random_dist(rng, everything)
    for g in sinks:
        trans[(g, "*")] = {g: Fraction(1)}
    return validate_mdp(everything, prios, trans, targets, initial=states[0], sinks=sinks)


def random_chain(rng: random.Random, max_states: int = 5):
    """A random chain whose single target is reached with positive probability from the start."""
    while True:
        n = rng.randint(1, max_states)
        nodes = list(range(n)) + ["goal"]
        trans = {k: _random_dist(rng, nodes) for k in range(n)}
        trans["goal"] = {"goal": Fraction(1)}
        c = make_chain(trans, 0, targets=[{"goal"}])
        if reach_to(c, {"goal"})[0] > 0:
            return c


def random_clean_mdp(rng: random.Random, max_states: int = 5, max_actions: int = 2, max_priority: int = 3,
                     n_targets: Optional[int] = None, tries: int = 200) -> Optional[Mdp]:
    """A random model restricted to its sure-parity region that also reaches the targets almost surely.

    Returns None when no clean model with a live initial state turns up
    within ``tries`` draws.
    """

    for _ in range(tries):
        m = clean_wrt_parity(random_mdp(rng, max_states, max_actions, max_priority, n_targets))
        if m.initial is None or m.is_sink(m.initial):
            continue
        if any(not f for _, f in m.targets):
            continue
        vals, _ = max_reach_values(m, m.goal)
        if all(v == 1 for v in vals.values()):
            return m
    return None
