"""Sure parity combined with multiple probabilistic reachability objectives on MDPs.

All numbers are exact rationals (``fractions.Fraction``).  The main entry
points are re-exported here; see the README for a tour.
"""

from importlib import resources
from typing import List

from .errors import SureParityError
from .formats import export_strategy, import_strategy, parse_mdp_file, parse_query, print_mdp
from .geometry import frontier
from .model import Fsm, Mdp, Memoryless, Mixture, Stitched, induce, restrict, validate_mdp
from .moreach import achievable, bound_B
from .parity import brute_force_conj, conj_region, sure_parity_region
from .pipeline import (decide_nonstrict, decide_strict, interior_case, lex_optimize, project,
                       vertex_case, verify_strategy)

__version__ = "0.1.0"

__all__ = [
    "Fsm", "Mdp", "Memoryless", "Mixture", "Stitched", "SureParityError",
    "achievable", "bound_B", "brute_force_conj", "conj_region", "corpus_names", "corpus_text",
    "decide_nonstrict", "decide_strict", "export_strategy", "frontier", "import_strategy", "induce",
    "interior_case", "lex_optimize", "load_corpus", "parse_mdp_file", "parse_query", "print_mdp",
    "project", "restrict", "sure_parity_region", "validate_mdp", "verify_strategy", "vertex_case",
]


def corpus_names() -> List[str]:
    """Names of the bundled example models."""
    root = resources.files(__name__) / "corpus"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".mdp"))


def corpus_text(name: str) -> str:
    return (resources.files(__name__) / "corpus" / f"{name}.mdp").read_text(encoding="utf-8")


def load_corpus(name: str) -> Mdp:
    """Parse a bundled model by name, e.g. ``load_corpus("gameshow")``."""
    return parse_mdp_file(corpus_text(name), source=f"{name}.mdp")
