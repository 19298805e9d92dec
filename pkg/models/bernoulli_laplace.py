"""Bernoulli-Laplace model: k particles exclusively hopping on the complete graph over n sites.
States are sorted k-subsets of {1..n} (the occupied sites).
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Dict, List, Tuple

from errors import ModelParameterError
from markov import MarkovTriple, build_triple
from models.subgraphs import EdgePair

logger = logging.getLogger(__name__)

Subset = Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class BernoulliLaplaceModel:
    n: int
    k: int
    triple: MarkovTriple

    @property
    def degree(self) -> int:
        return self.k * (self.n - self.k)

    @property
    def rate(self) -> Fraction:
        return Fraction(1, self.degree)

    def swap(self, x: int, y: int) -> Tuple[int, int]:
        """(i, j) with y = s_ij x: particle leaves site i and enters site j."""
        before, after = set(self.triple.states[x]), set(self.triple.states[y])
        (i,), (j,) = before - after, after - before
        return i, j

    def pair_class(self, pair: EdgePair) -> int:
        """1 if the two moves share their source or their target site, else 2."""
        i, j = self.swap(pair.pivot, pair.first)
        p, q = self.swap(pair.pivot, pair.second)
        return 1 if i == p or j == q else 2


def check_parameters(n, k):
    if not isinstance(n, int) or not isinstance(k, int):
        raise ModelParameterError(f"bl(n, k) needs integers, got n={n!r}, k={k!r}")
    if n < 2:
        raise ModelParameterError(f"bl(n, k) needs n > 1, got n={n}")
    if not 1 <= k <= n - 1:
        raise ModelParameterError(f"bl(n, k) needs 1 <= k <= n-1, got n={n}, k={k}")


def hop(x: Subset, i: int, j: int) -> Subset:
    """Move the particle at site i to the empty site j."""
    return tuple(sorted((set(x) - {i}) | {j}))


def bernoulli_laplace(n: int, k: int) -> BernoulliLaplaceModel:
    """Simple random walk on the slice Omega(n, k), rates 1/(k(n-k)).

    Raises:
        ModelParameterError: Unless n > 1 and 1 <= k <= n-1
    """
    check_parameters(n, k)
    sites = range(1, n + 1)
    states: List[Subset] = list(combinations(sites, k))
    degree = k * (n - k)
    rate = 1.0 / degree
    rates: Dict[Tuple[Subset, Subset], float] = {}
    for x in states:
        empty = [j for j in sites if j not in x]
        for i in x:
            for j in empty:
                rates[(x, hop(x, i, j))] = rate
    weight = 1.0 / comb(n, k)
    triple = build_triple(states, rates, [weight] * len(states), name=f"bl({n},{k})")
    logger.info("Built bl(%s,%s): %s states, degree %s", n, k, len(states), degree)
    return BernoulliLaplaceModel(n=n, k=k, triple=triple)


def get_model_declarations():
    """Model-spec declarations for the Bernoulli-Laplace family."""
    return [
        {
            "type": "model",
            "model": {
                "name": "bl",
                "constructor": "bernoulli_laplace",
                "description": "Bernoulli-Laplace exclusion process: k particles on the complete graph with n sites.",
                "parameters": {
                    "type": "object",
                    "properties": {
                        "n": {"type": "integer", "description": "Number of sites (n > 1)"},
                        "k": {"type": "integer", "description": "Number of particles (1 <= k <= n-1)"},
                    },
                    "required": ["n", "k"],
                },
            },
        },
    ]
