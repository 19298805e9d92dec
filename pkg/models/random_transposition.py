"""Random transposition model on the symmetric group S_n.
States are permutation words in one-line notation over {1..n}; the neighbours
of sigma are tau o sigma for the n(n-1)/2 transpositions tau.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations
from math import factorial
from typing import Tuple

from errors import ModelParameterError
from markov import MarkovTriple, build_triple
from models.subgraphs import EdgePair

logger = logging.getLogger(__name__)

MAX_N = 8

Word = Tuple[int, ...]


def compose(tau: Tuple[int, int], sigma: Word) -> Word:
    """tau o sigma: exchange the values i and j in the word of sigma."""
    i, j = tau
    return tuple(j if v == i else i if v == j else v for v in sigma)


@dataclass(frozen=True, eq=False)
class RandomTranspositionModel:
    n: int
    triple: MarkovTriple

    @property
    def degree(self) -> int:
        return self.n * (self.n - 1) // 2

    @property
    def rate(self) -> Fraction:
        return Fraction(2, self.n * (self.n - 1))

    def transposition(self, x: int, y: int) -> Tuple[int, int]:
        """The (i, j), i < j, with states[y] = tau_ij o states[x]."""
        sigma, other = self.triple.states[x], self.triple.states[y]
        values = sorted(a for a, b in zip(sigma, other) if a != b)
        return values[0], values[1]

    def pair_class(self, pair: EdgePair) -> int:
        """1 if the two transpositions are disjoint, else 2."""
        first = set(self.transposition(pair.pivot, pair.first))
        second = set(self.transposition(pair.pivot, pair.second))
        return 1 if not first & second else 2


def random_transposition(n: int) -> RandomTranspositionModel:
    """Simple random walk on S_n generated by transpositions, rates 2/(n(n-1)).

    Raises:
        ModelParameterError: Unless 1 < n <= 8
    """
    if not isinstance(n, int) or not 1 < n <= MAX_N:
        raise ModelParameterError(f"rt(n) needs an integer 1 < n <= {MAX_N}, got {n!r}")
    states = list(permutations(range(1, n + 1)))
    taus = list(combinations(range(1, n + 1), 2))
    rate = 2.0 / (n * (n - 1))
    rates = {(sigma, compose(tau, sigma)): rate for sigma in states for tau in taus}
    weight = 1.0 / factorial(n)
    triple = build_triple(states, rates, [weight] * len(states), name=f"rt({n})")
    logger.info("Built rt(%s): %s states, degree %s", n, len(states), len(taus))
    return RandomTranspositionModel(n=n, triple=triple)


def get_model_declarations():
    """Model-spec declarations for the random transposition family."""
    return [
        {
            "type": "model",
            "model": {
                "name": "rt",
                "constructor": "random_transposition",
                "description": "Random transposition walk on the symmetric group S_n.",
                "parameters": {
                    "type": "object",
                    "properties": {
                        "n": {"type": "integer", "description": f"Number of symbols (1 < n <= {MAX_N})"},
                    },
                    "required": ["n"],
                },
            },
        },
    ]
