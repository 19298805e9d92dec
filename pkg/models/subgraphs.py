"""Triangles, squares and adjacent edge pairs of a chain's support graph.
Vertices are state indices of the owning MarkovTriple.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, NamedTuple, Optional, Sequence, Set, Tuple

from errors import InvalidSubgraphError, UnsupportedModelError
from markov import MarkovTriple

logger = logging.getLogger(__name__)

CYCLE_LENGTHS = {'triangle': 3, 'square': 4}


class EdgePair(NamedTuple):
    """Ordered pair of distinct adjacent edges {pivot, first} and {pivot, second}."""
    pivot: int
    first: int
    second: int


def canonical_cycle(vertices: Sequence[int]) -> Tuple[int, ...]:
    """Lexicographically smallest rotation/reflection of a vertex cycle."""
    cycle = list(vertices)
    candidates = []
    for seq in (cycle, cycle[::-1]):
        for shift in range(len(seq)):
            candidates.append(tuple(seq[shift:] + seq[:shift]))
    return min(candidates)


@dataclass(frozen=True)
class SubgraphPattern:
    """Triangle or square subgraph given by its vertex cycle (state indices)."""
    kind: str
    vertices: Tuple[int, ...]

    @property
    def key(self) -> Tuple[int, ...]:
        return canonical_cycle(self.vertices)

    def edges(self) -> List[Tuple[int, int]]:
        """Cycle edges as sorted index pairs."""
        m = len(self.vertices)
        return [tuple(sorted((self.vertices[i], self.vertices[(i + 1) % m]))) for i in range(m)]

    def pairs(self) -> List[EdgePair]:
        """The ordered adjacent edge pairs inside the cycle (6 for triangles, 8 for squares)."""
        m = len(self.vertices)
        out = []
        for i, x in enumerate(self.vertices):
            before, after = self.vertices[i - 1], self.vertices[(i + 1) % m]
            out.append(EdgePair(x, after, before))
            out.append(EdgePair(x, before, after))
        return out


def validate_pattern(t: MarkovTriple, pattern: SubgraphPattern) -> None:
    """Check that the pattern is a cycle of distinct adjacent vertices.

    Raises:
        InvalidSubgraphError: Wrong kind/length, repeated vertices, or a missing edge
    """
    expected = CYCLE_LENGTHS.get(pattern.kind)
    if expected is None:
        raise InvalidSubgraphError(f"unknown subgraph kind {pattern.kind!r}")
    if len(pattern.vertices) != expected:
        raise InvalidSubgraphError(f"a {pattern.kind} needs {expected} vertices, got {len(pattern.vertices)}")
    if len(set(pattern.vertices)) != expected:
        raise InvalidSubgraphError(f"vertices {pattern.vertices} are not distinct")
    if any(v < 0 or v >= t.size for v in pattern.vertices):
        raise InvalidSubgraphError(f"vertices {pattern.vertices} out of range")
    for x, y in pattern.edges():
        if not t.graph.has_edge(x, y):
            raise InvalidSubgraphError(f"{t.label(x)} and {t.label(y)} are not adjacent")


def _neighbour_sets(t: MarkovTriple) -> List[Set[int]]:
    return [set(t.graph.adj[x]) for x in range(t.size)]


def common_neighbours(t: MarkovTriple, x: int, y: int) -> Set[int]:
    return set(t.graph.adj[x]) & set(t.graph.adj[y])


def enumerate_triangles(t: MarkovTriple) -> List[SubgraphPattern]:
    """All triangles, each listed once with increasing vertex indices."""
    nbrs = _neighbour_sets(t)
    found = []
    for u, v in t.edges.tolist():
        for w in sorted(nbrs[u] & nbrs[v]):
            if w > v:
                found.append(SubgraphPattern('triangle', (u, v, w)))
    return found


def enumerate_squares(t: MarkovTriple) -> List[SubgraphPattern]:
    """All 4-cycles, each listed once in canonical form (smallest vertex first)."""
    nbrs = _neighbour_sets(t)
    found = []
    for a in range(t.size):
        higher = sorted(v for v in nbrs[a] if v > a)
        for i, b in enumerate(higher):
            for d in higher[i + 1:]:
                for c in sorted(nbrs[b] & nbrs[d]):
                    if c > a:
                        found.append(SubgraphPattern('square', (a, b, c, d)))
    return found


def is_chordless(t: MarkovTriple, square: SubgraphPattern) -> bool:
    a, b, c, d = square.vertices
    return not t.graph.has_edge(a, c) and not t.graph.has_edge(b, d)


def adjacent_pairs(t: MarkovTriple) -> List[EdgePair]:
    """Every ordered pair of distinct edges sharing a vertex."""
    pairs = []
    for x in range(t.size):
        around = t.neighbours(x).tolist()
        pairs.extend(EdgePair(x, y, z) for y in around for z in around if y != z)
    return pairs


def squares_through_pair(t: MarkovTriple, pair: EdgePair, chordless: bool = False) -> List[SubgraphPattern]:
    """Squares containing both edges of the pair (necessarily consecutive at the pivot)."""
    corners = common_neighbours(t, pair.first, pair.second) - {pair.pivot}
    squares = [SubgraphPattern('square', canonical_cycle((pair.pivot, pair.first, w, pair.second)))
               for w in sorted(corners)]
    if chordless:
        squares = [sq for sq in squares if is_chordless(t, sq)]
    return squares


def triangle_count_per_edge(t: MarkovTriple) -> Dict[Tuple[int, int], int]:
    nbrs = _neighbour_sets(t)
    return {(u, v): len(nbrs[u] & nbrs[v]) for u, v in t.edges.tolist()}


@dataclass
class PairCoverage:
    """How the adjacent edge pairs of a chain are covered by triangles and squares.

    Pairs whose outer vertices are adjacent lie in exactly one triangle. All
    other pairs must be covered by chordless squares; a square is usable when
    its eight pairs share the same multiplicity.
    """
    triangle_pairs: int = 0
    square_pairs: int = 0
    tau_min: int = 0
    tau_max: int = 0
    squares: List[Tuple[SubgraphPattern, int]] = field(default_factory=list)
    multiplicities: Counter = field(default_factory=Counter)
    uncovered: List[EdgePair] = field(default_factory=list)
    mixed_squares: List[SubgraphPattern] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.uncovered and not self.mixed_squares

    def summary(self) -> dict:
        return {
            'triangle_pairs': self.triangle_pairs,
            'square_pairs': self.square_pairs,
            'tau_min': self.tau_min,
            'tau_max': self.tau_max,
            'chordless_squares': len(self.squares),
            'square_multiplicities': dict(sorted(self.multiplicities.items())),
            'uncovered_pairs': len(self.uncovered),
            'mixed_squares': len(self.mixed_squares),
        }


def pair_coverage(t: MarkovTriple) -> PairCoverage:
    """Enumerate the triangle/square cover used by the generic certificate."""
    coverage = PairCoverage()
    counts = triangle_count_per_edge(t)
    if counts:
        coverage.tau_min = min(counts.values())
        coverage.tau_max = max(counts.values())

    multiplicity: Dict[EdgePair, int] = {}
    for pair in adjacent_pairs(t):
        if t.graph.has_edge(pair.first, pair.second):
            coverage.triangle_pairs += 1
            continue
        coverage.square_pairs += 1
        m = len(squares_through_pair(t, pair, chordless=True))
        multiplicity[pair] = m
        if m == 0:
            coverage.uncovered.append(pair)

    for square in enumerate_squares(t):
        if not is_chordless(t, square):
            continue
        values = {multiplicity[p] for p in square.pairs()}
        if len(values) == 1:
            m = values.pop()
            coverage.squares.append((square, m))
            coverage.multiplicities[m] += 1
        else:
            coverage.mixed_squares.append(square)

    logger.info("Pair coverage: %s", coverage.summary())
    return coverage


@dataclass(frozen=True)
class PairClassification:
    """Model-specific split of the adjacent edge pairs into P1 and P2."""
    p1: FrozenSet[EdgePair]
    p2: FrozenSet[EdgePair]


def classify_pairs(model) -> PairClassification:
    """Split adjacent edge pairs with the model's overlap rule.

    Args:
        model: A Bernoulli-Laplace or random transposition model

    Raises:
        UnsupportedModelError: For models without a pair rule
    """
    rule = getattr(model, 'pair_class', None)
    if rule is None:
        raise UnsupportedModelError(f"{type(model).__name__} has no P1/P2 pair classification")
    p1, p2 = set(), set()
    for pair in adjacent_pairs(model.triple):
        (p1 if rule(pair) == 1 else p2).add(pair)
    return PairClassification(frozenset(p1), frozenset(p2))
