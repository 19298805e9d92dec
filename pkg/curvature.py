"""The forms A(rho, psi) and B(rho, psi) and their edge decomposition.

B is available three ways: the operator form (``b_form_direct``), the
two-sum rewriting over ordered triples (``b_form_simplified``) and the sum
of edge-pair terms b(e, e') (``b_edge_terms``). The on/off-diagonal split,
subgraph restrictions and the square identity build on the edge-pair terms.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
import scipy.sparse

from errors import DomainError, UnsupportedModelError
from logmean import deficit, theta, theta_partials
from markov import (
    Density,
    MarkovTriple,
    edge_inner,
    generator_apply,
    gradient,
)
from models.subgraphs import SubgraphPattern, validate_pattern

logger = logging.getLogger(__name__)

RHO_FLOOR = 1e-300
PARTS = ('on', 'off', 'all')


@dataclass(frozen=True)
class EdgePairTerm:
    """One summand b(e, e') of B.

    Edges are sorted index pairs. ``pivot`` is the shared vertex for distinct
    adjacent edges and None for the diagonal term b(e, e).
    """
    first_edge: Tuple[int, int]
    second_edge: Tuple[int, int]
    pivot: Optional[int]
    value: float

    @property
    def diagonal(self) -> bool:
        return self.pivot is None


@dataclass(frozen=True)
class FormValue:
    a: float
    b_total: float
    b_on: float
    b_off: float


class EdgePairArrays(NamedTuple):
    """Vectorised edge-pair terms; ``first == second`` marks diagonal terms.

    Diagonal rows hold b(e, e) for the unordered edge {pivot, first}.
    """
    pivot: np.ndarray
    first: np.ndarray
    second: np.ndarray
    values: np.ndarray


class SquareIdentity(NamedTuple):
    alternating: float
    deficit: float
    total: float


def _strict(t: MarkovTriple, rho) -> np.ndarray:
    arr = np.asarray(rho.values if isinstance(rho, Density) else rho, dtype=float)
    if arr.shape != (t.size,):
        raise DomainError(f"rho must have {t.size} entries, got shape {arr.shape}")
    if np.any(~np.isfinite(arr)) or np.any(arr < RHO_FLOOR):
        raise DomainError(f"rho must be strictly positive (>= {RHO_FLOOR})")
    return arr


def _potential(t: MarkovTriple, psi) -> np.ndarray:
    arr = np.asarray(psi, dtype=float)
    if arr.shape != (t.size,):
        raise DomainError(f"psi must have {t.size} entries, got shape {arr.shape}")
    return arr


def _means(t: MarkovTriple, rho: np.ndarray):
    """theta and its partials on every ordered support pair."""
    x, y = rho[t.sources], rho[t.targets]
    d1, d2 = theta_partials(x, y)
    return theta(x, y), d1, d2


def a_form(t: MarkovTriple, rho, psi) -> float:
    """A(rho, psi) = <rho^ grad psi, grad psi>_pi.

    Raises:
        DomainError: If rho is not strictly positive
    """
    rho = _strict(t, rho)
    grad = gradient(t, _potential(t, psi))
    hat = theta(rho[t.sources], rho[t.targets])
    return edge_inner(t, hat * grad, grad)


def a_edge_sum(t: MarkovTriple, rho, psi) -> float:
    """A as the sum of a(e)c(e) over unordered edges."""
    rho, psi = _strict(t, rho), _potential(t, psi)
    x, y = t.edges[:, 0], t.edges[:, 1]
    c = np.array([t.conductances[t.pair_lookup[(int(u), int(v))]] for u, v in t.edges], dtype=float)
    return float(np.sum((psi[y] - psi[x]) ** 2 * theta(rho[x], rho[y]) * c))


def b_form_direct(t: MarkovTriple, rho, psi) -> float:
    """B(rho, psi) = 1/2 <L^rho grad psi, grad psi>_pi - <rho^ grad psi, grad L psi>_pi.

    L^rho(x, y) = d1 theta(rho(x), rho(y)) Lrho(x) + d2 theta(rho(x), rho(y)) Lrho(y).
    """
    rho, psi = _strict(t, rho), _potential(t, psi)
    hat, d1, d2 = _means(t, rho)
    l_rho = generator_apply(t, rho)
    l_hat = d1 * l_rho[t.sources] + d2 * l_rho[t.targets]
    grad = gradient(t, psi)
    grad_l = gradient(t, generator_apply(t, psi))
    return 0.5 * edge_inner(t, l_hat * grad, grad) - edge_inner(t, hat * grad, grad_l)


@lru_cache(maxsize=16)
def _pair_products(t: MarkovTriple) -> Tuple[np.ndarray, np.ndarray]:
    """All (k1, k2) with pairs k1 = (x, y), k2 = (x, z) leaving the same x, y == z included."""
    firsts, seconds = [], []
    for x in range(t.size):
        out = np.arange(t.indptr[x], t.indptr[x + 1])
        a, b = np.meshgrid(out, out, indexing="ij")
        firsts.append(a.ravel())
        seconds.append(b.ravel())
    if not firsts:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    return np.concatenate(firsts), np.concatenate(seconds)


def b_form_simplified(t: MarkovTriple, rho, psi) -> float:
    """B as the two-sum over ordered triples (x, y, z) with y, z ~ x:

    1/2 sum (psi_x - psi_y)^2 d1(x,y) (rho_z - rho_x) Q(x,z) c(x,y)
      + sum (psi_y - psi_x)(psi_z - psi_x) rho^(x,y) Q(x,z) c(x,y)
    """
    rho, psi = _strict(t, rho), _potential(t, psi)
    k1, k2 = _pair_products(t)
    x, y, z = t.sources[k1], t.targets[k1], t.targets[k2]
    hat, d1, _ = _means(t, rho)
    weight = t.rates[k2] * t.conductances[k1]
    first = 0.5 * (psi[x] - psi[y]) ** 2 * d1[k1] * (rho[z] - rho[x])
    second = (psi[y] - psi[x]) * (psi[z] - psi[x]) * hat[k1]
    return float(np.sum((first + second) * weight))


def _offdiag_values(rho, psi, x, y, z, q_xz, c_xy) -> np.ndarray:
    """b(e, e') for e = {x, y}, e' = {x, z}, y != z."""
    hat = theta(rho[x], rho[y])
    d1 = theta_partials(rho[x], rho[y]).d1
    return (0.5 * (psi[x] - psi[y]) ** 2 * d1 * (rho[z] - rho[x])
            + (psi[y] - psi[x]) * (psi[z] - psi[x]) * hat) * q_xz * c_xy


def _diag_values(rho, psi, x, y, q_xy, q_yx, c_xy) -> np.ndarray:
    """b(e, e) for e = {x, y}."""
    hat = theta(rho[x], rho[y])
    d1, d2 = theta_partials(rho[x], rho[y])
    bracket = (2.0 * hat * (q_xy + q_yx)
               + d1 * (rho[y] - rho[x]) * q_xy
               + d2 * (rho[x] - rho[y]) * q_yx)
    return 0.5 * (psi[x] - psi[y]) ** 2 * bracket * c_xy


def edge_pair_values(t: MarkovTriple, rho, psi) -> EdgePairArrays:
    """All b(e, e') of the chain: ordered distinct adjacent pairs, then one diagonal row per edge."""
    rho, psi = _strict(t, rho), _potential(t, psi)
    k1, k2 = _pair_products(t)
    distinct = k1 != k2
    k1, k2 = k1[distinct], k2[distinct]
    x, y, z = t.sources[k1], t.targets[k1], t.targets[k2]
    off = _offdiag_values(rho, psi, x, y, z, t.rates[k2], t.conductances[k1])

    forward = t.sources < t.targets
    k = np.flatnonzero(forward)
    u, v = t.sources[k], t.targets[k]
    on = _diag_values(rho, psi, u, v, t.rates[k], t.rates[t.reverse[k]], t.conductances[k])

    return EdgePairArrays(
        pivot=np.concatenate([x, u]),
        first=np.concatenate([y, v]),
        second=np.concatenate([z, v]),
        values=np.concatenate([np.asarray(off, dtype=float), np.asarray(on, dtype=float)]),
    )


def b_edge_terms(t: MarkovTriple, rho, psi) -> List[EdgePairTerm]:
    """B split into EdgePairTerm objects; their values sum to b_form_direct."""
    arrays = edge_pair_values(t, rho, psi)
    terms = []
    for x, y, z, value in zip(arrays.pivot.tolist(), arrays.first.tolist(),
                              arrays.second.tolist(), arrays.values.tolist()):
        e = (min(x, y), max(x, y))
        if y == z:
            terms.append(EdgePairTerm(e, e, None, value))
        else:
            terms.append(EdgePairTerm(e, (min(x, z), max(x, z)), x, value))
    return terms


def form_values(t: MarkovTriple, rho, psi) -> FormValue:
    """A together with B and its on/off-diagonal parts."""
    arrays = edge_pair_values(t, rho, psi)
    diagonal = arrays.first == arrays.second
    b_on = float(np.sum(arrays.values[diagonal]))
    b_off = float(np.sum(arrays.values[~diagonal]))
    return FormValue(a=a_form(t, rho, psi), b_total=b_on + b_off, b_on=b_on, b_off=b_off)


def _lookup(t: MarkovTriple, x: int, y: int) -> int:
    return t.pair_lookup[(int(x), int(y))]


def a_subgraph(t: MarkovTriple, g: SubgraphPattern, rho, psi) -> float:
    """A restricted to the edges of a subgraph."""
    validate_pattern(t, g)
    rho, psi = _strict(t, rho), _potential(t, psi)
    total = 0.0
    for x, y in g.edges():
        total += (psi[y] - psi[x]) ** 2 * theta(rho[x], rho[y]) * t.conductances[_lookup(t, x, y)]
    return float(total)


def b_subgraph(t: MarkovTriple, g: SubgraphPattern, rho, psi, part: str = 'all') -> float:
    """B_G: the sum of b(e, e') over edges e, e' of the subgraph.

    Args:
        part: 'on' (diagonal terms), 'off' (distinct adjacent pairs) or 'all'

    Raises:
        InvalidSubgraphError: If g is not a cycle of the support graph
    """
    if part not in PARTS:
        raise DomainError(f"part must be one of {PARTS}, got {part!r}")
    validate_pattern(t, g)
    rho, psi = _strict(t, rho), _potential(t, psi)
    total = 0.0
    if part in ('on', 'all'):
        edges = np.array(g.edges(), dtype=int)
        x, y = edges[:, 0], edges[:, 1]
        k = np.array([_lookup(t, u, v) for u, v in edges])
        kr = np.array([_lookup(t, v, u) for u, v in edges])
        total += float(np.sum(_diag_values(rho, psi, x, y, t.rates[k], t.rates[kr], t.conductances[k])))
    if part in ('off', 'all'):
        pairs = np.array(g.pairs(), dtype=int)
        x, y, z = pairs[:, 0], pairs[:, 1], pairs[:, 2]
        q_xz = np.array([t.rates[_lookup(t, a, c)] for a, c in zip(x, z)])
        c_xy = np.array([t.conductances[_lookup(t, a, b)] for a, b in zip(x, y)])
        total += float(np.sum(_offdiag_values(rho, psi, x, y, z, q_xz, c_xy)))
    return total


def uniform_edge_rate(t: MarkovTriple) -> float:
    """The uniform rate q of a regular chain with uniform pi.

    Raises:
        UnsupportedModelError: For non-regular graphs, mixed rates or non-uniform pi
    """
    q = t.uniform_rate()
    if t.degree() is None or q is None or not t.has_uniform_pi():
        raise UnsupportedModelError(
            f"{t.name or 'chain'} is not a uniform-rate walk on a regular graph with uniform pi")
    return q


def alternating_sum(psi, square: SubgraphPattern) -> float:
    """|psi(x1) - psi(x2) + psi(x3) - psi(x4)| around a square."""
    psi = np.asarray(psi, dtype=float)
    a, b, c, d = square.vertices
    return float(abs(psi[a] - psi[b] + psi[c] - psi[d]))


def square_identity(t: MarkovTriple, square: SubgraphPattern, rho, psi) -> SquareIdentity:
    """Split B_off on a square into an alternating-sum part and a deficit part.

    With coefficient q^2 mu / 2 (mu the uniform weight, q the uniform rate):
        alternating = coef |AS|^2 sum_i theta(rho_i, rho_{i+1})
        deficit     = coef sum_i (psi_{i+1} - psi_i)^2 D(rho_i, rho_{i+1}; rho_{i-1}, rho_{i+2})
    Both parts are nonnegative and add up to b_subgraph(..., 'off').

    Raises:
        UnsupportedModelError: Outside uniform-rate walks on regular graphs with uniform pi
        InvalidSubgraphError: If square is not a square of the chain
    """
    q = uniform_edge_rate(t)
    if square.kind != 'square':
        raise DomainError(f"square_identity needs a square, got a {square.kind}")
    validate_pattern(t, square)
    rho, psi = _strict(t, rho), _potential(t, psi)
    coef = 0.5 * q * q * float(t.pi[0])

    cycle = np.array(square.vertices, dtype=int)
    here = rho[cycle]
    after, before, across = np.roll(here, -1), np.roll(here, 1), np.roll(here, -2)
    steps = np.roll(psi[cycle], -1) - psi[cycle]

    alternating = coef * alternating_sum(psi, square) ** 2 * float(np.sum(theta(here, after)))
    deficits = coef * float(np.sum(steps ** 2 * deficit(here, after, before, across)))
    total = b_subgraph(t, square, rho, psi, 'off')
    return SquareIdentity(alternating, deficits, total)


def quadratic_forms(t: MarkovTriple, rho) -> Tuple[np.ndarray, np.ndarray]:
    """Symmetric matrices M_A, M_B with A = psi^T M_A psi and B = psi^T M_B psi at fixed rho."""
    rho = _strict(t, rho)
    n, m = t.size, t.n_pairs
    hat, d1, _ = _means(t, rho)
    rows = np.arange(m)
    incidence = scipy.sparse.csr_matrix(
        (np.concatenate([np.ones(m), -np.ones(m)]),
         (np.concatenate([rows, rows]), np.concatenate([t.targets, t.sources]))),
        shape=(m, n))
    start = scipy.sparse.csr_matrix((np.ones(m), (rows, t.sources)), shape=(m, n))

    def weighted(w):
        return (incidence.T @ scipy.sparse.diags(w) @ incidence).toarray()

    m_a = weighted(0.5 * hat * t.conductances)
    l_rho = generator_apply(t, rho)
    flux = (start.T @ scipy.sparse.diags(hat * t.conductances) @ incidence).toarray()
    cross = t.dense_generator.T @ flux
    m_b = weighted(0.5 * d1 * l_rho[t.sources] * t.conductances) + 0.5 * (cross + cross.T)
    return 0.5 * (m_a + m_a.T), 0.5 * (m_b + m_b.T)
