"""Markov triples and their discrete calculus.
A MarkovTriple bundles a finite state set, off-diagonal rates Q and a
reversible probability vector pi. Vertex functions are numpy vectors indexed
like ``triple.states``; edge functions are vectors aligned with the ordered
support pairs ``(triple.sources[k], triple.targets[k])``.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.integrate import solve_ivp
from scipy.special import xlogy

from errors import (
    VIOLATION_ERRORS,
    DomainError,
    ReducibleChainError,
    TripleValidationError,
    Violation,
)

logger = logging.getLogger(__name__)

# dense linear algebra below this many states, sparse / adaptive above
DENSE_LIMIT = 1000

Potential = np.ndarray
EdgeFunction = np.ndarray
RateInput = Union[Mapping[Tuple[Hashable, Hashable], float], Iterable[Tuple[Hashable, Hashable, float]]]


@dataclass(frozen=True)
class BuildOptions:
    """Tolerances applied when a triple is validated."""
    balance_rtol: float = 1e-12
    normalization_tol: float = 1e-12


@dataclass(frozen=True, eq=False)
class MarkovTriple:
    """Validated reversible Markov chain (X, Q, pi).

    Use ``build_triple`` rather than the constructor.
    """
    states: Tuple[Hashable, ...]
    pi: np.ndarray
    sources: np.ndarray
    targets: np.ndarray
    rates: np.ndarray
    index: Dict[Hashable, int] = field(repr=False)
    name: str = ""

    @property
    def size(self) -> int:
        return len(self.states)

    @property
    def n_pairs(self) -> int:
        return len(self.sources)

    @cached_property
    def conductances(self) -> np.ndarray:
        """c(x, y) = Q(x, y) pi(x) on every ordered support pair."""
        return self.rates * self.pi[self.sources]

    @cached_property
    def pair_lookup(self) -> Dict[Tuple[int, int], int]:
        return {(int(x), int(y)): k for k, (x, y) in enumerate(zip(self.sources, self.targets))}

    @cached_property
    def reverse(self) -> np.ndarray:
        """Position of (y, x) for the pair (x, y) stored at each position."""
        lookup = self.pair_lookup
        return np.array([lookup[(int(y), int(x))] for x, y in zip(self.sources, self.targets)], dtype=int)

    @cached_property
    def indptr(self) -> np.ndarray:
        """CSR row pointer: pairs leaving x occupy indptr[x]:indptr[x+1]."""
        counts = np.bincount(self.sources, minlength=self.size)
        return np.concatenate([[0], np.cumsum(counts)])

    def rate(self, x: int, y: int) -> float:
        """Q(x, y) for state indices x, y (0 outside the support)."""
        k = self.pair_lookup.get((x, y))
        return 0.0 if k is None else float(self.rates[k])

    def neighbours(self, x: int) -> np.ndarray:
        return self.targets[self.indptr[x]:self.indptr[x + 1]]

    @cached_property
    def generator(self) -> scipy.sparse.csr_matrix:
        """Sparse generator L with L[x, y] = Q(x, y) and rows summing to zero."""
        n = self.size
        off = scipy.sparse.csr_matrix((self.rates, (self.sources, self.targets)), shape=(n, n))
        exit_rates = np.bincount(self.sources, weights=self.rates, minlength=n)
        return (off - scipy.sparse.diags(exit_rates)).tocsr()

    @cached_property
    def dense_generator(self) -> np.ndarray:
        return self.generator.toarray()

    @cached_property
    def graph(self) -> nx.Graph:
        """Undirected support graph on the state indices."""
        g = nx.Graph()
        g.add_nodes_from(range(self.size))
        g.add_edges_from(self.edges.tolist())
        return g

    @cached_property
    def edges(self) -> np.ndarray:
        """Unordered edges as an (m, 2) array with x < y."""
        mask = self.sources < self.targets
        return np.stack([self.sources[mask], self.targets[mask]], axis=1)

    def degree(self) -> Optional[int]:
        """Common vertex degree, or None when the support graph is not regular."""
        counts = np.diff(self.indptr)
        if self.size == 0 or not np.all(counts == counts[0]):
            return None
        return int(counts[0])

    def uniform_rate(self, rtol: float = 1e-12) -> Optional[float]:
        """The common value of Q on the support, or None if rates differ."""
        if self.n_pairs == 0:
            return None
        q = float(self.rates[0])
        return q if np.allclose(self.rates, q, rtol=rtol, atol=0.0) else None

    def has_uniform_pi(self, rtol: float = 1e-12) -> bool:
        return bool(np.allclose(self.pi, 1.0 / self.size, rtol=rtol, atol=0.0))

    def label(self, x: int) -> str:
        return state_label(self.states[x])


def state_label(state: Hashable) -> str:
    """Whitespace-free text for a state: (1, 3) -> '1-3', ((1, 2), 4) -> '(1-2,4)'."""
    if not isinstance(state, tuple):
        return str(state).replace(" ", "_")
    if not state:
        return "()"
    if any(isinstance(s, tuple) for s in state):
        return "(" + ",".join(state_label(s) for s in state) + ")"
    return "-".join(state_label(s) for s in state)


@dataclass(frozen=True, eq=False)
class Density:
    """Probability density with respect to pi (sum pi * values == 1)."""
    values: np.ndarray

    @property
    def strict(self) -> bool:
        return bool(np.all(self.values > 0))


def _collect_rates(rates: RateInput, violations: List[Violation]) -> Dict[Tuple[Hashable, Hashable], float]:
    if isinstance(rates, Mapping):
        return {tuple(k): v for k, v in rates.items()}
    collected: Dict[Tuple[Hashable, Hashable], float] = {}
    for x, y, q in rates:
        if (x, y) in collected:
            violations.append(Violation('malformed', f"duplicate rate entry for ({x!r}, {y!r})"))
        collected[(x, y)] = q
    return collected


def build_triple(states: Sequence[Hashable], rates: RateInput,
                 weights: Union[Mapping[Hashable, float], Sequence[float]],
                 options: Optional[BuildOptions] = None, name: str = "") -> MarkovTriple:
    """Validate (states, rates, weights) and build a MarkovTriple.

    Args:
        states: Distinct hashable state labels
        rates: Mapping (x, y) -> Q(x, y), or iterable of (x, y, Q) triples; zeros are ignored
        weights: Mapping x -> pi(x), or a sequence aligned with states
        options: Validation tolerances
        name: Optional display name

    Returns:
        Validated MarkovTriple

    Raises:
        TripleValidationError: The most specific subclass when all violations share a kind
    """
    options = options or BuildOptions()
    violations: List[Violation] = []
    states = tuple(states)
    index = {s: i for i, s in enumerate(states)}
    if len(index) != len(states):
        violations.append(Violation('malformed', "state labels are not distinct"))
    if not states:
        violations.append(Violation('malformed', "empty state set"))

    if isinstance(weights, Mapping):
        missing = [s for s in states if s not in weights]
        unknown = [s for s in weights if s not in index]
        if missing:
            violations.append(Violation('malformed', f"no weight for states {missing[:5]}"))
        if unknown:
            violations.append(Violation('malformed', f"weights given for unknown states {unknown[:5]}"))
        pi = np.array([float(weights.get(s, 0.0)) for s in states], dtype=float)
    else:
        pi = np.asarray(list(weights), dtype=float)
        if pi.shape != (len(states),):
            violations.append(Violation('malformed', f"expected {len(states)} weights, got {pi.size}"))
            pi = np.resize(pi, len(states))
    if np.any(~np.isfinite(pi)) or np.any(pi <= 0):
        violations.append(Violation('malformed', "weights must be finite and strictly positive"))

    entries = []
    for (x, y), q in _collect_rates(rates, violations).items():
        if x not in index or y not in index:
            violations.append(Violation('malformed', f"rate ({x!r}, {y!r}) refers to an unknown state"))
            continue
        q = float(q)
        if not math.isfinite(q) or q < 0:
            violations.append(Violation('malformed', f"rate Q({x!r}, {y!r}) = {q} is not a finite nonnegative number"))
            continue
        if x == y:
            if q != 0:
                violations.append(Violation('malformed', f"self-loop rate Q({x!r}, {x!r}) = {q}"))
            continue
        if q > 0:
            entries.append((index[x], index[y], q))

    if violations:
        _raise(violations)

    total = float(pi.sum())
    if abs(total - 1.0) > options.normalization_tol:
        violations.append(Violation('normalization', f"sum of weights is {total!r}, expected 1"))

    entries.sort()
    rate_of = {(i, j): q for i, j, q in entries}
    for (i, j), q in rate_of.items():
        flow = pi[i] * q
        back = pi[j] * rate_of.get((j, i), 0.0)
        if abs(flow - back) > options.balance_rtol * max(flow, back):
            violations.append(Violation(
                'detailed_balance',
                f"pi({states[i]!r})Q({states[i]!r},{states[j]!r}) = {flow!r} "
                f"!= pi({states[j]!r})Q({states[j]!r},{states[i]!r}) = {back!r}"))

    support = nx.Graph()
    support.add_nodes_from(range(len(states)))
    support.add_edges_from((i, j) for i, j, _ in entries)
    if not nx.is_connected(support):
        parts = nx.number_connected_components(support)
        violations.append(Violation('reducible', f"support graph has {parts} connected components"))

    if violations:
        _raise(violations)

    sources = np.array([e[0] for e in entries], dtype=int)
    targets = np.array([e[1] for e in entries], dtype=int)
    values = np.array([e[2] for e in entries], dtype=float)
    for arr in (pi, sources, targets, values):
        arr.setflags(write=False)
    triple = MarkovTriple(states=states, pi=pi, sources=sources, targets=targets,
                          rates=values, index=index, name=name)
    logger.debug("Built triple %s: %s states, %s ordered pairs", name or "<anonymous>", len(states), len(entries))
    return triple


def _raise(violations: List[Violation]):
    kinds = {v.kind for v in violations}
    if len(kinds) == 1:
        raise VIOLATION_ERRORS[kinds.pop()](violations)
    raise TripleValidationError(violations)


# ========== VERTEX AND EDGE CALCULUS ==========

def _vertex(t: MarkovTriple, f, name: str = "f") -> np.ndarray:
    arr = np.asarray(f.values if isinstance(f, Density) else f, dtype=float)
    if arr.shape != (t.size,):
        raise DomainError(f"{name} must have {t.size} entries, got shape {arr.shape}")
    return arr


def _edge(t: MarkovTriple, psi) -> np.ndarray:
    arr = np.asarray(psi, dtype=float)
    if arr.shape == (t.n_pairs,):
        return arr
    if arr.shape == (t.size, t.size):
        on_support = np.zeros((t.size, t.size), dtype=bool)
        on_support[t.sources, t.targets] = True
        if np.any(arr[~on_support] != 0):
            raise DomainError("edge function has nonzero values outside the support of Q")
        return arr[t.sources, t.targets]
    raise DomainError(f"edge function must have {t.n_pairs} entries or shape {(t.size, t.size)}, got {arr.shape}")


def generator_apply(t: MarkovTriple, f: Potential) -> Potential:
    """Lf(x) = sum_y Q(x, y) (f(y) - f(x))."""
    f = _vertex(t, f)
    return np.bincount(t.sources, weights=t.rates * (f[t.targets] - f[t.sources]), minlength=t.size)


def gradient(t: MarkovTriple, f: Potential) -> EdgeFunction:
    """Discrete gradient f(y) - f(x) on the ordered support pairs."""
    f = _vertex(t, f)
    return f[t.targets] - f[t.sources]


def divergence(t: MarkovTriple, psi: EdgeFunction) -> Potential:
    """(div Psi)(x) = 1/2 sum_y (Psi(x, y) - Psi(y, x)) Q(x, y).

    Args:
        t: Markov triple
        psi: Edge function aligned with the support pairs, or a dense |X| x |X| matrix

    Raises:
        DomainError: If a dense Psi is nonzero off the support
    """
    psi = _edge(t, psi)
    flux = 0.5 * (psi - psi[t.reverse]) * t.rates
    return np.bincount(t.sources, weights=flux, minlength=t.size)


def vertex_inner(t: MarkovTriple, f: Potential, g: Potential) -> float:
    """<f, g>_pi = sum_x f(x) g(x) pi(x)."""
    return float(np.dot(_vertex(t, f) * _vertex(t, g, "g"), t.pi))


def edge_inner(t: MarkovTriple, phi: EdgeFunction, psi: EdgeFunction) -> float:
    """<Phi, Psi>_pi = 1/2 sum_{x,y} Phi(x,y) Psi(x,y) Q(x,y) pi(x)."""
    return float(0.5 * np.dot(_edge(t, phi) * _edge(t, psi), t.conductances))


def inner_products(t: MarkovTriple, first, second, kind: str = "vertex") -> float:
    """Vertex (kind="vertex") or edge (kind="edge") inner product."""
    if kind == "vertex":
        return vertex_inner(t, first, second)
    if kind == "edge":
        return edge_inner(t, first, second)
    raise DomainError(f"unknown inner product kind {kind!r}")


def dirichlet(t: MarkovTriple, f: Potential, g: Potential) -> float:
    """Dirichlet form E(f, g) = <grad f, grad g>_pi = -<f, Lg>_pi."""
    return edge_inner(t, gradient(t, f), gradient(t, g))


# ========== DENSITIES ==========

def as_density(t: MarkovTriple, values, strict: bool = False, tol: float = 1e-12) -> Density:
    """Check that values form a probability density with respect to pi.

    Raises:
        DomainError: On negative entries, wrong normalisation or (strict) zeros
    """
    arr = _vertex(t, values, "rho").copy()
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError("density must be finite and nonnegative")
    mass = float(np.dot(arr, t.pi))
    if abs(mass - 1.0) > tol:
        raise DomainError(f"density has pi-mass {mass!r}, expected 1")
    if strict and np.any(arr <= 0):
        raise DomainError("density must be strictly positive")
    arr.setflags(write=False)
    return Density(arr)


def stationary_density(t: MarkovTriple) -> Density:
    return as_density(t, np.ones(t.size))


def random_density(t: MarkovTriple, rng: np.random.Generator, spread: float = 1.0) -> Density:
    """Strictly positive density with log-normal shape."""
    raw = np.exp(spread * rng.standard_normal(t.size))
    return as_density(t, raw / np.dot(raw, t.pi), strict=True)


def entropy(t: MarkovTriple, rho) -> float:
    """Relative entropy H(rho) = sum_x pi(x) rho(x) log rho(x); zeros contribute 0."""
    values = rho.values if isinstance(rho, Density) else as_density(t, rho).values
    return float(np.dot(t.pi, xlogy(values, values)))


def propagate(t: MarkovTriple, f: Potential, time: float) -> Potential:
    """e^{time L} f for an arbitrary vertex function."""
    if time < 0 or not math.isfinite(time):
        raise DomainError(f"time must be finite and nonnegative, got {time}")
    f = _vertex(t, f)
    if time == 0:
        return f.copy()
    if t.size <= DENSE_LIMIT:
        return scipy.linalg.expm(time * t.dense_generator) @ f
    logger.info("Heat flow on %s states via adaptive integration", t.size)
    generator = t.generator
    sol = solve_ivp(lambda _, y: generator @ y, (0.0, time), f,
                    method="DOP853", rtol=1e-10, atol=1e-12)
    if not sol.success:
        raise DomainError(f"heat flow integration failed: {sol.message}")
    return sol.y[:, -1]


def heat_semigroup(t: MarkovTriple, rho0, time: float) -> Density:
    """Evolve a density under the heat flow: e^{time L} rho0.

    Args:
        t: Markov triple
        rho0: Initial density
        time: Nonnegative time

    Returns:
        Density at the given time
    """
    start = rho0.values if isinstance(rho0, Density) else as_density(t, rho0).values
    if time == 0:
        return Density(start)
    values = np.maximum(propagate(t, start, time), 0.0)
    values = values / np.dot(values, t.pi)
    values.setflags(write=False)
    return Density(values)


# ========== SPECTRUM ==========

def symmetrized_generator(t: MarkovTriple, sparse: bool = False):
    """pi^{1/2} L pi^{-1/2}; symmetric by detailed balance."""
    root = np.sqrt(t.pi)
    values = t.rates * root[t.sources] / root[t.targets]
    n = t.size
    off = scipy.sparse.csr_matrix((values, (t.sources, t.targets)), shape=(n, n))
    exit_rates = np.bincount(t.sources, weights=t.rates, minlength=n)
    sym = (off - scipy.sparse.diags(exit_rates)).tocsr()
    if sparse:
        return sym
    dense = sym.toarray()
    return 0.5 * (dense + dense.T)


def spectral_gap(t: MarkovTriple) -> float:
    """Smallest nonzero eigenvalue of -L in L^2(pi).

    Raises:
        ReducibleChainError: If the support graph is disconnected
        DomainError: For a one-state chain, which has no nonzero eigenvalue
    """
    if not nx.is_connected(t.graph):
        raise ReducibleChainError([Violation('reducible', "support graph is disconnected")])
    if t.size < 2:
        raise DomainError("a one-state chain has no spectral gap")
    if t.size <= DENSE_LIMIT:
        eigenvalues = scipy.linalg.eigh(-symmetrized_generator(t), eigvals_only=True, subset_by_index=[0, 1])
        return float(eigenvalues[1])
    top = scipy.sparse.linalg.eigsh(symmetrized_generator(t, sparse=True), k=2, which="LA",
                                    return_eigenvectors=False)
    return float(-np.min(top))


def describe(t: MarkovTriple) -> Dict[str, Any]:
    """Size summary used in reports."""
    degree = t.degree()
    return {
        'states': t.size,
        'edges': int(len(t.edges)),
        'degree': degree,
        'uniform_rate': t.uniform_rate(),
        'uniform_pi': t.has_uniform_pi(),
    }
