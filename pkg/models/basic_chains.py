"""Small reference chains: complete graphs, cycles, two-point spaces and products."""
import logging
from typing import Callable, Hashable, Mapping, Optional, Sequence, Union

from errors import ModelParameterError
from markov import MarkovTriple, build_triple

logger = logging.getLogger(__name__)


def _at_least(name: str, value, minimum: int):
    if not isinstance(value, int) or value < minimum:
        raise ModelParameterError(f"{name} needs an integer >= {minimum}, got {value!r}")


def complete_graph(n: int) -> MarkovTriple:
    """Simple random walk on K_n: states 1..n, rates 1/(n-1), uniform pi.

    Raises:
        ModelParameterError: If n < 2
    """
    _at_least("complete(n)", n, 2)
    states = list(range(1, n + 1))
    rate = 1.0 / (n - 1)
    rates = {(x, y): rate for x in states for y in states if x != y}
    return build_triple(states, rates, [1.0 / n] * n, name=f"complete({n})")


def cycle_graph(n: int) -> MarkovTriple:
    """Simple random walk on the n-cycle: states 1..n, rates 1/2."""
    _at_least("cycle(n)", n, 3)
    states = list(range(1, n + 1))
    rates = {}
    for i, x in enumerate(states):
        y = states[(i + 1) % n]
        rates[(x, y)] = 0.5
        rates[(y, x)] = 0.5
    return build_triple(states, rates, [1.0 / n] * n, name=f"cycle({n})")


def two_point(p: float = 0.5, rate: float = 1.0) -> MarkovTriple:
    """Two states 1, 2 with pi = (p, 1-p), Q(1,2) = rate and Q(2,1) = rate p/(1-p)."""
    if not 0.0 < p < 1.0:
        raise ModelParameterError(f"two_point needs 0 < p < 1, got {p!r}")
    if not rate > 0:
        raise ModelParameterError(f"two_point needs a positive rate, got {rate!r}")
    rates = {(1, 2): rate, (2, 1): rate * p / (1.0 - p)}
    return build_triple([1, 2], rates, [p, 1.0 - p], name=f"two_point({p},{rate})")


def single_state() -> MarkovTriple:
    """The one-point chain; the neutral factor of product_chain."""
    return build_triple(["*"], {}, [1.0], name="point")


def product_chain(t1: MarkovTriple, t2: MarkovTriple) -> MarkovTriple:
    """Product chain on X1 x X2: one coordinate moves at a time with its factor rate.

    The generator is the unweighted sum L1 (x) I + I (x) L2 and pi = pi1 (x) pi2.
    """
    states = [(a, b) for a in t1.states for b in t2.states]
    rates = {}
    for k in range(t1.n_pairs):
        a, c = t1.states[t1.sources[k]], t1.states[t1.targets[k]]
        for b in t2.states:
            rates[((a, b), (c, b))] = float(t1.rates[k])
    for k in range(t2.n_pairs):
        b, d = t2.states[t2.sources[k]], t2.states[t2.targets[k]]
        for a in t1.states:
            rates[((a, b), (a, d))] = float(t2.rates[k])
    weights = [float(p1 * p2) for p1 in t1.pi for p2 in t2.pi]
    # products of normalised weights drift from 1 by a few ulps
    total = sum(weights)
    weights = [w / total for w in weights]
    name = f"product({t1.name},{t2.name})"
    logger.debug("Building %s with %s states", name, len(states))
    return build_triple(states, rates, weights, name=name)


def relabel(t: MarkovTriple, mapping: Union[Mapping[Hashable, Hashable], Callable[[Hashable], Hashable]],
            order: Optional[Sequence[int]] = None) -> MarkovTriple:
    """Same chain with renamed states, optionally listed in a different order.

    Args:
        t: Markov triple
        mapping: Dict or function from old to new labels (must be injective)
        order: Optional permutation of state indices giving the new listing order
    """
    rename = mapping if callable(mapping) else mapping.__getitem__
    order = list(range(t.size)) if order is None else list(order)
    if sorted(order) != list(range(t.size)):
        raise ModelParameterError("order must be a permutation of the state indices")
    states = [rename(t.states[i]) for i in order]
    rates = {(rename(t.states[x]), rename(t.states[y])): float(q)
             for x, y, q in zip(t.sources, t.targets, t.rates)}
    weights = {rename(t.states[i]): float(t.pi[i]) for i in order}
    return build_triple(states, rates, weights, name=t.name)


def get_model_declarations():
    """Model-spec declarations for the basic chains."""
    return [
        {
            "type": "model",
            "model": {
                "name": "complete",
                "constructor": "complete_graph",
                "description": "Simple random walk on the complete graph K_n.",
                "parameters": {
                    "type": "object",
                    "properties": {
                        "n": {"type": "integer", "description": "Number of vertices (n >= 2)"},
                    },
                    "required": ["n"],
                },
            },
        },
        {
            "type": "model",
            "model": {
                "name": "cycle",
                "constructor": "cycle_graph",
                "description": "Simple random walk on the n-cycle.",
                "parameters": {
                    "type": "object",
                    "properties": {
                        "n": {"type": "integer", "description": "Number of vertices (n >= 3)"},
                    },
                    "required": ["n"],
                },
            },
        },
        {
            "type": "model",
            "model": {
                "name": "product",
                "constructor": "product_chain",
                "description": "Product chain; each coordinate moves with its own rates.",
                "parameters": {
                    "type": "object",
                    "properties": {
                        "t1": {"type": "model", "description": "First factor"},
                        "t2": {"type": "model", "description": "Second factor"},
                    },
                    "required": ["t1", "t2"],
                },
            },
        },
    ]
