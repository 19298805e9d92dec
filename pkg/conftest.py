"""Shared fixtures: small reference chains and a seeded generator."""
import numpy as np
import pytest

from markov import build_triple
from models.basic_chains import complete_graph, cycle_graph, two_point
from models.bernoulli_laplace import bernoulli_laplace
from models.random_transposition import random_transposition


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def k3():
    return complete_graph(3)


@pytest.fixture
def k4():
    return complete_graph(4)


@pytest.fixture
def c4():
    return cycle_graph(4)


@pytest.fixture
def bl42():
    return bernoulli_laplace(4, 2).triple


@pytest.fixture
def rt3():
    return random_transposition(3).triple


@pytest.fixture
def lazy_pair():
    """Two-point chain with pi = (0.3, 0.7)."""
    return two_point(0.3, 1.0)


@pytest.fixture
def path3():
    """Birth-death chain on a path with non-uniform pi and mixed rates."""
    pi = {'a': 0.2, 'b': 0.5, 'c': 0.3}
    rates = {('a', 'b'): 1.0, ('b', 'a'): 0.4, ('b', 'c'): 0.9, ('c', 'b'): 1.5}
    return build_triple(['a', 'b', 'c'], rates, pi, name="path3")


@pytest.fixture
def chains(k3, c4, bl42, lazy_pair, path3):
    return [k3, c4, bl42, lazy_pair, path3]
