import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvature import (
    a_edge_sum,
    a_form,
    a_subgraph,
    alternating_sum,
    b_edge_terms,
    b_form_direct,
    b_form_simplified,
    b_subgraph,
    edge_pair_values,
    form_values,
    quadratic_forms,
    square_identity,
    uniform_edge_rate,
)
from errors import DomainError, InvalidSubgraphError, UnsupportedModelError
from markov import dirichlet, generator_apply, random_density, vertex_inner
from models.basic_chains import complete_graph, two_point
from models.bernoulli_laplace import bernoulli_laplace
from models.random_transposition import random_transposition
from models.subgraphs import SubgraphPattern, enumerate_squares, enumerate_triangles


def _inputs(t, rng, count=5):
    return [(random_density(t, rng).values, rng.standard_normal(t.size)) for _ in range(count)]


def _scale(t, rho, psi):
    return max(float(np.sum(np.abs(edge_pair_values(t, rho, psi).values))), 1e-300)


def test_forms_at_stationary_density(chains, rng):
    for t in chains:
        psi = rng.standard_normal(t.size)
        ones = np.ones(t.size)
        lpsi = generator_apply(t, psi)
        assert a_form(t, ones, psi) == pytest.approx(dirichlet(t, psi, psi), rel=1e-12)
        assert b_form_direct(t, ones, psi) == pytest.approx(vertex_inner(t, lpsi, lpsi), rel=1e-10)


def test_two_point_values():
    t = two_point(0.5, 1.0)
    psi = [1.0, 0.0]
    assert a_form(t, [1.0, 1.0], psi) == pytest.approx(0.5)
    assert b_form_direct(t, [1.0, 1.0], psi) == pytest.approx(1.0)


def test_three_forms_of_b_agree(chains, rng):
    for t in chains:
        for rho, psi in _inputs(t, rng):
            direct = b_form_direct(t, rho, psi)
            scale = _scale(t, rho, psi)
            assert abs(b_form_simplified(t, rho, psi) - direct) <= 1e-10 * scale
            assert abs(float(np.sum(edge_pair_values(t, rho, psi).values)) - direct) <= 1e-10 * scale
            assert abs(sum(term.value for term in b_edge_terms(t, rho, psi)) - direct) <= 1e-10 * scale


def test_a_edge_sum_agrees(chains, rng):
    for t in chains:
        for rho, psi in _inputs(t, rng):
            assert a_edge_sum(t, rho, psi) == pytest.approx(a_form(t, rho, psi), rel=1e-12)


def test_edge_terms_layout(k3, rng):
    rho, psi = _inputs(k3, rng, 1)[0]
    terms = b_edge_terms(k3, rho, psi)
    diagonal = [term for term in terms if term.diagonal]
    assert len(terms) == 9
    assert len(diagonal) == 3
    assert all(term.pivot is None for term in diagonal)
    assert all(term.first_edge[0] < term.first_edge[1] for term in terms)


def test_form_values_split(bl42, rng):
    for rho, psi in _inputs(bl42, rng):
        values = form_values(bl42, rho, psi)
        assert values.b_on + values.b_off == pytest.approx(values.b_total)
        assert values.b_total == pytest.approx(b_form_direct(bl42, rho, psi), rel=1e-9, abs=1e-12)
        assert values.a == pytest.approx(a_form(bl42, rho, psi))
        assert values.b_on >= 0


@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
@settings(max_examples=25, deadline=None)
def test_homogeneity(seed):
    t = two_point(0.3, 1.7)
    rng = np.random.default_rng(seed)
    rho = random_density(t, rng).values
    psi = rng.standard_normal(t.size)
    a, b = a_form(t, rho, psi), b_form_direct(t, rho, psi)
    scale = _scale(t, rho, psi)
    assert a_form(t, 2 * rho, psi) == pytest.approx(2 * a, rel=1e-12)
    assert abs(b_form_direct(t, 2 * rho, psi) - 2 * b) <= 1e-10 * scale
    assert abs(b_form_direct(t, rho, 3 * psi) - 9 * b) <= 1e-10 * scale
    assert abs(b_form_direct(t, rho, psi + 5.0) - b) <= 1e-10 * scale


def test_rho_must_be_strictly_positive(k3):
    with pytest.raises(DomainError):
        a_form(k3, [1.5, 1.5, 0.0], [1.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        b_form_direct(k3, [1.0, 1.0], [1.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        b_form_simplified(k3, [1.0, 1.0, 1.0], [1.0, 0.0])


def test_quadratic_forms_reproduce_a_and_b(chains, rng):
    for t in chains:
        for rho, psi in _inputs(t, rng, 3):
            m_a, m_b = quadratic_forms(t, rho)
            np.testing.assert_allclose(m_a, m_a.T)
            np.testing.assert_allclose(m_b, m_b.T)
            np.testing.assert_allclose(m_a @ np.ones(t.size), 0.0, atol=1e-12)
            assert psi @ m_a @ psi == pytest.approx(a_form(t, rho, psi), rel=1e-10)
            assert abs(psi @ m_b @ psi - b_form_direct(t, rho, psi)) <= 1e-10 * _scale(t, rho, psi)


# ========== SUBGRAPHS ==========

def test_triangle_of_k3_carries_every_term(k3, rng):
    (triangle,) = enumerate_triangles(k3)
    for rho, psi in _inputs(k3, rng):
        assert a_subgraph(k3, triangle, rho, psi) == pytest.approx(a_form(k3, rho, psi), rel=1e-12)
        assert abs(b_subgraph(k3, triangle, rho, psi) - b_form_direct(k3, rho, psi)) <= 1e-10 * _scale(k3, rho, psi)


def test_square_of_c4_carries_every_term(c4, rng):
    (square,) = enumerate_squares(c4)
    for rho, psi in _inputs(c4, rng):
        values = form_values(c4, rho, psi)
        assert b_subgraph(c4, square, rho, psi, 'on') == pytest.approx(values.b_on, rel=1e-10)
        assert b_subgraph(c4, square, rho, psi, 'off') == pytest.approx(values.b_off, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("fixture", ["k4", "bl42"])
def test_on_diagonal_and_triangle_bounds(fixture, request, rng):
    t = request.getfixturevalue(fixture)
    q = uniform_edge_rate(t)
    for triangle in enumerate_triangles(t):
        for rho, psi in _inputs(t, rng, 3):
            a = a_subgraph(t, triangle, rho, psi)
            assert b_subgraph(t, triangle, rho, psi, 'on') >= 2 * q * a * (1 - 1e-10)
            assert b_subgraph(t, triangle, rho, psi, 'off') >= 0.5 * q * a - 1e-10 * a


@pytest.mark.parametrize("fixture", ["c4", "rt3", "bl42"])
def test_square_identity(fixture, request, rng):
    t = request.getfixturevalue(fixture)
    for square in enumerate_squares(t)[:6]:
        for rho, psi in _inputs(t, rng, 3):
            split = square_identity(t, square, rho, psi)
            size = split.alternating + split.deficit
            assert split.alternating >= 0
            assert split.deficit >= -1e-12 * size
            assert split.total == pytest.approx(size, rel=1e-10)


def test_square_identity_vanishing_alternating_sum(c4):
    (square,) = enumerate_squares(c4)
    psi = np.zeros(4)
    psi[list(square.vertices)] = [0.0, 1.0, 1.0, 0.0]
    assert alternating_sum(psi, square) == 0.0
    split = square_identity(c4, square, [0.5, 1.0, 1.5, 1.0], psi)
    assert split.alternating == 0.0
    assert split.total == pytest.approx(split.deficit, rel=1e-10)


def test_square_identity_rejects_triangles_and_general_chains(k4, path3):
    with pytest.raises(DomainError):
        square_identity(k4, enumerate_triangles(k4)[0], np.ones(4), np.zeros(4))
    with pytest.raises(UnsupportedModelError):
        square_identity(path3, SubgraphPattern('square', (0, 1, 2, 1)), np.ones(3), np.zeros(3))


def test_subgraph_validation(c4):
    with pytest.raises(InvalidSubgraphError):
        a_subgraph(c4, SubgraphPattern('triangle', (0, 1, 2)), np.ones(4), np.zeros(4))
    with pytest.raises(InvalidSubgraphError):
        b_subgraph(c4, SubgraphPattern('square', (0, 2, 1, 3)), np.ones(4), np.zeros(4))
    with pytest.raises(DomainError):
        b_subgraph(c4, enumerate_squares(c4)[0], np.ones(4), np.zeros(4), part='both')


def test_uniform_edge_rate(c4, bl42, path3, lazy_pair):
    assert uniform_edge_rate(c4) == 0.5
    assert uniform_edge_rate(bl42) == pytest.approx(0.25)
    for t in (path3, lazy_pair):
        with pytest.raises(UnsupportedModelError):
            uniform_edge_rate(t)


# ========== BULK SAMPLES ==========

SAMPLED_MODELS = {
    'complete(5)': lambda: complete_graph(5),
    'bl(4,2)': lambda: bernoulli_laplace(4, 2).triple,
    'bl(5,2)': lambda: bernoulli_laplace(5, 2).triple,
    'bl(6,3)': lambda: bernoulli_laplace(6, 3).triple,
    'rt(3)': lambda: random_transposition(3).triple,
    'rt(4)': lambda: random_transposition(4).triple,
}


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(SAMPLED_MODELS))
def test_identities_and_subgraph_bounds_on_samples(name, rng):
    t = SAMPLED_MODELS[name]()
    q = uniform_edge_rate(t)
    triangles, squares = enumerate_triangles(t), enumerate_squares(t)
    for rho, psi in _inputs(t, rng, 1000):
        direct = b_form_direct(t, rho, psi)
        scale = _scale(t, rho, psi)
        assert abs(b_form_simplified(t, rho, psi) - direct) <= 1e-10 * scale
        assert abs(float(np.sum(edge_pair_values(t, rho, psi).values)) - direct) <= 1e-10 * scale
        assert a_edge_sum(t, rho, psi) == pytest.approx(a_form(t, rho, psi), rel=1e-12)

        if triangles:
            triangle = triangles[rng.integers(len(triangles))]
            a = a_subgraph(t, triangle, rho, psi)
            assert b_subgraph(t, triangle, rho, psi, 'on') >= 2 * q * a * (1 - 1e-10)
            assert b_subgraph(t, triangle, rho, psi, 'off') >= 0.5 * q * a - 1e-10 * a
        if squares:
            square = squares[rng.integers(len(squares))]
            a = a_subgraph(t, square, rho, psi)
            assert b_subgraph(t, square, rho, psi, 'on') >= 2 * q * a * (1 - 1e-10)
            split = square_identity(t, square, rho, psi)
            size = split.alternating + split.deficit
            assert split.alternating >= 0
            assert split.deficit >= -1e-12 * size
            assert split.total == pytest.approx(size, rel=1e-10)
