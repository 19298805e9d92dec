import math

import numpy as np
import pytest
from scipy.integrate import quad

from errors import DomainError, PathRejectedError
from estimator import certify_bl
from logmean import theta
from markov import random_density
from models.basic_chains import complete_graph, two_point
from models.bernoulli_laplace import bernoulli_laplace
from transport import (
    DiscretePath,
    TransportOptions,
    action,
    continuity_residual,
    convexity_check,
    distance_upper,
)

START = np.array([1.2, 0.8])
END = np.array([0.8, 1.2])


def two_state_distance(rate: float = 1.0) -> float:
    """Exact W between START and END on the symmetric two-point chain."""
    value, _ = quad(lambda s: 1.0 / math.sqrt(2.0 * theta(1.0 + s, 1.0 - s)), -0.2, 0.2, epsabs=1e-13)
    return value / math.sqrt(rate)


def test_two_point_distance_close_to_exact():
    t = two_point(0.5, 1.0)
    result = distance_upper(t, START, END, TransportOptions(grid=64))
    assert result.w_upper == pytest.approx(two_state_distance(), rel=1e-3)
    assert result.residual <= 1e-8
    assert result.path.steps == 64


def test_doubling_rates_halves_squared_distance():
    options = TransportOptions(grid=16)
    slow = distance_upper(two_point(0.5, 1.0), START, END, options)
    fast = distance_upper(two_point(0.5, 2.0), START, END, options)
    assert fast.w_upper ** 2 == pytest.approx(0.5 * slow.w_upper ** 2, rel=1e-4)


def test_refinement_never_increases_the_bound():
    t = two_point(0.5, 1.0)
    result = distance_upper(t, START, END, TransportOptions(grid=8, refine_to=32))
    grids = [level['grid'] for level in result.history]
    assert grids == [8, 16, 32]
    best = [level['best_action'] for level in result.history]
    assert all(later <= earlier for earlier, later in zip(best, best[1:]))
    assert result.w_upper == pytest.approx(math.sqrt(best[-1]))
    coarse = distance_upper(t, START, END, TransportOptions(grid=8))
    assert result.w_upper <= coarse.w_upper + 1e-12


def test_midpoint_residual_shrinks_under_refinement():
    t = two_point(0.5, 1.0)
    coarse = distance_upper(t, START, END, TransportOptions(grid=4))
    fine = distance_upper(t, START, END, TransportOptions(grid=32))
    assert fine.midpoint_residual < coarse.midpoint_residual


def test_action_of_result_path(k3, rng):
    rho0, rho1 = random_density(k3, rng, spread=0.5), random_density(k3, rng, spread=0.5)
    result = distance_upper(k3, rho0, rho1, TransportOptions(grid=12))
    assert action(k3, result.path) == pytest.approx(result.w_upper ** 2, rel=1e-9)
    np.testing.assert_allclose(result.path.densities[0], rho0.values, rtol=1e-12)
    np.testing.assert_allclose(result.path.densities[-1], rho1.values, rtol=1e-12)


def test_reversed_path_has_same_action(k3, rng):
    rho0, rho1 = random_density(k3, rng), random_density(k3, rng)
    path = distance_upper(k3, rho0, rho1, TransportOptions(grid=8)).path
    backwards = path.reversed()
    assert continuity_residual(k3, backwards) <= 1e-8
    assert action(k3, backwards) == pytest.approx(action(k3, path), rel=1e-12)
    np.testing.assert_allclose(backwards.densities[0], path.densities[-1])


def test_distance_to_itself_is_zero(k3):
    rho = np.array([1.5, 0.75, 0.75])
    result = distance_upper(k3, rho, rho, TransportOptions(grid=4))
    assert result.w_upper == pytest.approx(0.0, abs=1e-10)


def test_action_rejects_inadmissible_path():
    t = two_point(0.5, 1.0)
    path = DiscretePath(time_grid=np.array([0.0, 1.0]), densities=np.vstack([START, END]),
                        potentials=np.zeros((1, 2)))
    assert continuity_residual(t, path) > 1e-8
    with pytest.raises(PathRejectedError):
        action(t, path)


def test_input_validation(k3):
    ones = np.ones(3)
    with pytest.raises(DomainError):
        distance_upper(k3, ones, ones, TransportOptions(grid=0))
    with pytest.raises(DomainError):
        distance_upper(k3, ones, ones, TransportOptions(grid=300))
    with pytest.raises(DomainError):
        distance_upper(k3, ones, ones, TransportOptions(grid=8, refine_to=512))
    with pytest.raises(DomainError):
        distance_upper(k3, np.array([1.5, 1.5, 0.0]), ones)
    with pytest.raises(DomainError):
        distance_upper(bernoulli_laplace(7, 3).triple, np.ones(35), np.ones(35))


def test_convexity_check_with_certified_kappa(k3, rng):
    rho0, rho1 = random_density(k3, rng, spread=0.7), random_density(k3, rng, spread=0.7)
    options = TransportOptions(grid=16)
    result = distance_upper(k3, rho0, rho1, options)
    report = convexity_check(k3, rho0, rho1, 1.25, options, result=result)
    assert report.w_upper == result.w_upper
    assert len(report.slacks) == 17
    assert report.slacks[0] == pytest.approx(0.0, abs=1e-12)
    assert report.slacks[-1] == pytest.approx(0.0, abs=1e-12)
    assert report.consistent


def test_convexity_check_flags_absurd_kappa():
    t = complete_graph(2)
    report = convexity_check(t, START, END, 1e6, TransportOptions(grid=8))
    assert not report.consistent


def test_distance_is_symmetric(k3, rng):
    rho0, rho1 = random_density(k3, rng, spread=0.6), random_density(k3, rng, spread=0.6)
    options = TransportOptions(grid=16)
    forward = distance_upper(k3, rho0, rho1, options).w_upper
    backward = distance_upper(k3, rho1, rho0, options).w_upper
    assert forward == pytest.approx(backward, rel=1e-4)


def test_triangle_inequality(k3, rng):
    a, b, c = (random_density(k3, rng, spread=0.6) for _ in range(3))
    options = TransportOptions(grid=16)
    direct = distance_upper(k3, a, c, options).w_upper
    via = distance_upper(k3, a, b, options).w_upper + distance_upper(k3, b, c, options).w_upper
    assert direct <= via * (1 + 1e-3)


@pytest.mark.slow
def test_certified_convexity_on_bernoulli_laplace_pairs(rng):
    t = bernoulli_laplace(3, 1).triple
    kappa = certify_bl(3, 1).kappa
    assert kappa == 1.25
    options = TransportOptions(grid=16)
    for _ in range(20):
        rho0, rho1 = random_density(t, rng, spread=0.7), random_density(t, rng, spread=0.7)
        report = convexity_check(t, rho0, rho1, kappa, options)
        assert report.consistent, (report.worst_slack, report.tolerance)
