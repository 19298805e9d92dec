import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import DomainError
from logmean import NEAR_DIAGONAL, deficit, theta, theta_partials

positive = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False, allow_infinity=False)
moderate = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False, allow_infinity=False)


def test_theta_fixed_points():
    assert theta(1.0, 1.0) == 1.0
    assert theta(3.5, 3.5) == pytest.approx(3.5, rel=1e-15)
    assert theta(2.0, 0.0) == 0.0
    assert theta(0.0, 0.0) == 0.0


def test_theta_matches_closed_form_away_from_diagonal():
    assert theta(math.e, 1.0) == pytest.approx(math.e - 1.0, rel=1e-14)
    assert theta(4.0, 1.0) == pytest.approx(3.0 / math.log(4.0), rel=1e-14)
    assert theta(1e-8, 1.0) == pytest.approx((1.0 - 1e-8) / -math.log(1e-8), rel=1e-14)


@pytest.mark.parametrize("delta", [1e-12, 1e-8, 1e-5, 0.99e-4, 1e-4, 1.01e-4, 1e-3, 0.1])
def test_theta_accurate_near_diagonal(delta):
    expected = delta / math.log1p(delta)
    assert theta(1.0 + delta, 1.0) == pytest.approx(expected, rel=1e-14)
    assert theta(1.0, 1.0 + delta) == pytest.approx(expected, rel=1e-14)


def test_theta_rejects_negative():
    with pytest.raises(DomainError):
        theta(-1.0, 1.0)
    with pytest.raises(DomainError):
        theta(np.array([1.0, -0.5]), 1.0)


def test_theta_broadcasts():
    out = theta(np.array([1.0, 2.0, 0.0]), 1.0)
    assert out.shape == (3,)
    np.testing.assert_allclose(out, [1.0, 1.0 / math.log(2.0), 0.0], rtol=1e-14)


@given(positive, positive)
@settings(max_examples=200, deadline=None)
def test_theta_symmetric_and_between_means(r, s):
    value = theta(r, s)
    assert value == pytest.approx(theta(s, r), rel=1e-14)
    assert math.sqrt(r * s) * (1 - 1e-12) <= value <= 0.5 * (r + s) * (1 + 1e-12)
    assert min(r, s) * (1 - 1e-12) <= value


@given(positive, positive, st.floats(min_value=1e-3, max_value=1e3))
@settings(max_examples=200, deadline=None)
def test_theta_one_homogeneous(r, s, scale):
    assert theta(scale * r, scale * s) == pytest.approx(scale * theta(r, s), rel=1e-12)


@given(positive, positive)
@settings(max_examples=200, deadline=None)
def test_partials_satisfy_euler_identity(r, s):
    d1, d2 = theta_partials(r, s)
    assert r * d1 + s * d2 == pytest.approx(theta(r, s), rel=1e-11)
    assert d1 > 0 and d2 > 0


@pytest.mark.parametrize("r, s", [(1.0, 2.0), (0.3, 0.31), (5.0, 0.01), (1.0, 1.0 + 5e-5)])
def test_partials_match_finite_differences(r, s):
    h = 1e-6 * r
    k = 1e-6 * s
    d1, d2 = theta_partials(r, s)
    assert d1 == pytest.approx((theta(r + h, s) - theta(r - h, s)) / (2 * h), rel=1e-6)
    assert d2 == pytest.approx((theta(r, s + k) - theta(r, s - k)) / (2 * k), rel=1e-6)


def test_partials_on_diagonal_are_one_half():
    d1, d2 = theta_partials(2.0, 2.0)
    assert d1 == pytest.approx(0.5, abs=1e-15)
    assert d2 == pytest.approx(0.5, abs=1e-15)


def test_partials_continuous_across_series_threshold():
    below = theta_partials(1.0 + 0.999 * NEAR_DIAGONAL, 1.0)
    above = theta_partials(1.0 + 1.001 * NEAR_DIAGONAL, 1.0)
    assert below.d1 == pytest.approx(above.d1, rel=1e-6)
    assert below.d2 == pytest.approx(above.d2, rel=1e-6)


def test_partials_keep_array_shape():
    d1, d2 = theta_partials(np.array([[1.0, 2.0], [3.0, 4.0]]), 2.0)
    assert d1.shape == (2, 2)
    assert d2.shape == (2, 2)


def test_partials_reject_zero():
    with pytest.raises(DomainError):
        theta_partials(0.0, 1.0)


@given(moderate, moderate, moderate, moderate)
@settings(max_examples=300, deadline=None)
def test_deficit_nonnegative(s, t, u, v):
    assert deficit(s, t, u, v) >= -1e-10 * (1.0 + u + v)


def test_deficit_vanishes_at_base_point():
    assert deficit(0.4, 2.5, 0.4, 2.5) == pytest.approx(0.0, abs=1e-14)
    assert deficit(1.0, 3.0, 2.0, 6.0) == pytest.approx(0.0, abs=1e-13)


def test_deficit_rejects_zero():
    with pytest.raises(DomainError):
        deficit(1.0, 1.0, 0.0, 1.0)


# ========== BULK SAMPLES ==========

def _log_uniform(rng, low, high, size):
    return np.exp(rng.uniform(math.log(low), math.log(high), size))


def _pairs(rng, size=100_000):
    """Half wide pairs, half within 1e-5 of the diagonal."""
    r = _log_uniform(rng, 1e-6, 1e6, size)
    wide = _log_uniform(rng, 1e-6, 1e6, size)
    close = r * np.exp(1e-5 * rng.standard_normal(size))
    s = np.where(np.arange(size) % 2 == 0, wide, close)
    return r, s


def test_theta_properties_on_bulk_samples(rng):
    r, s = _pairs(rng)
    value = theta(r, s)
    np.testing.assert_allclose(value, theta(s, r), rtol=1e-14)
    assert np.all(value >= np.sqrt(r * s) * (1 - 1e-12))
    assert np.all(value <= 0.5 * (r + s) * (1 + 1e-12))
    scale = _log_uniform(rng, 1e-3, 1e3, r.size)
    np.testing.assert_allclose(theta(scale * r, scale * s), scale * value, rtol=1e-12)


def test_partials_on_bulk_samples(rng):
    r, s = _pairs(rng)
    d1, d2 = theta_partials(r, s)
    assert np.all(d1 > 0) and np.all(d2 > 0)
    np.testing.assert_allclose(r * d1 + s * d2, theta(r, s), rtol=1e-11)


def test_deficit_nonnegative_on_bulk_samples(rng):
    size = 100_000
    s, t = _log_uniform(rng, 1e-3, 1e3, size), _log_uniform(rng, 1e-3, 1e3, size)
    u, v = _log_uniform(rng, 1e-3, 1e3, size), _log_uniform(rng, 1e-3, 1e3, size)
    # every other sample sits next to the zero set u:v = s:t
    c = _log_uniform(rng, 1e-1, 1e1, size)
    near = np.arange(size) % 2 == 1
    u = np.where(near, c * s * (1 + 1e-7 * rng.standard_normal(size)), u)
    v = np.where(near, c * t * (1 + 1e-7 * rng.standard_normal(size)), v)
    assert np.all(deficit(s, t, u, v) >= -1e-10 * (1.0 + u + v))
