"""Logarithmic mean kernel.
theta(r, s) = (r - s) / (log r - log s), its partial derivatives and the
four-point deficit. All functions accept scalars or numpy arrays.
"""
from typing import NamedTuple, Union

import numpy as np

from errors import DomainError

ArrayOrFloat = Union[float, np.ndarray]

# |r - s| <= NEAR_DIAGONAL * max(r, s) switches to the series in u = (r-s)/(r+s)
NEAR_DIAGONAL = 1e-4


class DerivativePair(NamedTuple):
    """Partial derivatives (d/dr, d/ds) of theta at (r, s)."""
    d1: ArrayOrFloat
    d2: ArrayOrFloat


def _prepare(*args, strict: bool, name: str):
    arrays = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in args])
    scalar = all(np.ndim(a) == 0 for a in args)
    for a in arrays:
        bad = (a <= 0) if strict else (a < 0)
        if np.any(bad):
            bound = "positive" if strict else "nonnegative"
            raise DomainError(f"{name} requires {bound} arguments, got {a[bad].ravel()[:3].tolist()}")
    return arrays, scalar


def _out(values: np.ndarray, scalar: bool) -> ArrayOrFloat:
    return float(values) if scalar else values


def _series(u: np.ndarray):
    """u / artanh(u) and its derivative, truncated after u**6."""
    u2 = u * u
    g = 1.0 - u2 / 3.0 - 4.0 * u2 * u2 / 45.0 - 44.0 * u2 * u2 * u2 / 945.0
    dg = -2.0 * u / 3.0 - 16.0 * u2 * u / 45.0 - 264.0 * u2 * u2 * u / 945.0
    return g, dg


def _regimes(r: np.ndarray, s: np.ndarray):
    diff = r - s
    u = diff / (r + s)
    near = np.abs(diff) <= NEAR_DIAGONAL * np.maximum(r, s)
    mid = ~near & (np.abs(u) <= 0.5)
    far = ~near & ~mid
    return diff, u, near, mid, far


def _theta_positive(r: np.ndarray, s: np.ndarray) -> np.ndarray:
    diff, u, near, mid, far = _regimes(r, s)
    m = 0.5 * (r + s)
    out = np.empty_like(r)
    out[near] = m[near] * _series(u[near])[0]
    # artanh keeps full relative accuracy for moderate u, logs do for large ratios
    out[mid] = m[mid] * u[mid] / np.arctanh(u[mid])
    out[far] = diff[far] / (np.log(r[far]) - np.log(s[far]))
    return out


def theta(r: ArrayOrFloat, s: ArrayOrFloat) -> ArrayOrFloat:
    """Logarithmic mean of r and s.

    Args:
        r: Nonnegative value(s)
        s: Nonnegative value(s)

    Returns:
        theta(r, s); zero wherever r or s is zero

    Raises:
        DomainError: If any argument is negative
    """
    (r_arr, s_arr), scalar = _prepare(r, s, strict=False, name="theta")
    out = np.zeros(r_arr.shape, dtype=float)
    pos = (r_arr > 0) & (s_arr > 0)
    if np.any(pos):
        out[pos] = _theta_positive(r_arr[pos], s_arr[pos])
    return _out(out, scalar)


def theta_partials(r: ArrayOrFloat, s: ArrayOrFloat) -> DerivativePair:
    """Partial derivatives of theta at strictly positive (r, s).

    Satisfies r * d1 + s * d2 == theta(r, s).

    Raises:
        DomainError: If any argument is nonpositive
    """
    (r_arr, s_arr), scalar = _prepare(r, s, strict=True, name="theta_partials")
    r_arr = np.atleast_1d(r_arr).astype(float)
    s_arr = np.atleast_1d(s_arr).astype(float)
    diff, u, near, _, _ = _regimes(r_arr, s_arr)
    d1 = np.empty_like(r_arr)
    d2 = np.empty_like(r_arr)

    g, dg = _series(u[near])
    d1[near] = 0.5 * (g + (1.0 - u[near]) * dg)
    d2[near] = 0.5 * (g - (1.0 + u[near]) * dg)

    off = ~near
    if np.any(off):
        ro, so, do = r_arr[off], s_arr[off], diff[off]
        th = _theta_positive(ro, so)
        d1[off] = th * (ro - th) / (ro * do)
        d2[off] = th * (th - so) / (so * do)

    if scalar:
        return DerivativePair(float(d1[0]), float(d2[0]))
    shape = np.broadcast(np.asarray(r), np.asarray(s)).shape
    return DerivativePair(d1.reshape(shape), d2.reshape(shape))


def deficit(s: ArrayOrFloat, t: ArrayOrFloat, u: ArrayOrFloat, v: ArrayOrFloat) -> ArrayOrFloat:
    """Deficit u*d1(s,t) + v*d2(s,t) - theta(u,v) of the four-point inequality.

    Nonnegative up to rounding for all positive arguments.
    """
    (s_arr, t_arr, u_arr, v_arr), scalar = _prepare(s, t, u, v, strict=True, name="deficit")
    d1, d2 = theta_partials(s_arr, t_arr)
    out = u_arr * d1 + v_arr * d2 - theta(u_arr, v_arr)
    return _out(np.asarray(out, dtype=float), scalar)
