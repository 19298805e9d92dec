"""Upper bounds on the discrete transport distance W and entropy convexity checks.

Paths are discretised on a time grid t_0 < ... < t_K: densities are
piecewise linear, potentials constant on each interval. On interval k the
continuity equation reads

    pi * (rho_{k+1} - rho_k) / h_k = Lambda(w_k) psi_k

with Lambda(w) the graph Laplacian for edge weights w and w_k the
trapezoid average of theta(rho(x), rho(y)) c(x, y) at both ends. Given
the densities, psi_k follows from one linear solve, so the discrete
continuity equation holds to solver precision and only the interior
densities are optimised.

All distances reported here are upper bounds.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from errors import DomainError, OptimizerError, PathRejectedError
from logmean import theta, theta_partials
from markov import MarkovTriple, as_density, entropy

logger = logging.getLogger(__name__)

MAX_STATES = 24
MAX_GRID = 256
RESIDUAL_LIMIT = 1e-8
LOG_BOUND = 60.0


@dataclass(frozen=True, eq=False)
class DiscretePath:
    """Densities at the grid times and one potential per interval."""
    time_grid: np.ndarray
    densities: np.ndarray
    potentials: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.time_grid) - 1

    def reversed(self) -> "DiscretePath":
        """The same path run backwards (psi -> -psi)."""
        return DiscretePath(time_grid=1.0 - self.time_grid[::-1], densities=self.densities[::-1].copy(),
                            potentials=-self.potentials[::-1].copy())


@dataclass(frozen=True)
class TransportOptions:
    grid: int = 64
    refine_to: Optional[int] = None
    max_iter: int = 500
    restarts: int = 0
    seed: int = 0


@dataclass
class TransportResult:
    w_upper: float
    path: DiscretePath
    history: List[Dict[str, Any]] = field(default_factory=list)
    converged: bool = True
    residual: float = 0.0
    midpoint_residual: float = 0.0


class _Edges:
    """Unordered edges with symmetric conductances and an incidence matrix."""

    def __init__(self, t: MarkovTriple):
        self.x = t.edges[:, 0]
        self.y = t.edges[:, 1]
        self.c = np.array([t.conductances[t.pair_lookup[(int(a), int(b))]] for a, b in t.edges])
        self.incidence = np.zeros((len(self.x), t.size))
        rows = np.arange(len(self.x))
        self.incidence[rows, self.x] = 1.0
        self.incidence[rows, self.y] = -1.0
        self.pi = t.pi
        self.size = t.size

    def weights(self, densities: np.ndarray) -> np.ndarray:
        """theta(rho(x), rho(y)) c per edge, for each row of densities."""
        return theta(densities[:, self.x], densities[:, self.y]) * self.c

    def laplacians(self, w: np.ndarray) -> np.ndarray:
        return np.einsum('ei,ke,ej->kij', self.incidence, w, self.incidence)

    def solve(self, densities: np.ndarray):
        """phi_k with Lambda(w_k) phi_k = pi (rho_{k+1} - rho_k), sum(phi_k) = 0."""
        node_w = self.weights(densities)
        averaged = 0.5 * (node_w[:-1] + node_w[1:])
        flows = self.pi * np.diff(densities, axis=0)
        system = self.laplacians(averaged) + 1.0
        phi = np.linalg.solve(system, flows[:, :, None])[:, :, 0]
        return phi, flows, averaged


def _strict_endpoint(t: MarkovTriple, rho) -> np.ndarray:
    values = np.array(as_density(t, rho, strict=True, tol=1e-10).values, dtype=float)
    return values / np.dot(values, t.pi)


def _check_size(t: MarkovTriple, grid: int):
    if t.size > MAX_STATES:
        raise DomainError(f"transport is limited to {MAX_STATES} states, chain has {t.size}")
    if t.size < 2:
        raise DomainError("transport needs at least two states")
    if not isinstance(grid, int) or not 1 <= grid <= MAX_GRID:
        raise DomainError(f"grid must be an integer in [1, {MAX_GRID}], got {grid!r}")


def continuity_residual(t: MarkovTriple, path: DiscretePath, midpoint: bool = False) -> float:
    """Max-norm violation of the discrete continuity equation.

    With ``midpoint=True`` the mobility is taken at the interval midpoint
    instead of the trapezoid average; that residual shrinks as the grid is refined.
    """
    edges = _Edges(t)
    h = np.diff(path.time_grid)
    flows = t.pi * np.diff(path.densities, axis=0) / h[:, None]
    if midpoint:
        w = edges.weights(0.5 * (path.densities[:-1] + path.densities[1:]))
    else:
        node_w = edges.weights(path.densities)
        w = 0.5 * (node_w[:-1] + node_w[1:])
    pushed = np.einsum('kij,kj->ki', edges.laplacians(w), path.potentials)
    return float(np.max(np.abs(flows - pushed))) if len(h) else 0.0


def action(t: MarkovTriple, path: DiscretePath) -> float:
    """Trapezoid-rule action sum_k h_k psi_k^T Lambda(w_k) psi_k of an admissible path.

    Raises:
        PathRejectedError: If the continuity residual exceeds 1e-8
    """
    residual = continuity_residual(t, path)
    if residual > RESIDUAL_LIMIT:
        raise PathRejectedError(f"continuity residual {residual:.3g} exceeds {RESIDUAL_LIMIT}")
    edges = _Edges(t)
    h = np.diff(path.time_grid)
    node_w = edges.weights(path.densities)
    w = 0.5 * (node_w[:-1] + node_w[1:])
    jumps = path.potentials[:, edges.x] - path.potentials[:, edges.y]
    return float(np.sum(h * np.sum(w * jumps ** 2, axis=1)))


class _Action:
    """Action of the path through given interior densities, with its gradient in softmax coordinates."""

    def __init__(self, t: MarkovTriple, rho0: np.ndarray, rho1: np.ndarray, grid: int):
        self.edges = _Edges(t)
        self.pi = t.pi
        self.n = t.size
        self.grid = grid
        self.h = 1.0 / grid
        self.rho0, self.rho1 = rho0, rho1

    def densities(self, u: np.ndarray) -> np.ndarray:
        u = u.reshape(self.grid - 1, self.n)
        w = np.exp(u - u.max(axis=1, keepdims=True))
        interior = w / (w @ self.pi)[:, None]
        return np.vstack([self.rho0, interior, self.rho1])

    def path(self, u: np.ndarray) -> DiscretePath:
        densities = self.densities(u)
        phi, _, _ = self.edges.solve(densities)
        return DiscretePath(time_grid=np.linspace(0.0, 1.0, self.grid + 1), densities=densities,
                            potentials=phi / self.h)

    def __call__(self, u: np.ndarray) -> Tuple[float, np.ndarray]:
        e = self.edges
        densities = self.densities(u)
        phi, flows, _ = e.solve(densities)
        value = float(np.sum(phi * flows)) / self.h

        grad = np.zeros_like(densities)
        grad[1:] += 2.0 * self.pi * phi / self.h
        grad[:-1] -= 2.0 * self.pi * phi / self.h
        jumps2 = (phi[:, e.x] - phi[:, e.y]) ** 2 / self.h
        d1, d2 = theta_partials(densities[:, e.x], densities[:, e.y])
        for side in (slice(0, -1), slice(1, None)):
            coef = -0.5 * e.c * jumps2
            np.add.at(grad[side], (slice(None), e.x), coef * d1[side])
            np.add.at(grad[side], (slice(None), e.y), coef * d2[side])

        g = grad[1:-1]
        rho = densities[1:-1]
        weighted = g * rho
        grad_u = weighted - self.pi * rho * weighted.sum(axis=1, keepdims=True)
        return value, grad_u.ravel()


def _interpolate(densities: np.ndarray, grid: int) -> np.ndarray:
    """Piecewise-linear resampling of a density path onto a uniform grid."""
    old = np.linspace(0.0, 1.0, len(densities))
    new = np.linspace(0.0, 1.0, grid + 1)
    return np.stack([np.interp(new, old, densities[:, x]) for x in range(densities.shape[1])], axis=1)


def _log_coordinates(densities: np.ndarray) -> np.ndarray:
    return np.log(densities[1:-1]).ravel()


def _optimise(objective: _Action, u0: np.ndarray, max_iter: int) -> Dict[str, Any]:
    if u0.size == 0:
        value, _ = objective(u0)
        return {'u': u0, 'value': value, 'success': True, 'iterations': 0, 'message': 'no interior points'}
    first, _ = objective(u0)
    res = minimize(objective, u0, jac=True, method="L-BFGS-B",
                   bounds=[(-LOG_BOUND, LOG_BOUND)] * u0.size,
                   options={'maxiter': max_iter, 'ftol': 1e-15, 'gtol': 1e-12})
    if not math.isfinite(res.fun):
        raise OptimizerError("transport action became non-finite",
                             [{'message': str(res.message), 'iterations': int(res.nit)}])
    if res.fun <= first:
        return {'u': res.x, 'value': float(res.fun), 'success': bool(res.success),
                'iterations': int(res.nit), 'message': str(res.message)}
    return {'u': u0, 'value': first, 'success': False, 'iterations': int(res.nit), 'message': str(res.message)}


def distance_upper(t: MarkovTriple, rho0, rho1, options: Optional[TransportOptions] = None) -> TransportResult:
    """Upper bound on W(rho0, rho1) by minimising the discrete action.

    The search starts from linear interpolation. With ``refine_to`` the grid
    is doubled up to that size, each level warm-started from the previous
    path; the smallest action seen is reported, so refinement never
    increases the bound.

    Raises:
        DomainError: For non-strict endpoints, too many states or an invalid grid
        OptimizerError: If the action cannot be evaluated
    """
    options = options or TransportOptions()
    _check_size(t, options.grid)
    target = options.refine_to or options.grid
    _check_size(t, target)
    start = _strict_endpoint(t, rho0)
    end = _strict_endpoint(t, rho1)

    rng = np.random.default_rng(options.seed)
    grid = options.grid
    best: Optional[Tuple[float, DiscretePath, bool]] = None
    history: List[Dict[str, Any]] = []
    seed_path = np.vstack([(1 - s) * start + s * end for s in np.linspace(0.0, 1.0, grid + 1)])

    while True:
        objective = _Action(t, start, end, grid)
        guesses = [_log_coordinates(_interpolate(seed_path, grid))]
        for _ in range(options.restarts):
            guesses.append(guesses[0] + 0.1 * rng.standard_normal(guesses[0].size))
        level = None
        for u0 in guesses:
            run = _optimise(objective, u0, options.max_iter)
            if level is None or run['value'] < level['value']:
                level = run
        path = objective.path(level['u'])
        if best is None or level['value'] <= best[0]:
            best = (level['value'], path, level['success'])
        history.append({
            'grid': grid,
            'action': level['value'],
            'best_action': best[0],
            'iterations': level['iterations'],
            'converged': level['success'],
        })
        logger.info("Transport grid %s: action %.9g (best %.9g)", grid, level['value'], best[0])
        if not level['success']:
            logger.warning("Transport optimiser stopped early on grid %s: %s", grid, level['message'])
        if grid >= target:
            break
        seed_path = path.densities
        grid = min(2 * grid, target)

    value, path, converged = best
    return TransportResult(w_upper=math.sqrt(max(value, 0.0)), path=path, history=history,
                           converged=converged, residual=continuity_residual(t, path),
                           midpoint_residual=continuity_residual(t, path, midpoint=True))


@dataclass
class ConvexityReport:
    """Entropy along the computed path against the kappa-convexity bound.

    slack(s) = (1-s)H(rho_0) + s H(rho_1) - kappa/2 s(1-s) W^2 - H(rho_s)
    """
    kappa: float
    w_upper: float
    times: np.ndarray
    slacks: np.ndarray
    worst_slack: float
    tolerance: float

    @property
    def consistent(self) -> bool:
        return self.worst_slack >= -self.tolerance


def convexity_check(t: MarkovTriple, rho0, rho1, kappa, options: Optional[TransportOptions] = None,
                    result: Optional[TransportResult] = None) -> ConvexityReport:
    """Evaluate the kappa-convexity inequality of the entropy along a near-geodesic path.

    The path and W are approximations, so this is a consistency report: the
    result counts as consistent when the worst slack is >= -0.05 |H(rho0) + H(rho1)|.
    A precomputed ``result`` for the same endpoints skips the transport solve.
    """
    kappa = float(kappa)
    result = result or distance_upper(t, rho0, rho1, options)
    path = result.path
    h_start = entropy(t, path.densities[0])
    h_end = entropy(t, path.densities[-1])
    s = path.time_grid
    along = np.array([entropy(t, rho) for rho in path.densities])
    bound = (1 - s) * h_start + s * h_end - 0.5 * kappa * s * (1 - s) * result.w_upper ** 2
    slacks = bound - along
    report = ConvexityReport(kappa=kappa, w_upper=result.w_upper, times=s, slacks=slacks,
                             worst_slack=float(np.min(slacks)), tolerance=0.05 * abs(h_start + h_end))
    logger.info("Convexity check kappa=%s: worst slack %.3g (tolerance %.3g)",
                kappa, report.worst_slack, report.tolerance)
    return report
