"""Curvature lower bounds: exact certificates, numerical estimates and inequality reports.

Certificates add up three exact contributions for a uniform-rate walk with
rate q: the on-diagonal terms (2q), the triangles (tau q / 2 with tau the
number of triangles through each edge) and the chordless squares (>= 0).
Estimates minimise B/A numerically and are upper bounds on the true
curvature, so they count as evidence, never as bounds.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.optimize import minimize

from curvature import a_form, b_form_direct, form_values, quadratic_forms, uniform_edge_rate
from errors import CertificationError, DomainError, ModelParameterError, OptimizerError, UnsupportedModelError
from markov import (
    DENSE_LIMIT,
    Density,
    MarkovTriple,
    as_density,
    build_triple,
    dirichlet,
    entropy,
    heat_semigroup,
    propagate,
    random_density,
    spectral_gap,
    vertex_inner,
)
from models.bernoulli_laplace import BernoulliLaplaceModel, bernoulli_laplace, check_parameters
from models.random_transposition import RandomTranspositionModel, random_transposition
from models.subgraphs import (
    PairCoverage,
    classify_pairs,
    enumerate_squares,
    enumerate_triangles,
    pair_coverage,
    squares_through_pair,
    triangle_count_per_edge,
)

logger = logging.getLogger(__name__)

BL_ENUMERATION_LIMIT = 6
RT_ENUMERATION_LIMIT = 4
LOG_BOUND = 12.0
# smallest admissible eigenvalue ratio of the reduced A form
CONDITION_FLOOR = 1e-12
# eigenvalue vs direct B/A agreement
RATIO_RTOL = 1e-6


# ========== CERTIFICATES ==========

@dataclass(frozen=True)
class Certificate:
    """Exact curvature lower bound with its decomposition."""
    kappa: Fraction
    rate: Fraction
    degree: int
    on_diagonal: Fraction
    triangle: Fraction
    square: Fraction
    triangle_multiplicity: int
    verified_by_enumeration: bool
    facts: Dict[str, Any] = field(default_factory=dict, compare=False)
    source: str = ""

    def breakdown(self) -> Dict[str, Fraction]:
        return {
            'on_diagonal': self.on_diagonal,
            'triangle': self.triangle,
            'square': self.square,
            'kappa': self.kappa,
        }


def _assemble(rate: Fraction, degree: int, tau: int, verified: bool, facts: dict, source: str) -> Certificate:
    on = 2 * rate
    tri = Fraction(tau) * rate / 2
    square = Fraction(0)
    cert = Certificate(kappa=on + tri + square, rate=rate, degree=degree, on_diagonal=on,
                       triangle=tri, square=square, triangle_multiplicity=tau,
                       verified_by_enumeration=verified, facts=facts, source=source)
    logger.info("Certificate %s: %s = %s + %s + %s", source, cert.kappa, on, tri, square)
    return cert


def _require(facts: Dict[str, Any], source: str):
    failed = [name for name, ok in facts.items() if ok is False]
    if failed:
        raise CertificationError(f"{source}: enumeration contradicts {', '.join(failed)}")


def bl_facts(model: BernoulliLaplaceModel) -> Dict[str, bool]:
    """Counting facts behind the Bernoulli-Laplace certificate, checked by enumeration."""
    t = model.triple
    n, d = model.n, model.degree
    q = t.uniform_rate()
    classes = classify_pairs(model)
    p2_ok = True
    for pair in classes.p2:
        if t.graph.has_edge(pair.first, pair.second):
            p2_ok = False
            break
        if len(squares_through_pair(t, pair)) != 3 or len(squares_through_pair(t, pair, chordless=True)) != 1:
            p2_ok = False
            break
    coverage = pair_coverage(t)
    return {
        'regular_degree': t.degree() == d,
        'uniform_rate': q is not None and math.isclose(q * d, 1.0, rel_tol=1e-12),
        'uniform_pi': t.has_uniform_pi(),
        'edge_in_n_minus_2_triangles': set(triangle_count_per_edge(t).values()) == {n - 2},
        'p1_pair_in_unique_triangle': all(t.graph.has_edge(p.first, p.second) for p in classes.p1),
        'p2_pair_in_one_chordless_square': p2_ok,
        'squares_cover_with_multiplicity_1': coverage.complete and set(coverage.multiplicities) <= {1},
    }


def certify_bl(n: int, k: int) -> Certificate:
    """kappa = (n+2)/(2k(n-k)) for Bernoulli-Laplace, assembled from 2/d + (n-2)/(2d) + 0.

    The counting facts are enumerated for n <= 6.

    Raises:
        ModelParameterError: For invalid (n, k)
        CertificationError: If enumeration contradicts a counting fact
    """
    check_parameters(n, k)
    d = k * (n - k)
    source = f"certify_bl({n},{k})"
    facts: Dict[str, Any] = {}
    verified = n <= BL_ENUMERATION_LIMIT
    if verified:
        facts = bl_facts(bernoulli_laplace(n, k))
        _require(facts, source)
    cert = _assemble(Fraction(1, d), d, n - 2, verified, facts, source)
    if cert.kappa != Fraction(n + 2, 2 * d):
        raise CertificationError(f"{source}: assembled {cert.kappa} differs from (n+2)/(2d)")
    return cert


def rt_facts(model: RandomTranspositionModel) -> Dict[str, bool]:
    """Counting facts behind the random transposition certificate."""
    t = model.triple
    classes = classify_pairs(model)
    homogeneous = all(len({model.pair_class(p) for p in sq.pairs()}) == 1 for sq in enumerate_squares(t))
    return {
        'regular_degree': t.degree() == model.degree,
        'uniform_pi': t.has_uniform_pi(),
        'no_triangles': not enumerate_triangles(t),
        'p1_pair_in_unique_square': all(len(squares_through_pair(t, p)) == 1 for p in classes.p1),
        'p2_pair_in_two_squares': all(len(squares_through_pair(t, p)) == 2 for p in classes.p2),
        'squares_homogeneous': homogeneous,
        'squares_cover': pair_coverage(t).complete,
    }


def certify_rt(n: int) -> Certificate:
    """kappa = 4/(n(n-1)) = 2/d for random transpositions; squares contribute >= 0.

    The counting facts are enumerated for n <= 4.
    """
    if not isinstance(n, int) or n < 2:
        raise ModelParameterError(f"certify_rt needs an integer n > 1, got {n!r}")
    d = n * (n - 1) // 2
    source = f"certify_rt({n})"
    facts: Dict[str, Any] = {}
    verified = n <= RT_ENUMERATION_LIMIT
    if verified:
        facts = rt_facts(random_transposition(n))
        _require(facts, source)
    cert = _assemble(Fraction(2, n * (n - 1)), d, 0, verified, facts, source)
    if cert.kappa != Fraction(4, n * (n - 1)):
        raise CertificationError(f"{source}: assembled {cert.kappa} differs from 4/(n(n-1))")
    return cert


def _exact_rate(q: float) -> Fraction:
    rate = Fraction(q).limit_denominator(10 ** 6)
    if not math.isclose(float(rate), q, rel_tol=1e-14):
        raise CertificationError(f"rate {q!r} has no small rational form")
    return rate


def certify_generic(t: MarkovTriple, coverage: Optional[PairCoverage] = None) -> Certificate:
    """Certificate for any uniform-rate walk on a regular graph with uniform pi.

    Every adjacent edge pair must be covered by a triangle or by chordless
    squares of uniform multiplicity. The triangle term uses the smallest
    number of triangles through an edge.

    Raises:
        CertificationError: If the chain or its pair coverage does not qualify
    """
    source = f"certify_generic({t.name or 'chain'})"
    try:
        q = uniform_edge_rate(t)
    except UnsupportedModelError as e:
        raise CertificationError(f"{source}: {e}")
    coverage = coverage or pair_coverage(t)
    if not coverage.complete:
        raise CertificationError(
            f"{source}: {len(coverage.uncovered)} uncovered pair(s), "
            f"{len(coverage.mixed_squares)} square(s) with mixed multiplicities")
    facts = coverage.summary()
    return _assemble(_exact_rate(q), t.degree(), coverage.tau_min, True, facts, source)


def certify_model(triple: MarkovTriple, model=None) -> Certificate:
    """Pick the model-specific certificate when one exists, else the generic one."""
    if isinstance(model, BernoulliLaplaceModel):
        return certify_bl(model.n, model.k)
    if isinstance(model, RandomTranspositionModel):
        return certify_rt(model.n)
    return certify_generic(triple)


# ========== ESTIMATION ==========

@dataclass(frozen=True)
class EstimateOptions:
    starts: int = 32
    max_iter: int = 200
    seed: int = 0
    workers: int = 1
    max_states: int = 720
    spread: float = 1.0
    step: float = 1e-7


@dataclass
class KappaEstimate:
    """Best B/A ratio found, with its witness. An upper bound on kappa."""
    kappa: float
    rho: Density
    psi: np.ndarray
    uniform_ratio: float
    best_start: int
    diagnostics: List[Dict[str, Any]]
    seed: int


class _Ratio:
    """min over psi of B(rho, psi)/A(rho, psi) as a function of log-coordinates u."""

    def __init__(self, t: MarkovTriple, step: float):
        self.t = t
        self.step = step
        self.basis = scipy.linalg.null_space(np.ones((1, t.size)))

    def density(self, u: np.ndarray) -> np.ndarray:
        w = np.exp(u - np.max(u))
        return w / np.dot(w, self.t.pi)

    def inner(self, rho: np.ndarray) -> Tuple[float, np.ndarray]:
        m_a, m_b = quadratic_forms(self.t, rho)
        reduced_a = self.basis.T @ m_a @ self.basis
        reduced_b = self.basis.T @ m_b @ self.basis
        spectrum = scipy.linalg.eigvalsh(reduced_a)
        if spectrum[0] <= CONDITION_FLOOR * spectrum[-1]:
            raise DomainError(f"A form is ill-conditioned at this density "
                              f"(eigenvalue ratio {spectrum[0] / spectrum[-1]:.3g})")
        values, vectors = scipy.linalg.eigh(reduced_b, reduced_a, subset_by_index=[0, 0])
        psi = self.basis @ vectors[:, 0]
        psi = psi - np.dot(psi, self.t.pi)
        value = float(values[0])
        direct = b_form_direct(self.t, rho, psi) / a_form(self.t, rho, psi)
        if not math.isclose(value, direct, rel_tol=RATIO_RTOL, abs_tol=RATIO_RTOL):
            raise DomainError(f"eigenvalue {value:.9g} disagrees with B/A = {direct:.9g}")
        return value, psi

    def __call__(self, u: np.ndarray) -> Tuple[float, np.ndarray]:
        rho = self.density(u)
        ratio, psi = self.inner(rho)
        # envelope: d ratio = d(B - ratio A) at the fixed minimiser psi
        def lagrangian(r):
            return b_form_direct(self.t, r, psi) - ratio * a_form(self.t, r, psi)

        grad_rho = np.empty_like(rho)
        for x in range(rho.size):
            h = self.step * rho[x]
            up, down = rho.copy(), rho.copy()
            up[x] += h
            down[x] -= h
            grad_rho[x] = (lagrangian(up) - lagrangian(down)) / (2.0 * h)
        weighted = grad_rho * rho
        grad_u = weighted - self.t.pi * rho * np.sum(weighted)
        return ratio, grad_u


def _run_start(objective: _Ratio, index: int, u0: np.ndarray, max_iter: int) -> Dict[str, Any]:
    """One L-BFGS-B run. Only ratios that passed the inner-solve checks are kept,
    so a run that wanders into an ill-conditioned region stops at its best checked point."""
    try:
        first, _ = objective(u0)
    except (np.linalg.LinAlgError, ValueError, DomainError) as e:
        logger.warning("Start %s failed: %s", index, e)
        return {'start': index, 'initial': float('nan'), 'ratio': float('nan'), 'u': u0, 'success': False,
                'iterations': 0, 'message': f"{type(e).__name__}: {e}"}

    best = {'ratio': first, 'u': u0}

    def tracked(u):
        value, grad = objective(u)
        if value < best['ratio']:
            best['ratio'], best['u'] = value, u.copy()
        return value, grad

    try:
        res = minimize(tracked, u0, jac=True, method="L-BFGS-B",
                       bounds=[(-LOG_BOUND, LOG_BOUND)] * u0.size, options={'maxiter': max_iter})
        success, iterations, message = bool(res.success), int(res.nit), str(res.message)
    except (np.linalg.LinAlgError, ValueError, DomainError) as e:
        logger.warning("Start %s stopped early: %s", index, e)
        success, iterations, message = False, -1, f"stopped early: {type(e).__name__}: {e}"
    return {'start': index, 'initial': first, 'ratio': best['ratio'], 'u': best['u'], 'success': success,
            'iterations': iterations, 'message': message}


def estimate_kappa(t: MarkovTriple, options: Optional[EstimateOptions] = None) -> KappaEstimate:
    """Numerically minimise B/A over strictly positive densities and potentials.

    Start 0 is the stationary density, where the ratio equals the spectral
    gap; the other starts are log-normal perturbations seeded from
    SeedSequence(options.seed). Results are aggregated in start order, so the
    outcome does not depend on the number of workers.

    Raises:
        DomainError: If the chain is too large or has a single state
        OptimizerError: If no start produced a finite ratio
    """
    options = options or EstimateOptions()
    if t.size > options.max_states:
        raise DomainError(f"estimate_kappa is capped at {options.max_states} states, chain has {t.size}")
    if t.size < 2:
        raise DomainError("estimate_kappa needs at least two states")
    if options.starts < 1:
        raise DomainError("estimate_kappa needs at least one start")

    objective = _Ratio(t, options.step)
    children = np.random.SeedSequence(options.seed).spawn(options.starts)
    initial = [np.zeros(t.size)]
    for child in children[1:]:
        initial.append(options.spread * np.random.default_rng(child).standard_normal(t.size))

    logger.info("Estimating kappa on %s: %s starts, %s worker(s)", t.name, options.starts, options.workers)
    if options.workers > 1:
        with ThreadPoolExecutor(max_workers=options.workers) as pool:
            runs = list(pool.map(lambda i: _run_start(objective, i, initial[i], options.max_iter),
                                 range(options.starts)))
    else:
        runs = [_run_start(objective, i, initial[i], options.max_iter) for i in range(options.starts)]

    diagnostics = [{k: v for k, v in run.items() if k != 'u'} for run in runs]
    finite = [run for run in runs if math.isfinite(run['ratio'])]
    if not finite:
        raise OptimizerError(f"no start produced a finite ratio on {t.name or 'chain'}", diagnostics)
    best = min(finite, key=lambda run: (run['ratio'], run['start']))
    rho = objective.density(best['u'])
    ratio, psi = objective.inner(rho)
    logger.info("kappa estimate %.9g from start %s", ratio, best['start'])
    return KappaEstimate(kappa=ratio, rho=as_density(t, rho, strict=True, tol=1e-9), psi=psi,
                         uniform_ratio=runs[0]['initial'],
                         best_start=best['start'], diagnostics=diagnostics, seed=options.seed)


def tensorization_observation(t1: MarkovTriple, t2: MarkovTriple,
                              options: Optional[EstimateOptions] = None) -> Dict[str, float]:
    """Compare the product estimate with the smaller factor estimate. Observation only."""
    from models.basic_chains import product_chain

    options = options or EstimateOptions()
    first = estimate_kappa(t1, options).kappa
    second = estimate_kappa(t2, options).kappa
    product = estimate_kappa(product_chain(t1, t2), options).kappa
    return {
        'kappa_first': first,
        'kappa_second': second,
        'kappa_product': product,
        'min_factor': min(first, second),
        'difference': product - min(first, second),
    }


# ========== INEQUALITY REPORTS ==========

class Check(NamedTuple):
    name: str
    passed: bool
    residual: float
    detail: str = ""


@dataclass
class CurvatureReport:
    """Certified and estimated curvature next to the spectral gap.

    ``alpha_interval`` brackets the MLSI constant as [2 kappa_certified, 2 lambda].
    """
    kappa_certified: Optional[Fraction]
    kappa_estimate: Optional[float]
    witness: Optional[Tuple[np.ndarray, np.ndarray]]
    spectral_gap: float
    alpha_interval: Tuple[Optional[Fraction], float]
    provenance: Dict[str, str]
    checks: List[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)


def ordering_checks(kappa_certified: Optional[Fraction], kappa_estimate: Optional[float],
                    lam: float, tol: float = 1e-6) -> List[Check]:
    """kappa_certified <= kappa_estimate <= lambda, for whichever values are present."""
    checks = []
    if kappa_certified is not None and kappa_estimate is not None:
        gap = float(kappa_certified) - kappa_estimate
        checks.append(Check('certified_below_estimate', gap <= tol, gap, "kappa_certified - kappa_estimate"))
    elif kappa_certified is not None:
        gap = float(kappa_certified) - lam
        checks.append(Check('certified_below_gap', gap <= tol, gap, "kappa_certified - lambda"))
    if kappa_estimate is not None:
        gap = kappa_estimate - lam
        checks.append(Check('estimate_below_gap', gap <= tol, gap, "kappa_estimate - lambda"))
    return checks


def _worst(values: Sequence[float]) -> float:
    return float(max(values)) if len(values) else 0.0


def inequality_report(t: MarkovTriple, certificate: Optional[Certificate] = None,
                      estimate: Optional[KappaEstimate] = None, samples: int = 20, seed: int = 0,
                      times: Sequence[float] = (0.1, 0.5, 1.0)) -> CurvatureReport:
    """Spectral gap, alpha interval and sampled checks of the functional inequalities."""
    lam = spectral_gap(t)
    rng = np.random.default_rng(seed)
    kappa = certificate.kappa if certificate is not None else None
    provenance = {'spectral_gap': 'dense eigh' if t.size <= DENSE_LIMIT else 'sparse eigsh'}
    if certificate is not None:
        provenance['kappa_certified'] = certificate.source
    if estimate is not None:
        provenance['kappa_estimate'] = f"estimate_kappa(seed={estimate.seed}), evidence only"
    report = CurvatureReport(
        kappa_certified=kappa,
        kappa_estimate=estimate.kappa if estimate is not None else None,
        witness=(estimate.rho.values, estimate.psi) if estimate is not None else None,
        spectral_gap=lam,
        alpha_interval=(2 * kappa if kappa is not None else None, 2.0 * lam),
        provenance=provenance,
    )

    potentials = [rng.standard_normal(t.size) for _ in range(samples)]
    poincare = []
    for psi in potentials:
        mean = vertex_inner(t, psi, np.ones(t.size))
        variance = vertex_inner(t, psi - mean, psi - mean)
        poincare.append(variance - dirichlet(t, psi, psi) / lam)
    residual = _worst(poincare)
    report.checks.append(Check('poincare', residual <= 1e-10, residual, "Var(psi) - E(psi,psi)/lambda"))

    decay = []
    for psi in potentials:
        centred = psi - vertex_inner(t, psi, np.ones(t.size))
        norm0 = math.sqrt(vertex_inner(t, centred, centred))
        for time in times:
            moved = propagate(t, centred, time)
            decay.append(math.sqrt(vertex_inner(t, moved, moved)) - math.exp(-lam * time) * norm0 * (1 + 1e-8))
    residual = _worst(decay)
    report.checks.append(Check('l2_decay', residual <= 1e-12, residual, "|e^{tL}psi| - e^{-lambda t}|psi|"))

    densities = [random_density(t, rng) for _ in range(samples)]
    if kappa is not None and kappa > 0:
        rate = 2.0 * float(kappa)
        mlsi_decay = []
        for rho in densities:
            h0 = entropy(t, rho)
            for time in times:
                mlsi_decay.append(entropy(t, heat_semigroup(t, rho, time))
                                  - math.exp(-rate * time) * h0 * (1 + 1e-8))
        residual = _worst(mlsi_decay)
        report.checks.append(Check('mlsi_decay', residual <= 1e-12, residual, "H(e^{tL}rho) - e^{-2 kappa t}H(rho)"))

        implied = [entropy(t, rho) - dirichlet(t, rho.values, np.log(rho.values)) / rate for rho in densities]
        # stationary density: 0 <= 0
        implied.append(entropy(t, np.ones(t.size)))
        residual = _worst(implied)
        report.checks.append(Check('mlsi_implied', residual <= 1e-12, residual, "H(rho) - E(rho, log rho)/(2 kappa)"))

    report.checks.extend(ordering_checks(kappa, report.kappa_estimate, lam))
    logger.info("Inequality report on %s: %s", t.name, [(c.name, c.passed) for c in report.checks])
    return report


# ========== SHARPNESS ON S3 ==========

class SharpnessPoint(NamedTuple):
    eps: float
    a: float
    b_off: float
    ratio: float


S3_HEXAGON = (1, 2, 3, 4, 5, 6)
S3_CHORDS = ((1, 4), (2, 5), (3, 6))


def s3_layout() -> MarkovTriple:
    """Cayley graph of S_3 drawn as a hexagon 1..6 with its three long diagonals; rates 1/3."""
    rates = {}
    edges = [(S3_HEXAGON[i], S3_HEXAGON[(i + 1) % 6]) for i in range(6)] + list(S3_CHORDS)
    for x, y in edges:
        rates[(x, y)] = 1.0 / 3.0
        rates[(y, x)] = 1.0 / 3.0
    return build_triple(S3_HEXAGON, rates, [1.0 / 6.0] * 6, name="s3")


def s3_counterexample(eps: float, t: Optional[MarkovTriple] = None) -> SharpnessPoint:
    """B_off/A at rho = (e, 1, e, e^2, e, e^2), psi = (1, 0, 1, 2, 1, 2) on the S_3 hexagon.

    The ratio tends to 0 as eps -> 0 while B_off stays nonnegative.
    """
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")
    t = t or s3_layout()
    raw = np.array([eps, 1.0, eps, eps ** 2, eps, eps ** 2])
    rho = raw / np.dot(raw, t.pi)
    psi = np.array([1.0, 0.0, 1.0, 2.0, 1.0, 2.0])
    values = form_values(t, rho, psi)
    return SharpnessPoint(eps=eps, a=values.a, b_off=values.b_off, ratio=values.b_off / values.a)
