"""ricci-bounds command line interface
Certified and estimated entropic Ricci curvature bounds for reversible Markov chains.

Every command prints one report document (text or JSON) on stdout. The exit
code is 0 when all checks pass, 1 when a check fails and 2 for invalid input.
"""
import argparse
import json
import logging
import sys
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import Settings, load_settings
from curvature import (
    a_edge_sum,
    a_form,
    a_subgraph,
    b_form_direct,
    b_form_simplified,
    b_subgraph,
    edge_pair_values,
    square_identity,
    uniform_edge_rate,
)
from errors import (
    CertificationError,
    DomainError,
    ModelParameterError,
    ModelSpecError,
    RicciError,
    TripleValidationError,
    UnsupportedModelError,
)
from estimator import (
    Check,
    EstimateOptions,
    certify_generic,
    certify_model,
    estimate_kappa,
    inequality_report,
    ordering_checks,
    s3_counterexample,
)
from markov import describe, generator_apply, random_density, spectral_gap, symmetrized_generator, vertex_inner
from model_registry import BuiltModel, parse_model
from models.basic_chains import relabel
from models.file_chain import FORMATS, dump_triple
from models.subgraphs import enumerate_squares, enumerate_triangles
from transport import TransportOptions, convexity_check, distance_upper
from utils.report_helpers import create_table, render_text, to_jsonable

logger = logging.getLogger(__name__)

TOOL = "ricci-bounds"
__version__ = "0.1.0"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2
INPUT_ERRORS = (ModelSpecError, ModelParameterError, DomainError, TripleValidationError)

# triangles/squares are only counted (and subgraphs only sampled) up to this size
ENUMERATION_LIMIT = 720
DEFAULT_EPS = "0.1,0.01,1e-4,1e-6,1e-8,1e-10"

Payload = Tuple[Dict[str, Any], List[Check]]


def model_metadata(built: BuiltModel) -> Dict[str, Any]:
    """Sizes and structure of a model for the report header."""
    t = built.triple
    small = t.size <= ENUMERATION_LIMIT
    return {
        'spec': built.spec,
        **describe(t),
        'triangles': len(enumerate_triangles(t)) if small else None,
        'squares': len(enumerate_squares(t)) if small else None,
    }


def _certificate_or_none(built: BuiltModel):
    try:
        return certify_model(built.triple, built.model), None
    except CertificationError as e:
        logger.info("No certificate for %s: %s", built.spec, e)
        return None, str(e)


# ========== COMMANDS ==========

def cmd_info(built: BuiltModel, args, settings: Settings) -> Payload:
    gap = spectral_gap(built.triple) if built.triple.size > 1 else None
    return {'spectral_gap': gap}, []


def cmd_gap(built: BuiltModel, args, settings: Settings) -> Payload:
    return {'spectral_gap': spectral_gap(built.triple)}, []


def cmd_certify(built: BuiltModel, args, settings: Settings) -> Payload:
    cert = certify_model(built.triple, built.model)
    payload = {
        'kappa': cert.kappa,
        'breakdown': cert.breakdown(),
        'rate': cert.rate,
        'degree': cert.degree,
        'triangle_multiplicity': cert.triangle_multiplicity,
        'verified_by_enumeration': cert.verified_by_enumeration,
        'facts': cert.facts,
        'source': cert.source,
    }
    checks = [Check(name, ok, 0.0) for name, ok in cert.facts.items() if isinstance(ok, bool)]
    return payload, checks


def _estimate_options(args, settings: Settings) -> EstimateOptions:
    return EstimateOptions(
        starts=args.starts or settings.multistart,
        max_iter=args.max_iter,
        seed=args.seed,
        workers=args.workers or settings.workers,
        max_states=settings.estimate_max_states,
    )


def cmd_estimate(built: BuiltModel, args, settings: Settings) -> Payload:
    estimate = estimate_kappa(built.triple, _estimate_options(args, settings))
    gap = spectral_gap(built.triple)
    cert, _ = _certificate_or_none(built)
    payload = {
        'kappa_estimate': estimate.kappa,
        'kappa_certified': cert.kappa if cert else None,
        'note': "upper bound on kappa from numerical minimisation; evidence, not a bound",
        'spectral_gap': gap,
        'uniform_ratio': estimate.uniform_ratio,
        'best_start': estimate.best_start,
        'witness': {'rho': estimate.rho.values, 'psi': estimate.psi},
        'diagnostics': estimate.diagnostics,
    }
    return payload, ordering_checks(cert.kappa if cert else None, estimate.kappa, gap)


def cmd_inequalities(built: BuiltModel, args, settings: Settings) -> Payload:
    cert, reason = _certificate_or_none(built)
    estimate = estimate_kappa(built.triple, _estimate_options(args, settings)) if args.estimate else None
    report = inequality_report(built.triple, certificate=cert, estimate=estimate,
                               samples=args.samples, seed=args.seed)
    payload = {
        'kappa_certified': report.kappa_certified,
        'kappa_estimate': report.kappa_estimate,
        'spectral_gap': report.spectral_gap,
        'alpha_interval': list(report.alpha_interval),
        'provenance': report.provenance,
    }
    if reason:
        payload['certificate_unavailable'] = reason
    return payload, list(report.checks)


def _parse_kappa(text: Optional[str], built: BuiltModel) -> Optional[Fraction]:
    if text is None:
        return None
    if text == 'auto':
        return certify_model(built.triple, built.model).kappa
    try:
        return Fraction(text)
    except ValueError:
        raise DomainError(f"--kappa must be a number, a fraction or 'auto', got {text!r}")


def cmd_transport(built: BuiltModel, args, settings: Settings) -> Payload:
    t = built.triple
    options = TransportOptions(grid=args.grid or settings.transport_grid, refine_to=args.refine_to,
                               max_iter=args.max_iter, seed=args.seed)
    kappa = _parse_kappa(args.kappa, built)
    rng = np.random.default_rng(args.seed)
    rows, checks = [], []
    for index in range(args.pairs):
        rho0, rho1 = random_density(t, rng), random_density(t, rng)
        result = distance_upper(t, rho0, rho1, options)
        row = {'pair': index, 'w_upper': result.w_upper, 'converged': result.converged,
               'residual': result.residual, 'grids': [h['grid'] for h in result.history]}
        checks.append(Check(f'continuity_residual[{index}]', result.residual <= 1e-8, result.residual))
        if kappa is not None:
            report = convexity_check(t, rho0, rho1, kappa, options, result=result)
            row['worst_slack'] = report.worst_slack
            row['tolerance'] = report.tolerance
            checks.append(Check(f'convexity[{index}]', report.consistent, report.worst_slack))
        rows.append(row)
    payload = {'note': "W values are upper bounds", 'kappa': kappa, 'options': options, 'pairs': rows}
    return payload, checks


def _parse_eps(text: str) -> List[float]:
    try:
        values = [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise DomainError(f"--eps must be a comma separated list of numbers, got {text!r}")
    if not values:
        raise DomainError("--eps needs at least one value")
    return sorted(values, reverse=True)


def cmd_counterexample(built: Optional[BuiltModel], args, settings: Settings) -> Payload:
    points = [s3_counterexample(eps) for eps in _parse_eps(args.eps)]
    ratios = [p.ratio for p in points]
    steps = [later - earlier for earlier, later in zip(ratios, ratios[1:])]
    worst_step = max(steps) if steps else 0.0
    b_min = min(p.b_off for p in points)
    a_min = min(p.a for p in points)
    checks = [
        Check('ratio_strictly_decreasing', worst_step < 0, worst_step),
        Check('b_off_nonnegative', b_min >= -1e-12, b_min),
        Check('a_positive', a_min > 0, a_min),
    ]
    return {'layout': 's3 hexagon with long diagonals, rates 1/3', 'sweep': points}, checks


def cmd_export(built: BuiltModel, args, settings: Settings) -> Payload:
    path = dump_triple(built.triple, args.out, args.as_format)
    return {'out': str(path), 'format': args.as_format}, []


def run_verification(built: BuiltModel, samples: int, seed: int) -> Payload:
    """Invariant suite: calculus identities, the three forms of B, subgraph bounds,
    certificate validity, functional inequalities and relabelling invariance."""
    t = built.triple
    if t.size > ENUMERATION_LIMIT:
        raise DomainError(f"verify is limited to {ENUMERATION_LIMIT} states, model has {t.size}")
    if t.size < 2:
        raise DomainError("verify needs at least two states")
    rng = np.random.default_rng(seed)
    checks: List[Check] = []

    sym = symmetrized_generator(t, sparse=True)
    residual = float(abs(sym - sym.T).max())
    checks.append(Check('symmetrized_generator_symmetric', residual <= 1e-12, residual))

    worst = 0.0
    for _ in range(samples):
        f, g = rng.standard_normal(t.size), rng.standard_normal(t.size)
        lf, lg = generator_apply(t, f), generator_apply(t, g)
        worst = max(worst, abs(vertex_inner(t, lf, g) - vertex_inner(t, f, lg)))
    checks.append(Check('generator_self_adjoint', worst <= 1e-10, worst))

    inputs = [(random_density(t, rng).values, rng.standard_normal(t.size)) for _ in range(samples)]
    edge_sum = simplified = a_paths = scaling = 0.0
    for rho, psi in inputs:
        direct = b_form_direct(t, rho, psi)
        values = edge_pair_values(t, rho, psi).values
        scale = max(float(np.sum(np.abs(values))), 1e-300)
        edge_sum = max(edge_sum, abs(float(np.sum(values)) - direct) / scale)
        simplified = max(simplified, abs(b_form_simplified(t, rho, psi) - direct) / scale)
        a = a_form(t, rho, psi)
        a_paths = max(a_paths, abs(a_edge_sum(t, rho, psi) - a) / max(a, 1e-300))
        scaled = [abs(a_form(t, 2 * rho, psi) - 2 * a) / max(a, 1e-300),
                  abs(b_form_direct(t, 2 * rho, psi) - 2 * direct) / scale,
                  abs(b_form_direct(t, rho, 3 * psi) - 9 * direct) / scale]
        scaling = max(scaling, *scaled)
    checks.append(Check('edge_terms_match_direct_b', edge_sum <= 1e-10, edge_sum))
    checks.append(Check('simplified_b_matches_direct_b', simplified <= 1e-10, simplified))
    checks.append(Check('edge_sum_a_matches_a', a_paths <= 1e-10, a_paths))
    checks.append(Check('homogeneity', scaling <= 1e-9, scaling))

    cert, reason = _certificate_or_none(built)
    if cert is not None:
        kappa = float(cert.kappa)
        worst = min(b_form_direct(t, rho, psi) - kappa * a_form(t, rho, psi) for rho, psi in inputs)
        checks.append(Check('certificate_valid', worst >= -1e-10, worst, "min B - kappa A"))

    try:
        q = uniform_edge_rate(t)
    except UnsupportedModelError:
        q = None
    if q is not None:
        checks.extend(_subgraph_checks(t, q, inputs, rng))
        if cert is not None:
            order = rng.permutation(t.size)
            renamed = relabel(t, lambda s: ('r', s), order=order)
            try:
                same = certify_generic(renamed).kappa == certify_generic(t).kappa
            except CertificationError:
                same = True
            checks.append(Check('relabel_invariant_certificate', same, 0.0))

    report = inequality_report(t, certificate=cert, samples=samples, seed=seed)
    checks.extend(report.checks)
    payload = {'samples': samples, 'kappa_certified': cert.kappa if cert else None,
               'spectral_gap': report.spectral_gap}
    if reason:
        payload['certificate_unavailable'] = reason
    return payload, checks


def _subgraph_checks(t, q: float, inputs, rng) -> List[Check]:
    triangles, squares = enumerate_triangles(t), enumerate_squares(t)

    def sample(items):
        if len(items) <= len(inputs):
            return items
        return [items[i] for i in rng.choice(len(items), size=len(inputs), replace=False)]

    on_diag, tri_bound, identity, parts = 0.0, 0.0, 0.0, 0.0
    for (rho, psi), g in zip(inputs * 2, sample(triangles) + sample(squares)):
        a_g = a_subgraph(t, g, rho, psi)
        scale = max(a_g, 1e-300)
        on_diag = min(on_diag, (b_subgraph(t, g, rho, psi, 'on') - 2 * q * a_g) / scale)
        if g.kind == 'triangle':
            tri_bound = min(tri_bound, (b_subgraph(t, g, rho, psi, 'off') - 0.5 * q * a_g) / scale)
        else:
            split = square_identity(t, g, rho, psi)
            size = max(abs(split.alternating) + abs(split.deficit), 1e-300)
            identity = max(identity, abs(split.alternating + split.deficit - split.total) / size)
            parts = min(parts, split.alternating / size, split.deficit / size)
    return [
        Check('on_diagonal_bound', on_diag >= -1e-10, on_diag, "min (B_on - 2q A)/A"),
        Check('triangle_bound', tri_bound >= -1e-10, tri_bound, "min (B_off - q/2 A)/A"),
        Check('square_identity', identity <= 1e-10, identity),
        Check('square_parts_nonnegative', parts >= -1e-12, parts),
    ]


def cmd_verify(built: BuiltModel, args, settings: Settings) -> Payload:
    return run_verification(built, args.samples, args.seed)


COMMANDS = {
    'info': cmd_info,
    'certify': cmd_certify,
    'estimate': cmd_estimate,
    'gap': cmd_gap,
    'inequalities': cmd_inequalities,
    'transport': cmd_transport,
    'counterexample': cmd_counterexample,
    'verify': cmd_verify,
    'export': cmd_export,
}


# ========== ARGUMENTS ==========

def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=TOOL, description="Entropic Ricci curvature bounds for reversible Markov chains")
    parser.add_argument('--format', choices=('text', 'json'), default='text')
    parser.add_argument('--seed', type=int, default=settings.seed)
    parser.add_argument('--log-level', default=settings.log_level)
    parser.add_argument('--version', action='version', version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest='command', required=True)

    def with_model(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument('model', help="bl(n,k) | rt(n) | complete(n) | cycle(n) | product(SPEC,SPEC) | file:PATH")
        return p

    with_model('info', "model sizes and spectral gap")
    with_model('certify', "exact curvature lower bound with its breakdown")
    with_model('gap', "spectral gap")

    p = with_model('estimate', "numerical kappa estimate (an upper bound)")
    p.add_argument('--starts', type=int, default=None)
    p.add_argument('--max-iter', type=int, default=200)
    p.add_argument('--workers', type=int, default=None)

    p = with_model('inequalities', "alpha interval and sampled inequality checks")
    p.add_argument('--samples', type=int, default=20)
    p.add_argument('--estimate', action='store_true', help="include a numerical kappa estimate")
    p.add_argument('--starts', type=int, default=None)
    p.add_argument('--max-iter', type=int, default=200)
    p.add_argument('--workers', type=int, default=None)

    p = with_model('transport', "transport distance upper bounds and convexity checks")
    p.add_argument('--grid', type=int, default=None)
    p.add_argument('--refine-to', type=int, default=None)
    p.add_argument('--max-iter', type=int, default=500)
    p.add_argument('--kappa', default=None, help="number, fraction or 'auto' (certified value)")
    p.add_argument('--pairs', type=int, default=1)

    p = sub.add_parser('counterexample', help="sharpness sweep on the S3 hexagon")
    p.add_argument('--eps', default=DEFAULT_EPS)

    p = with_model('verify', "run the invariant suite")
    p.add_argument('--samples', type=int, default=20)

    p = with_model('export', "write the model as a chain file")
    p.add_argument('--out', required=True)
    p.add_argument('--as', dest='as_format', choices=FORMATS, default='text')
    return parser


def build_document(command: str, seed: int, built: Optional[BuiltModel], payload: Dict[str, Any],
                   checks: Sequence[Check]) -> Dict[str, Any]:
    document: Dict[str, Any] = {'tool': TOOL, 'version': __version__, 'seed': seed, 'command': command}
    if built is not None:
        document['model'] = model_metadata(built)
    document.update(payload)
    document['checks'] = [check._asdict() for check in checks]
    return to_jsonable(document)


def text_tables(command: str, document: Dict[str, Any]) -> Dict[str, str]:
    """Tables shown in place of the matching document fields in text output."""
    if command == 'counterexample':
        rows = [[p['eps'], p['a'], p['b_off'], p['ratio']] for p in document['sweep']]
        return {'sweep': create_table(['eps', 'A', 'B_off', 'ratio'], rows)}
    if command == 'certify':
        rows = [[term, value] for term, value in document['breakdown'].items()]
        return {'breakdown': create_table(['term', 'value'], rows)}
    return {}


def run(argv: Optional[Sequence[str]] = None, settings: Optional[Settings] = None) -> int:
    """Run one command and print its report.

    Returns:
        0 if every check passed, 1 if a check failed, 2 for invalid input
    """
    settings = settings or load_settings()
    parser = build_parser(settings)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_INPUT_ERROR

    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        built = parse_model(args.model) if hasattr(args, 'model') else None
        payload, checks = COMMANDS[args.command](built, args, settings)
    except INPUT_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except RicciError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CHECK_FAILED

    document = build_document(args.command, args.seed, built, payload, checks)
    if args.format == 'json':
        print(json.dumps(document, indent=2))
    else:
        print(render_text(document, text_tables(args.command, document)))
    failed = [c['name'] for c in document['checks'] if not c['passed']]
    if failed:
        logger.warning("Failed checks: %s", ", ".join(failed))
        return EXIT_CHECK_FAILED
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
