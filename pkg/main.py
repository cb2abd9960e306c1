# main.py
"""
Command-line entry point. Each subcommand is a handler in COMMANDS; results
go to standard output (or --output), diagnostics to standard error.

Exit codes: 0 success, 1 computation or input error, 2 usage error.
"""
import argparse
import json
import logging
import sys
from typing import Callable, Dict, List, Optional, TextIO

import jsonschema
import numpy as np

from config.settings import Config
from polytope.errors import ExchPolyError
from polytope.geometry import cdf_to_pdf, embed, class_vertices, exact_measure_cdf, triangulate
from polytope.inference import (
    CountData,
    glr_test,
    log_likelihood,
    mle_fixed_p,
    mle_unconstrained,
    read_binary_csv,
)
from polytope.measures import correlation_bounds, parse_measure, quantile_bounds, ray_extrema, MeasureKind
from polytope.pex import PartitionSpec, pex_rays, pex_rays_to_dict
from polytope.rays import (
    MixtureWeights,
    SumPmf,
    binomials,
    enumerate_rays,
    map_H,
    random_weights,
    rays_to_dict,
)
from polytope.sampling import (
    FamilyKind,
    FamilySpec,
    SampleMode,
    empirical_measure_distribution,
    family_curves,
    joint_mean_correlation,
    sample_family,
    sample_mixture,
    sample_uniform_pmfs,
)
from utils.formats import LAMBDA_SCHEMA, PMF_SCHEMA, RAYS_SCHEMA, load_json, validate_json, write_csv, write_json
from utils.logging_setup import configure_logging

logger = logging.getLogger(__name__)


class UsageError(Exception):
    """Flag combination rejected after parsing"""


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonnegative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return value


# Handlers

def cmd_rays(args, out: TextIO):
    rays = enumerate_rays(args.d, args.p)
    if args.csv:
        rows = []
        for i, ray in enumerate(rays, start=1):
            if ray.is_point_mass:
                rows.append([i, ray.j1, '', ray.mass[0], ''])
            else:
                rows.append([i, ray.j1, ray.j2, ray.mass[0], ray.mass[1]])
        write_csv(rows, out, header=['ray', 'j1', 'j2', 'mass1', 'mass2'])
    else:
        write_json(validate_json(rays_to_dict(args.d, args.p, rays), RAYS_SCHEMA), out)


def cmd_triangulate(args, out: TextIO):
    poly = embed(class_vertices(args.d, args.p), method=args.method)
    tri = triangulate(poly)
    data = tri.to_dict()
    data.update({'d': args.d, 'p': args.p, 'volume': tri.volume})
    write_json(data, out)


def cmd_measure_cdf(args, out: TextIO):
    measure = parse_measure(args.measure)
    cdf = exact_measure_cdf(args.d, args.p, measure, n_grid=args.grid)
    if not args.pdf:
        write_csv(cdf.rows(), out, header=['t', 'F'])
        return
    density = cdf_to_pdf(cdf, args.delta)
    f_at = dict(zip(density.grid.tolist(), density.values.tolist()))
    rows = [(t, F, f_at.get(t, '')) for t, F in cdf.rows()]
    write_csv(rows, out, header=['t', 'F', 'f'])


def cmd_measure_dist(args, out: TextIO):
    measure = parse_measure(args.measure)
    cdf = empirical_measure_distribution(args.d, args.p, measure, args.n, args.seed)
    write_csv(cdf.rows(), out, header=['t', 'F'])


def cmd_bounds(args, out: TextIO):
    if args.measure is None:
        rho_min, rho_max = correlation_bounds(args.d, args.p)
        write_json({'d': args.d, 'p': args.p, 'rho_min': rho_min, 'rho_max': rho_max}, out)
        return
    measure = parse_measure(args.measure)
    if measure.kind == MeasureKind.QUANTILE:
        lo, hi = quantile_bounds(args.d, args.p, measure.param)
        write_json({'d': args.d, 'p': args.p, 'measure': measure.label, 'min': lo, 'max': hi}, out)
        return
    data = ray_extrema(args.d, args.p, measure)
    data.update({'d': args.d, 'p': args.p})
    write_json(data, out)


def cmd_measure(args, out: TextIO):
    data = load_json(args.pmf, PMF_SCHEMA)
    probs = np.asarray(data['pmf'], dtype=float)
    d = data.get('d', probs.shape[0] - 1)
    pmf = SumPmf(d, probs)
    measure = parse_measure(args.measure)
    write_json({'measure': measure.label, 'value': measure.evaluate(pmf)}, out)


def _sample_family(args) -> Optional[FamilySpec]:
    if args.model is not None:
        if args.model == FamilyKind.BETA_MIXTURE.value and args.a is not None and args.b is not None:
            return FamilySpec(FamilyKind.BETA_MIXTURE, a=args.a, b=args.b)
        if args.rho is None:
            raise UsageError(f"--model {args.model} needs --rho")
        return FamilySpec(FamilyKind(args.model), rho=args.rho)
    if args.rho is not None:
        return FamilySpec(FamilyKind.CORRELATION_FAMILY, rho=args.rho)
    return None


def cmd_sample(args, out: TextIO):
    if args.lambda_file and (args.rho is not None or args.model):
        raise UsageError("--lambda excludes --rho and --model")
    if args.sum_only and args.full:
        raise UsageError("--sum-only and --full are exclusive")
    sum_only = args.sum_only or (not args.full and args.d > Config.SUM_ONLY_THRESHOLD)
    if sum_only and not args.sum_only:
        logger.info(f"d={args.d} exceeds {Config.SUM_ONLY_THRESHOLD}, sampling sums only")

    family = _sample_family(args)
    if family is not None:
        batch = sample_family(family, args.d, args.p, args.n, args.seed, sum_only)
    else:
        if args.lambda_file:
            data = load_json(args.lambda_file, LAMBDA_SCHEMA)
            weights = MixtureWeights(np.asarray(data['lambda'], dtype=float))
        else:
            rays = enumerate_rays(args.d, args.p)
            weights = random_weights(len(rays), args.seed)
        batch = sample_mixture(args.d, args.p, weights, args.n, args.seed, sum_only)

    if batch.mode == SampleMode.SUM_ONLY:
        write_csv(batch.counts(), out, header=['y', 'count'])
    else:
        write_csv(batch.rows.tolist(), out)


def cmd_uniform_sample(args, out: TextIO):
    pmfs = sample_uniform_pmfs(args.d, args.p, args.n, args.seed)
    write_json([pmf.to_list() for pmf in pmfs], out)


def _load_counts(args) -> CountData:
    return CountData.from_matrix(read_binary_csv(args.data, header=args.header))


def cmd_mle(args, out: TextIO):
    counts = _load_counts(args)
    result = {'d': counts.d, 'n': counts.n}
    if args.p is None:
        pmf = map_H(mle_unconstrained(counts))
    else:
        pmf, weights = mle_fixed_p(counts, args.p)
        result['p'] = args.p
        result['lambda_hat'] = weights.weights
    result['f_hat'] = pmf.probs / binomials(pmf.d)
    result['pmf_hat'] = pmf.probs
    result['loglik'] = log_likelihood(counts, pmf)
    write_json(result, out)


def cmd_glr_test(args, out: TextIO):
    if args.h0 == 'exch-p' and args.p is None:
        raise UsageError("--h0 exch-p needs --p")
    counts = _load_counts(args)
    result = glr_test(counts, args.p if args.h0 == 'exch-p' else None, args.alpha)
    data = result.to_dict()
    data.update({'d': counts.d, 'n': counts.n})
    write_json(data, out)


def cmd_pex_rays(args, out: TextIO):
    spec = PartitionSpec.parse(args.d, args.groups)
    try:
        means = [float(v) for v in args.means.split(',')]
    except ValueError:
        raise UsageError(f"bad --means {args.means!r}")
    rays = pex_rays(spec, means)
    write_json(pex_rays_to_dict(spec, means, rays), out)


def cmd_families(args, out: TextIO):
    write_json(family_curves(args.d, args.p, args.steps), out)


def cmd_joint(args, out: TextIO):
    write_csv(joint_mean_correlation(args.d, args.n, args.seed).tolist(), out, header=['p', 'rho'])


COMMANDS: Dict[str, Callable] = {
    'rays': cmd_rays,
    'triangulate': cmd_triangulate,
    'measure-cdf': cmd_measure_cdf,
    'measure-dist': cmd_measure_dist,
    'bounds': cmd_bounds,
    'measure': cmd_measure,
    'sample': cmd_sample,
    'uniform-sample': cmd_uniform_sample,
    'mle': cmd_mle,
    'glr-test': cmd_glr_test,
    'pex-rays': cmd_pex_rays,
    'families': cmd_families,
    'joint': cmd_joint,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='exchpoly',
        description='Exchangeable and partially exchangeable Bernoulli polytopes',
    )
    parser.add_argument('--log-level', default=None, help='DEBUG, INFO, WARNING or ERROR (default: EXCHPOLY_LOG_LEVEL)')
    parser.add_argument('--output', '-o', default=None, help='write results to this file instead of standard output')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    p = sub.add_parser('rays', help='enumerate the extremal rays of S_d(p)')
    p.add_argument('--d', type=_positive_int, required=True, help='dimension')
    p.add_argument('--p', type=float, required=True, help='common mean in (0, 1)')
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument('--json', action='store_true', help='JSON output (default)')
    fmt.add_argument('--csv', action='store_true', help='CSV table: ray, j1, j2, mass1, mass2')

    p = sub.add_parser('triangulate', help='triangulate S_d(p), or S_d without --p')
    p.add_argument('--d', type=_positive_int, required=True, help='dimension')
    p.add_argument('--p', type=float, default=None, help='common mean; omit for all of S_d')
    p.add_argument('--method', choices=['gram-schmidt', 'pca'], default='gram-schmidt', help='affine-hull basis')

    p = sub.add_parser('measure-cdf', help='exact CDF of an expectation measure over S_d(p)')
    p.add_argument('--d', type=_positive_int, required=True, help='dimension')
    p.add_argument('--p', type=float, default=None, help='common mean; omit for all of S_d')
    p.add_argument('--measure', required=True, help='moment:k, cross:a, entropic:gamma, excess:k, correlation or utility:v0,...,vd')
    p.add_argument('--grid', type=_positive_int, default=1001, help='number of thresholds between the ray extrema')
    p.add_argument('--pdf', action='store_true', help='add the finite-difference density column f')
    p.add_argument('--delta', type=float, default=None, help='density step (default: range / 10000)')

    p = sub.add_parser('measure-dist', help='empirical CDF of a measure over uniform draws')
    p.add_argument('--d', type=_positive_int, required=True, help='dimension')
    p.add_argument('--p', type=float, default=None, help='common mean; omit for all of S_d')
    p.add_argument('--measure', required=True, help='any measure, e.g. entropy or quantile:0.9')
    p.add_argument('--n', type=_positive_int, required=True, help='number of draws')
    p.add_argument('--seed', type=_nonnegative_int, required=True, help='random seed')

    p = sub.add_parser('bounds', help='correlation range, or ray extrema of a measure')
    p.add_argument('--d', type=_positive_int, required=True, help='dimension')
    p.add_argument('--p', type=float, required=True, help='common mean in (0, 1)')
    p.add_argument('--measure', default=None, help='measure to bound (default: correlation range)')

    p = sub.add_parser('measure', help='evaluate a measure on one pmf')
    p.add_argument('--pmf', required=True, help='JSON file {"pmf": [p_0, ..., p_d]}')
    p.add_argument('--measure', required=True, help='measure spec, e.g. cross:2')

    p = sub.add_parser('sample', help='sample exchangeable binary vectors')
    p.add_argument('--d', type=_positive_int, required=True, help='dimension')
    p.add_argument('--p', type=float, required=True, help='common mean in (0, 1)')
    p.add_argument('--lambda', dest='lambda_file', default=None, help='JSON file {"lambda": [...]} over the rays')
    p.add_argument('--rho', type=float, default=None, help='target correlation')
    p.add_argument('--model', choices=[FamilyKind.ONE_FACTOR.value, FamilyKind.BETA_MIXTURE.value], default=None,
                   help='comparison family instead of the ray family')
    p.add_argument('--a', type=float, default=None, help='beta parameter a (with --model beta)')
    p.add_argument('--b', type=float, default=None, help='beta parameter b (with --model beta)')
    p.add_argument('--n', type=_nonnegative_int, required=True, help='number of draws')
    p.add_argument('--seed', type=_nonnegative_int, required=True, help='random seed')
    p.add_argument('--sum-only', action='store_true', help='emit y,count lines instead of rows')
    p.add_argument('--full', action='store_true', help='emit rows even above EXCHPOLY_SUM_ONLY_THRESHOLD')

    p = sub.add_parser('uniform-sample', help='pmfs drawn uniformly from S_d(p)')
    p.add_argument('--d', type=_positive_int, required=True, help='dimension')
    p.add_argument('--p', type=float, default=None, help='common mean; omit for all of S_d')
    p.add_argument('--n', type=_nonnegative_int, required=True, help='number of draws')
    p.add_argument('--seed', type=_nonnegative_int, required=True, help='random seed')

    for name, text in (('mle', 'maximum-likelihood fit in E_d or E_d(p)'),
                       ('glr-test', 'likelihood-ratio test of exchangeability')):
        p = sub.add_parser(name, help=text)
        p.add_argument('--data', required=True, help='CSV, one observation of d 0/1 entries per row')
        p.add_argument('--header', action='store_true', help='skip a header line')
        p.add_argument('--p', type=float, default=None, help='common mean (fixed-mean model)')
        if name == 'glr-test':
            p.add_argument('--h0', choices=['exch', 'exch-p'], default='exch', help='null hypothesis')
            p.add_argument('--alpha', type=float, default=0.05, help='test level')

    p = sub.add_parser('pex-rays', help='extremal points under partial exchangeability')
    p.add_argument('--d', type=_positive_int, required=True, help='dimension')
    p.add_argument('--groups', required=True, help='partition of 1..d, e.g. "1,2|3,4"')
    p.add_argument('--means', required=True, help='group means, e.g. "0.5,0.25"')

    p = sub.add_parser('families', help='sum pmfs of the correlation families')
    p.add_argument('--d', type=_positive_int, required=True, help='dimension')
    p.add_argument('--p', type=float, required=True, help='common mean in (0, 1)')
    p.add_argument('--steps', type=_positive_int, default=21, help='correlation grid size')

    p = sub.add_parser('joint', help='(p, rho) of uniform draws from E_d')
    p.add_argument('--d', type=_positive_int, required=True, help='dimension')
    p.add_argument('--n', type=_positive_int, required=True, help='number of draws')
    p.add_argument('--seed', type=_nonnegative_int, required=True, help='random seed')

    return parser


def dispatch(argv: Optional[List[str]] = None, out: Optional[TextIO] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    configure_logging(level=args.log_level)
    handler = COMMANDS[args.command]

    try:
        if args.output:
            with open(args.output, 'w', newline='') as handle:
                handler(args, handle)
        else:
            handler(args, out or sys.stdout)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        logger.error(f"{args.command}: {e}")
        return 2
    except (ExchPolyError, OSError, json.JSONDecodeError, jsonschema.ValidationError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 1

    logger.info(f"{args.command} completed")
    return 0


def main():
    sys.exit(dispatch())


if __name__ == '__main__':
    main()
