# Command-line front end: radii and bounds for a model, solver runs on the benchmark problems, sampling checks of
# models, and reproduction of the reference numbers.
#
#   ntraub radius|bounds|solve|verify|reproduce [--config FILE] [--out PATH] [--format json|csv|table] ...
#
# Exit codes: 0 success, 2 bad input or violated hypotheses, 3 singular Jacobian, 4 no convergence, 5 reproduction
# mismatch.

import argparse
import logging
import sys
import warnings
from dataclasses import dataclass, field
import dask
import numpy as np
import pandas as pd
from . import averages as av
from . import bounds
from . import ioutil
from . import problems
from . import radii
from . import solver
from . import util
from .exceptions import (ConfigError, DomainError, InsufficientData, ModelError, NoRadiusError, NotFoundError,
                         QuadratureError, SingularJacobian)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SINGULAR = 3
EXIT_NO_CONVERGENCE = 4
EXIT_MISMATCH = 5

DEFAULT_OPTIONS = {'problem': 'motivational',
                   'format': 'table',
                   'out': None,
                   'seed': problems.DEFAULT_SEED,
                   'tol': 1e-12,
                   'max_iter': 50,
                   'method': 'traub',
                   'norm': 'max',
                   'pairing': 'diagonal',
                   'n_samples': 10**4,
                   'construction': None,
                   't_max': 6,
                   'quiet': False}

# Reproduction tolerances for values quoted to 6 decimals and for exactly derived ones
QUOTED_TOL = 1e-6
EXACT_TOL = 1e-12
RADIUS_ORACLE_TOL = 1e-8

CANDIDATES_EX63 = ((1.0, 50), (10.0, 50), (50.0, 50), (100.0, 200))


@dataclass
class CommandResult:
    """What a command produced: a table for csv/table output, a payload for json output, summary lines for the
    table view and the exit code.
    """

    frame: pd.DataFrame
    payload: dict
    lines: list = field(default_factory=list)
    code: int = EXIT_OK
    float_format: str = '{:.6f}'

    def render(self, fmt):
        if fmt == 'json':
            return ioutil.dumps(self.payload)
        elif fmt == 'csv':
            return self.frame.to_csv(index=False)
        elif fmt == 'table':
            table = self.frame.to_string(index=False, float_format=self.float_format.format)
            return '\n'.join(list(self.lines) + [table])
        raise ConfigError(f'Unknown output format {fmt!r}; expected json, csv or table')


def resolve_case(opts):
    return problems.get_case(opts['problem'])


def resolve_model(config, case=None):
    """Model from the config's "model" entry, falling back to the benchmark case's own model."""

    if config.get('model') is not None:
        return av.LipschitzModel.from_dict(config['model'])
    if case is None:
        raise ConfigError('No model given: pass a config with a "model" entry or a problem name')
    return case.model


def resolve_x0(value, case):
    """x0 from a list, a scalar (filled to the problem dimension), a comma-separated string or None/'default'."""

    p = case.problem
    if value is None or value == 'default':
        return np.array(case.x0, dtype=float)
    if isinstance(value, str):
        try:
            value = [float(v) for v in value.split(',')]
        except ValueError as e:
            raise ConfigError(f'Cannot parse x0 {value!r}') from e
    x0 = np.atleast_1d(np.asarray(value, dtype=float))
    if x0.size == 1 and p.dim > 1:
        x0 = np.full(p.dim, x0[0])
    return p.check_point(x0)


def _radius_row(label, result):
    return {'theorem': label, 'delta': result.delta, 'lhs': result.condition_lhs_at_delta,
            'method': result.method, 'clamped': result.clamped, 'notes': '; '.join(result.notes)}


def cmd_radius(config, opts):
    """Every radius the model supports, the classical and refined non-decreasing radii when they apply, and
    delta-bar.
    """

    case = resolve_case(opts) if config.get('model') is None else None
    model = resolve_model(config, case)

    results = [(r.theorem, r) for r in radii.radius_report(model)]
    payload = {'radii': [r.to_dict() for _, r in results], 'delta_bar': None}

    if model.radius_avg is not None and model.radius_nondecreasing and model.center_nondecreasing:
        classical = radii.radius_t31(model.classical())
        results.insert(0, ('T31-classical', classical))
        payload['classical'] = classical.to_dict()

    if model.refined_avg is not None:
        try:
            refined = radii.refined_model(model)
            payload['delta_bar'] = refined.delta_bar
            if refined.radius_nondecreasing and refined.center_nondecreasing:
                r = radii.radius_t31(refined)
                results.append(('T31-refined', r))
                payload['refined'] = r.to_dict()
        except (NotFoundError, ModelError) as e:
            log.warning('No refined radius: %s', e)
            payload['refined_error'] = str(e)

    frame = pd.DataFrame([_radius_row(label, r) for label, r in results],
                         columns=['theorem', 'delta', 'lhs', 'method', 'clamped', 'notes'])
    lines = [] if payload['delta_bar'] is None else [f'delta_bar = {payload["delta_bar"]:.6f}']
    return CommandResult(frame=frame, payload=payload, lines=lines)


def _trace_bounds(trace, model, n_rows):
    """bound_linear and bound_order5 for rows t = 0..n_rows-1 of a three-step trace, NaN where not available."""

    nan = np.full(n_rows, np.nan)
    try:
        seeds = bounds.seeds_from_trace(trace)
    except InsufficientData:
        return nan, nan
    if seeds.degenerate or n_rows < 2:
        return nan, nan

    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        try:
            report = bounds.constants_report(model, seeds)
        except ModelError as e:
            log.warning('No a-priori bounds for this start: %s', e)
            return nan, nan
        seq = bounds.bound_sequences(report, t_max=n_rows - 1)

    first = np.array([seeds.rho_x0])
    return (np.concatenate([first, seq['bound_linear'].to_numpy()]),
            np.concatenate([first, seq['bound_order5'].to_numpy()]))


def cmd_solve(config, opts):
    case = resolve_case(opts)
    x0 = resolve_x0(config.get('x0'), case)
    model = resolve_model(config, case)

    trace = solver.solve(case.problem, x0, tol=opts['tol'], max_iter=opts['max_iter'], norm=opts['norm'],
                         method=opts['method'])
    frame = trace.to_frame()

    if opts['method'] == 'traub':
        frame['bound_linear'], frame['bound_order5'] = _trace_bounds(trace, model, len(frame))
    else:
        frame['bound_linear'] = frame['bound_order5'] = np.nan

    payload = trace.to_dict()
    try:
        frame['coc'] = solver.coc_series(trace)
        payload['coc'] = solver.coc_estimate(trace)
    except InsufficientData as e:
        frame['coc'] = np.nan
        payload['coc'] = []
        log.info('No COC estimate: %s', e)
    payload['trace'] = frame.to_dict(orient='records')

    lines = [f'status: {trace.status}', f'iterations: {trace.iterations}',
             f'final residual: {trace.final_residual:.3e}']
    if payload['coc']:
        lines.append('COC: ' + ', '.join(f'{v:.3f}' for v in payload['coc']))

    code = EXIT_OK if trace.converged else EXIT_NO_CONVERGENCE
    if not trace.converged:
        log.error('%s did not converge: %s after %d steps', case.name, trace.status, trace.iterations)
    return CommandResult(frame=frame, payload=payload, lines=lines, code=code, float_format='{:.6e}')


def _distances(config):
    spec = config.get('distances')
    if not isinstance(spec, dict):
        raise ConfigError(f'"distances" must be an object with rho_x0, rho_y0, rho_z0, got {spec!r}')
    try:
        return bounds.SeedDistances(*(float(av.parse_number(spec[k])) for k in ('rho_x0', 'rho_y0', 'rho_z0')))
    except KeyError as e:
        raise ConfigError(f'"distances" is missing {e}') from e


def cmd_bounds(config, opts):
    """Contraction constants and bound sequences, from explicit distances or from a first step on a benchmark."""

    t_max = int(opts['t_max'])
    if config.get('distances') is not None:
        model = resolve_model(config)
        seeds = _distances(config)
        errors = None
    else:
        case = resolve_case(opts)
        model = resolve_model(config, case)
        x0 = resolve_x0(config.get('x0'), case)
        trace = solver.solve(case.problem, x0, tol=opts['tol'], max_iter=t_max, norm=opts['norm'])
        seeds = bounds.seeds_from_trace(trace)
        errors = trace.errors()

    report = bounds.constants_report(model, seeds)
    frame = bounds.bound_sequences(report, t_max=t_max)
    if errors is not None:
        observed = np.full(t_max, np.nan)
        n = min(t_max, errors.size - 1)
        observed[:n] = errors[1:n+1]
        frame.insert(1, 'err_x', observed)

    payload = {'constants': report.to_dict(), 'bounds': frame.to_dict(orient='records')}

    lines = []
    for name, values, flag in (('C', report.c, 'c_lt_1'), ('q', report.q, 'q_lt_1'), ('q_t52', report.q_t52,
                                                                                    'q_t52_lt_1')):
        if values is not None:
            ok = report.flags.get(flag, all(v < 1 for v in values))
            lines.append(f'{name} = ' + ', '.join(f'{v:.6f}' for v in values) + f'  (all < 1: {ok})')
    if report.e_factor is not None:
        lines.append(f'E = {report.e_factor:.6f}  (< 1: {report.flags["E_lt_1"]})')
    lines.append(f'F = {report.f_factor:.6f}  (< 1: {report.flags["F_lt_1"]})')
    if report.flags['converged_degenerate']:
        lines.append('degenerate seeds: a sub-step landed on the root')

    return CommandResult(frame=frame, payload=payload, lines=lines, float_format='{:.6e}')


def _verify_models(config, case):
    """(label, model) pairs: the case model, or one model per candidate radius average over the case's kappa0."""

    candidates = config.get('candidates')
    if not candidates:
        return [('model', resolve_model(config, case))]

    center = resolve_model(config, case).center_avg
    out = []
    for spec in candidates:
        kappa = av.AverageFunction.from_dict(spec)
        out.append((ioutil.dumps(kappa.to_dict(), indent=None), av.LipschitzModel(radius_avg=kappa,
                                                                                   center_avg=center)))
    return out


def _report_row(label, report):
    d = report.to_dict()
    d.pop('worst_radius_point')
    return dict({'model': label}, **d)


def cmd_verify(config, opts):
    case = resolve_case(opts)
    points = None
    if opts['construction'] is not None:
        k = problems.construction_points(range(2, int(opts['construction']) + 1))
        points = [(np.array([r.x]), np.array([r.y]), r.tau) for r in k.itertuples()]

    rows, payload = [], {'problem': case.name, 'reports': []}
    for label, model in _verify_models(config, case):
        report = problems.verify_model(case.problem, model, n_samples=int(opts['n_samples']), seed=int(opts['seed']),
                                       radius=case.ball_radius, pairing=opts['pairing'], points=points,
                                       norm=opts['norm'], progress=not opts['quiet'])
        rows.append(_report_row(label, report))
        payload['reports'].append(dict(report.to_dict(), model=label))

    return CommandResult(frame=pd.DataFrame(rows), payload=payload, float_format='{:.6g}')


def _check(example, quantity, value, expected, tol):
    ok = bool(abs(value - expected) <= tol)
    if not ok:
        log.error('%s: %s = %.12g, expected %.12g within %.1e', example, quantity, value, expected, tol)
    return {'example': example, 'quantity': quantity, 'value': float(value), 'expected': float(expected),
            'tol': tol, 'ok': ok}


def reproduce_ex61():
    """Radii of the motivational example: classical, with the center average, and refined."""

    case = problems.make_motivational()
    m = case.model
    d0 = radii.radius_t31(m.classical()).delta
    d1 = radii.radius_t31(m).delta
    refined = radii.refined_model(m)
    d2 = radii.radius_t31(refined).delta

    rows = [_check('ex61', 'delta0', d0, case.expected['delta0'], QUOTED_TOL),
            _check('ex61', 'delta1', d1, case.expected['delta1'], QUOTED_TOL),
            _check('ex61', 'delta2', d2, case.expected['delta2'], QUOTED_TOL),
            _check('ex61', 'delta_bar', refined.delta_bar, case.expected['delta_bar'], RADIUS_ORACLE_TOL)]

    ordered = bool(d0 < d1 < d2)
    if not ordered:
        log.error('ex61: radii are not increasing: %.12g, %.12g, %.12g', d0, d1, d2)
    rows.append({'example': 'ex61', 'quantity': 'delta0<delta1<delta2', 'value': float(ordered), 'expected': 1.0,
                 'tol': 0.0, 'ok': ordered})
    return rows


def reproduce_ex62():
    """Radius of the Hammerstein discretization and a solve from 0.3 ones, with its residual and error trace."""

    case = problems.make_hammerstein(8)
    r = radii.radius_t31(case.model, method='bisection')
    rows = [_check('ex62', 'delta_t31', r.delta, case.expected['delta_t31'], RADIUS_ORACLE_TOL)]

    trace = solver.solve(case.problem, case.x0)
    rows.append({'example': 'ex62', 'quantity': 'iterations', 'value': float(trace.iterations), 'expected': np.nan,
                 'tol': np.nan, 'ok': trace.converged})
    rows.append({'example': 'ex62', 'quantity': 'final_residual', 'value': float(trace.final_residual),
                 'expected': 0.0, 'tol': 1e-12, 'ok': trace.converged})
    for r in trace.records:
        for key in ('res_norm', 'err_x'):
            rows.append({'example': 'ex62', 'quantity': f'{key}[{r["t"]}]', 'value': float(r[key]),
                         'expected': np.nan, 'tol': np.nan, 'ok': True})
    return rows


def reproduce_ex63():
    """Center-only radius of the scalar-sin problem, its F-bound sequence, and the failure of every constant
    radius average at the construction points.
    """

    case = problems.make_scalar_sin()
    r = radii.radius_t52(case.model.center_avg)
    rows = [_check('ex63', 'delta_t52', r.delta, case.expected['delta_t52'], EXACT_TOL)]

    trace = solver.solve(case.problem, case.x0)
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        report = bounds.constants_report(case.model, bounds.seeds_from_trace(trace))
        seq = bounds.bound_sequences(report, t_max=4)
    for t, value in zip(seq['t'], seq['bound_f']):
        rows.append({'example': 'ex63', 'quantity': f'bound_f[{t}]', 'value': float(value), 'expected': np.nan,
                     'tol': np.nan, 'ok': True})

    for c, k_max in CANDIDATES_EX63:
        model = av.LipschitzModel(radius_avg=av.Constant(c), center_avg=case.model.center_avg)
        pts = problems.construction_points(range(2, k_max + 1))
        report = problems.verify_model(case.problem, model,
                                       points=[(np.array([p.x]), np.array([p.y]), p.tau) for p in pts.itertuples()])
        ok = report.radius_violations > 0
        if not ok:
            log.error('ex63: constant radius average %g passed every construction point', c)
        rows.append({'example': 'ex63', 'quantity': f'violations(kappa={c:g}, k<={k_max})',
                     'value': float(report.radius_violations), 'expected': np.nan, 'tol': np.nan, 'ok': ok})
    return rows


EXAMPLES = {'ex61': reproduce_ex61, 'ex62': reproduce_ex62, 'ex63': reproduce_ex63}


def cmd_reproduce(which):
    if which == 'all':
        tasks = [dask.delayed(EXAMPLES[name])() for name in sorted(EXAMPLES)]
        # The examples enter catch_warnings on worker threads; the filter list is restored here, on the main thread,
        # once they have all finished
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            parts = dask.compute(*tasks, scheduler='threads')
        rows = [row for part in parts for row in part]
    elif which in EXAMPLES:
        rows = EXAMPLES[which]()
    else:
        raise ConfigError(f'Unknown example {which!r}; expected one of {sorted(EXAMPLES)} or all')

    frame = pd.DataFrame(rows, columns=['example', 'quantity', 'value', 'expected', 'tol', 'ok'])
    passed = bool(frame['ok'].all())
    payload = {'which': which, 'passed': passed, 'checks': rows}
    lines = [f'reproduce {which}: {"all checks passed" if passed else "MISMATCH"}']
    return CommandResult(frame=frame, payload=payload, lines=lines, code=EXIT_OK if passed else EXIT_MISMATCH)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None, help='JSON file with model, problem, x0 and options')
    common.add_argument('--out', type=str, default=None, help='Write the output here instead of stdout')
    common.add_argument('--format', choices=['json', 'csv', 'table'], default=None)
    common.add_argument('--problem', type=str, default=None,
                        help='motivational, motivational-affine, hammerstein:n or scalar-sin')
    common.add_argument('--x0', type=str, default=None, help='Comma-separated start, or a scalar filled to dim')
    common.add_argument('--seed', type=int, default=None)
    common.add_argument('--tol', type=float, default=None)
    common.add_argument('--max-iter', dest='max_iter', type=int, default=None)
    common.add_argument('--norm', choices=['max', 'euclidean'], default=None)
    common.add_argument('--verbose', action='store_true', help='Log at DEBUG level')
    common.add_argument('--quiet', action='store_true', default=None, help='No progress bars')

    parser = argparse.ArgumentParser(prog='ntraub', description='Convergence radii, error bounds and experiments '
                                                                'for the three-step Newton-Traub iteration')
    sub = parser.add_subparsers(dest='command', required=True)

    sub.add_parser('radius', parents=[common], help='Convergence and uniqueness radii of a model')

    p = sub.add_parser('bounds', parents=[common], help='Contraction constants and a-priori bound sequences')
    p.add_argument('--t-max', dest='t_max', type=int, default=None)

    p = sub.add_parser('solve', parents=[common], help='Run the solver on a benchmark problem')
    p.add_argument('--method', choices=['traub', 'newton'], default=None)

    p = sub.add_parser('verify', parents=[common], help='Sample a Lipschitz model against a problem')
    p.add_argument('--pairing', choices=['diagonal', 'independent'], default=None)
    p.add_argument('--n-samples', dest='n_samples', type=int, default=None)
    p.add_argument('--construction', type=int, default=None,
                   help='Check the points x = y = 1/k, k = 2..K, instead of random samples')

    p = sub.add_parser('reproduce', parents=[common], help='Recompute the reference numbers')
    p.add_argument('which', choices=sorted(EXAMPLES) + ['all'])

    return parser


def _options(args, config):
    """Command-line flags over config options over DEFAULT_OPTIONS."""

    flags = {k: v for k, v in vars(args).items() if v is not None and k in DEFAULT_OPTIONS}
    from_config = config.get('options', {})
    if not isinstance(from_config, dict):
        raise ConfigError(f'"options" must be an object, got {type(from_config).__name__}')
    if 'problem' in config and 'problem' not in flags:
        flags['problem'] = config['problem']

    opts = util.dict_add(flags, util.dict_add(from_config, DEFAULT_OPTIONS))
    if not opts['tol'] > 0:
        raise ConfigError(f'tol must be positive, got {opts["tol"]}')
    return opts


def run(args):
    config = ioutil.load_config(args.config) if args.config is not None else {}
    if args.x0 is not None:
        config = dict(config, x0=args.x0)
    opts = _options(args, config)

    if args.command == 'radius':
        result = cmd_radius(config, opts)
    elif args.command == 'bounds':
        result = cmd_bounds(config, opts)
    elif args.command == 'solve':
        result = cmd_solve(config, opts)
    elif args.command == 'verify':
        result = cmd_verify(config, opts)
    else:
        result = cmd_reproduce(args.which)

    text = result.render(opts['format'])
    if opts['out'] is not None:
        ioutil.write_text(opts['out'], text)
    else:
        print(text)
    return result.code


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s')

    try:
        return run(args)
    except SingularJacobian as e:
        log.error('Singular Jacobian at %s: %s', e.which, e)
        return EXIT_SINGULAR
    except (ModelError, NoRadiusError, ConfigError, DomainError, NotFoundError, InsufficientData,
            QuadratureError) as e:
        log.error('%s: %s', type(e).__name__, e)
        return EXIT_INPUT
    except OSError as e:
        log.error('%s', e)
        return EXIT_INPUT


if __name__ == '__main__':
    sys.exit(main())
