# Contraction constants and a-priori error bounds.
#
# Seeds are the distances rho(x0), rho(y0), rho(z0) to the root. In benchmark mode they come from an actual first step
# (seeds_from_trace); in predictive mode they are worst-case propagated from rho(x0) alone (predict_seeds).

import warnings
from dataclasses import dataclass, field
import numpy as np
import pandas as pd
from tqdm import tqdm
from . import averages as av
from . import solver
from .exceptions import InsufficientData, ModelError

CLOSED_FORM_TOL = 1e-10
VARIANTS = ('T31', 'T51', 'T52')


@dataclass(frozen=True)
class SeedDistances:
    """rho(x0), rho(y0), rho(z0): distances of the first iterate and its two sub-iterates to the root."""

    rho_x0: float
    rho_y0: float
    rho_z0: float

    def __post_init__(self):
        for name in ('rho_x0', 'rho_y0', 'rho_z0'):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ValueError(f'{name} must be finite and nonnegative, got {value}')
        return

    @property
    def degenerate(self):
        """True when a sub-step landed exactly on the root, so ratios involving rho(y0) rho(z0) are undefined."""
        return self.rho_y0 == 0 or self.rho_z0 == 0

    def to_dict(self):
        return {'rho_x0': self.rho_x0, 'rho_y0': self.rho_y0, 'rho_z0': self.rho_z0}


def _center_integrals(center, *rhos, tol=av.QUAD_TOL):
    out = []
    for rho in rhos:
        k0 = av.integral_K(center, 2*rho, tol)
        if k0 >= 1:
            raise ModelError(f'int_0^(2 rho) kappa0 = {k0} >= 1 at rho={rho}; the point is outside every ball the '
                             f'theory covers')
        out.append(k0)
    return out


def _ratio(numerator, total):
    return numerator/total if total > 0 else 0.0


def constants_C(model, d, tol=av.QUAD_TOL):
    """C1, C2, C3 of the non-decreasing average theorem.

    Parameters
    ----------
    model : averages.LipschitzModel
    d : SeedDistances
    tol : float

    Returns
    -------
    tuple of float
        (C1, C2, C3). Terms whose distance sum is zero are 0 by continuity.
    """

    kappa = model.require_radius('constants_C')
    k0x, k0y = _center_integrals(model.center_avg, d.rho_x0, d.rho_y0, tol=tol)

    sxy = d.rho_x0 + d.rho_y0
    syz = d.rho_y0 + d.rho_z0
    c1 = _ratio(av.integral_M(kappa, 2*d.rho_x0, tol), 2*d.rho_x0)/(1 - k0x)
    c2 = _ratio(av.integral_M(kappa, sxy, tol), sxy)/(1 - k0x)
    c3 = _ratio(av.integral_M(kappa, syz, tol), syz)/(1 - k0y)
    return c1, c2, c3


def constants_q_t51(model, d, tol=av.QUAD_TOL):
    """q1, q2, q3 of the weak-average theorem: int kappa over 2rho(x0), rho(x0)+rho(y0) and rho(y0)+rho(z0), each over
    1 - int_0^(2rho) kappa0.
    """

    kappa = model.require_radius('constants_q_t51')
    k0x, k0y = _center_integrals(model.center_avg, d.rho_x0, d.rho_y0, tol=tol)

    q1 = av.integral_K(kappa, 2*d.rho_x0, tol)/(1 - k0x)
    q2 = av.integral_K(kappa, d.rho_x0 + d.rho_y0, tol)/(1 - k0x)
    q3 = av.integral_K(kappa, d.rho_y0 + d.rho_z0, tol)/(1 - k0y)
    return q1, q2, q3


def constants_q_t52(center, d, tol=av.QUAD_TOL):
    """q1, q2, q3 of the center-only theorem.

    Parameters
    ----------
    center : averages.AverageFunction or averages.LipschitzModel
    d : SeedDistances
    tol : float

    Returns
    -------
    tuple of float
    """

    center = center.center_avg if isinstance(center, av.LipschitzModel) else center
    k0x, k0y = _center_integrals(center, d.rho_x0, d.rho_y0, tol=tol)
    k0z = av.integral_K(center, 2*d.rho_z0, tol)

    return 2*k0x/(1 - k0x), (k0x + k0y)/(1 - k0x), (k0y + k0z)/(1 - k0y)


def _power_sequence(factor, exponents, rho_x0):
    with np.errstate(over='ignore', under='ignore'):
        return np.power(float(factor), exponents)*rho_x0


def _vacuous(name, factor):
    if factor >= 1:
        warnings.warn(f'{name}={factor:.6g} >= 1; the bound sequence is vacuous')
        return True
    return False


def error_seq_order5(e_factor, rho_x0, t_max):
    """E**(5**t - 1) * rho(x0) for t = 1..t_max.

    Returns
    -------
    np.ndarray
        Bounds, underflowing to 0. A warning is issued when E >= 1.
    """

    _vacuous('E', e_factor)
    t = np.arange(1, t_max + 1, dtype=float)
    return _power_sequence(e_factor, 5.0**t - 1, rho_x0)


def error_seq_linear(q_product, rho_x0, t_max):
    """(q1 q2 q3)**t * rho(x0) for t = 1..t_max."""

    _vacuous('q1*q2*q3', q_product)
    t = np.arange(1, t_max + 1, dtype=float)
    return _power_sequence(q_product, t, rho_x0)


def error_seq_weak(factor, a, rho_x0, t_max):
    """factor**((1+3a+a**2)**t - 1) * rho(x0) for t = 1..t_max; a = 1 gives error_seq_order5."""

    if not 0 <= a <= 1:
        raise ValueError(f'a must lie in [0, 1], got {a}')
    _vacuous('E', factor)
    t = np.arange(1, t_max + 1, dtype=float)
    return _power_sequence(factor, (1 + 3*a + a**2)**t - 1, rho_x0)


def per_step_bound(model, rho_pair, step='y', variant='T31', tol=av.QUAD_TOL):
    """Sharp bound on the error of one sub-step from the errors of the previous ones.

    Parameters
    ----------
    model : averages.LipschitzModel
        The 'T52' variant only uses kappa0 and also accepts a bare center average
    rho_pair : tuple of float
        (rho_a, rho_b): (rho(x_t), rho(y_t)) for the z-step, (rho(y_t), rho(z_t)) for the x-step. The y-step only
        uses rho_a = rho(x_t).
    step : str
        'y', 'z' or 'x'
    variant : str
        'T31' or 'T51' for the radius-average forms, 'T52' for the center-only forms
    tol : float

    Returns
    -------
    float
    """

    if step not in ('y', 'z', 'x'):
        raise ValueError(f'Unknown sub-step {step!r}')
    if variant not in VARIANTS:
        raise ValueError(f'Unknown bound variant {variant!r}; expected one of {VARIANTS}')

    rho_a, rho_b = rho_pair
    center = model.center_avg if isinstance(model, av.LipschitzModel) else model
    (k0a,) = _center_integrals(center, rho_a, tol=tol)

    if variant == 'T52':
        if step == 'y':
            return (rho_a*k0a + av.integral_center_moment(center, rho_a, tol))/(1 - k0a)
        return (rho_b*k0a + av.integral_center_moment(center, rho_b, tol))/(1 - k0a)

    if not isinstance(model, av.LipschitzModel):
        raise ModelError(f'The {variant} per-step bound needs a LipschitzModel with a radius average')
    kappa = model.require_radius(f'The {variant} per-step bound')
    if step == 'y':
        return av.integral_M(kappa, 2*rho_a, tol)/(2*(1 - k0a))
    return av.integral_segment_moment(kappa, rho_a, rho_b, tol)/(1 - k0a)


def closed_form_constants(model, d):
    """Corollary closed forms of the constants, for the kinds that have them.

    Returns
    -------
    dict
        Any of 'c' (constant or affine averages), 'q_t51' (power averages with a shared exponent) and 'q_t52'
        (power or rational kappa0), each a tuple of three floats
    """

    kappa = model.radius_avg if isinstance(model, av.LipschitzModel) else None
    center = model.center_avg if isinstance(model, av.LipschitzModel) else model
    rx, ry, rz = d.rho_x0, d.rho_y0, d.rho_z0
    out = {}

    if isinstance(kappa, av.Constant) and isinstance(center, av.Constant):
        k, k0 = kappa.k, center.k
        out['c'] = (k*rx/(1 - 2*k0*rx),
                    k*(rx + ry)/(2*(1 - 2*k0*rx)),
                    k*(ry + rz)/(2*(1 - 2*k0*ry)))
    elif isinstance(kappa, (av.Affine, av.Constant)) and isinstance(center, (av.Affine, av.Constant)):
        g, s = (kappa.gamma, kappa.slope) if isinstance(kappa, av.Affine) else (kappa.k, 0.0)
        g0, s0 = (center.gamma, center.slope) if isinstance(center, av.Affine) else (center.k, 0.0)

        def denom(r):
            return 1 - 2*g0*r - 2*s0*r**2

        out['c'] = (rx*(g + 4/3*s*rx)/denom(rx),
                    (rx + ry)*(g/2 + s/3*(rx + ry))/denom(rx),
                    (ry + rz)*(g/2 + s/3*(ry + rz))/denom(ry))

    if isinstance(kappa, av.Power) and isinstance(center, av.Power) and kappa.a == center.a:
        c, c0, a = kappa.c, center.c, kappa.a
        out['q_t51'] = (c*a*2**a*rx**a/((1 + a)*(1 - 2**a*c0*rx**a)),
                        c*a*(rx + ry)**a/((a + 1)*(1 - 2**a*c0*rx**a)),
                        c*a*(ry + rz)**a/((a + 1)*(1 - 2**a*c0*ry**a)))

    if isinstance(center, av.Power):
        c0, a = center.c, center.a
        out['q_t52'] = (c0*2**(a + 1)*rx**a/(1 - 2**a*c0*rx**a),
                        c0*2**a*(rx**a + ry**a)/(1 - 2**a*c0*rx**a),
                        c0*2**a*(ry**a + rz**a)/(1 - 2**a*c0*ry**a))
    elif isinstance(center, av.Rational):
        g, c0 = center.gamma, center.c0
        wx, wy, wz = (1 - 2*g*rx)**2, (1 - 2*g*ry)**2, (1 - 2*g*rz)**2
        out['q_t52'] = ((2*c0 - 2*c0*wx)/(wx*(1 + c0) - c0),
                        ((c0 - c0*wx)*wy + (c0 - c0*wy)*wx)/((wx*(1 + c0) - c0)*wy),
                        ((c0 - c0*wy)*wz + (c0 - c0*wz)*wy)/((wy*(1 + c0) - c0)*wz))

    return out


def predict_seeds(model, rho_x0, variant='T51', tol=av.QUAD_TOL):
    """Worst-case seeds when the root is unknown: rho(y0) <= q1 rho(x0), rho(z0) <= q2 q1 rho(x0).

    Parameters
    ----------
    model : averages.LipschitzModel
    rho_x0 : float
    variant : str
        'T51' (radius-average q's) or 'T52' (center-only q's)

    Returns
    -------
    SeedDistances
    """

    qfun = {'T51': constants_q_t51, 'T52': constants_q_t52}
    if variant not in qfun:
        raise ValueError(f'Seed prediction needs variant T51 or T52, got {variant!r}')

    q1 = qfun[variant](model, SeedDistances(rho_x0, 0.0, 0.0), tol)[0]
    rho_y0 = q1*rho_x0
    q2 = qfun[variant](model, SeedDistances(rho_x0, rho_y0, 0.0), tol)[1]
    return SeedDistances(rho_x0, rho_y0, q2*rho_y0)


def seeds_from_trace(trace):
    """Seeds from the first record of a solver trace on a problem with a known root."""

    if not trace.records or trace.records[0].get('err_x') is None:
        raise InsufficientData('Seeds need a trace with known-root errors')
    first = trace.records[0]
    if first.get('err_y') is None:
        # Converged at x0: both sub-iterates coincide with it
        return SeedDistances(first['err_x'], first['err_x'], first['err_x'])
    return SeedDistances(first['err_x'], first['err_y'], first['err_z'])


@dataclass(frozen=True)
class ContractionConstants:
    """Every contraction constant computable for a model and a set of seeds.

    c1..c3 are only present when the non-decreasing average hypotheses hold; q1..q3 are the weak-average q's when the
    model has a radius average and the center-only q's otherwise (see `variant`).
    """

    c1: float = None
    c2: float = None
    c3: float = None
    q1: float = None
    q2: float = None
    q3: float = None
    e_factor: float = None
    f_factor: float = None
    variant: str = 'T52'
    e_factor_printed: float = None
    q_t52: tuple = None
    flags: dict = field(default_factory=dict)
    closed_forms: dict = field(default_factory=dict)
    seeds: SeedDistances = None

    @property
    def c(self):
        return None if self.c1 is None else (self.c1, self.c2, self.c3)

    @property
    def q(self):
        return None if self.q1 is None else (self.q1, self.q2, self.q3)

    def linear_factor(self):
        """Smallest valid q1 q2 q3 among the weak-average and center-only q's, or None when none is below 1."""

        candidates = []
        for qs in (self.q if self.variant != 'T52' else None, self.q_t52):
            if qs is not None and all(q < 1 for q in qs):
                candidates.append(float(np.prod(qs)))
        return min(candidates) if candidates else None

    def to_dict(self):
        return {'c': list(self.c) if self.c is not None else None,
                'q': list(self.q) if self.q is not None else None,
                'q_t52': list(self.q_t52) if self.q_t52 is not None else None,
                'E': self.e_factor,
                'E_printed': self.e_factor_printed,
                'F': self.f_factor,
                'variant': self.variant,
                'flags': dict(self.flags),
                'closed_forms': {k: list(v) for k, v in self.closed_forms.items()},
                'seeds': self.seeds.to_dict() if self.seeds is not None else None}


ConstantsReport = ContractionConstants


def constants_report(model, d, a=1.0, tol=av.QUAD_TOL):
    """Contraction constants, E and F factors, hypothesis flags and closed-form cross-checks for one set of seeds.

    Parameters
    ----------
    model : averages.LipschitzModel
    d : SeedDistances
    a : float
        Exponent of the kappa_a hypothesis used for the weak bound sequences
    tol : float

    Returns
    -------
    ContractionConstants
    """

    kappa = model.radius_avg
    flags = {}
    values = {}

    if kappa is not None and model.radius_nondecreasing and model.center_nondecreasing:
        values['c1'], values['c2'], values['c3'] = constants_C(model, d, tol)
        flags['c_lt_1'] = bool(max(values['c1'], values['c2'], values['c3']) < 1)

    q_t52 = constants_q_t52(model.center_avg, d, tol)
    flags['q_t52_lt_1'] = bool(max(q_t52) < 1)

    if kappa is not None:
        values['q1'], values['q2'], values['q3'] = constants_q_t51(model, d, tol)
        variant = 'T31' if 'c1' in values else 'T51'
        flags['q_lt_1'] = bool(max(values['q1'], values['q2'], values['q3']) < 1)
    else:
        values['q1'], values['q2'], values['q3'] = q_t52
        variant = 'T52'

    flags['converged_degenerate'] = d.degenerate
    if d.degenerate:
        warnings.warn('A first sub-step landed exactly on the root; E and F are reported as 0')
        ratio = 0.0
    else:
        ratio = d.rho_x0**2/(d.rho_y0*d.rho_z0)

    if 'c1' in values:
        values['e_factor'] = values['c1']**2*values['c2']*ratio
        values['e_factor_printed'] = values['c1']*values['c2']*ratio
        flags['E_lt_1'] = bool(values['e_factor'] < 1)
        if not flags['E_lt_1']:
            warnings.warn(f'E={values["e_factor"]:.6g} >= 1; the order-five bound is vacuous for these seeds')

    values['f_factor'] = q_t52[0]**2*q_t52[1]*ratio
    flags['F_lt_1'] = bool(values['f_factor'] < 1)
    if not flags['F_lt_1']:
        warnings.warn(f'F={values["f_factor"]:.6g} >= 1; the center-only order bound is vacuous for these seeds')

    closed = closed_form_constants(model, d)
    computed = {'c': (values.get('c1'), values.get('c2'), values.get('c3')),
                'q_t51': (values['q1'], values['q2'], values['q3']) if kappa is not None else None,
                'q_t52': q_t52}
    mismatches = []
    for name, reference in closed.items():
        ours = computed.get(name)
        if ours is None or ours[0] is None:
            continue
        if not np.allclose(ours, reference, rtol=CLOSED_FORM_TOL, atol=1e-14):
            mismatches.append(name)
            warnings.warn(f'Closed-form {name} {tuple(reference)} differs from the integral form {tuple(ours)}')
    flags['closed_form_mismatch'] = mismatches

    return ContractionConstants(variant=variant, q_t52=tuple(q_t52), flags=flags, closed_forms=closed, seeds=d,
                                **values)


def bound_sequences(report, rho_x0=None, t_max=6, a=1.0):
    """A-priori bound sequences for t = 1..t_max.

    Parameters
    ----------
    report : ContractionConstants
    rho_x0 : float, optional
        Defaults to the report's seed distance
    t_max : int
    a : float
        Exponent of the kappa_a hypothesis for the weak sequences

    Returns
    -------
    pd.DataFrame
        Columns t, bound_linear, bound_order5, bound_weak, bound_f, bound_f_weak. Sequences whose factor is missing
        are NaN.
    """

    rho_x0 = report.seeds.rho_x0 if rho_x0 is None else rho_x0
    nan = np.full(t_max, np.nan)

    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        linear = report.linear_factor()
        frame = {'t': np.arange(1, t_max + 1),
                 'bound_linear': error_seq_linear(linear, rho_x0, t_max) if linear is not None else nan,
                 'bound_order5': (error_seq_order5(report.e_factor, rho_x0, t_max)
                                  if report.e_factor is not None else nan),
                 'bound_weak': (error_seq_weak(report.e_factor, a, rho_x0, t_max)
                                if report.e_factor is not None else nan),
                 'bound_f': error_seq_order5(report.f_factor, rho_x0, t_max),
                 'bound_f_weak': error_seq_weak(report.f_factor, a, rho_x0, t_max)}

    return pd.DataFrame(frame)


def check_domination(problem, model, x0s, variant='T52', tol=1e-15, max_iter=6, slack_abs=1e-12, slack_rel=1e-9,
                     norm='max', progress=False):
    """Run the solver from each start and compare observed errors with the per-step bounds and the linear sequence.

    Parameters
    ----------
    problem : solver.Problem
        Needs a known root
    model : averages.LipschitzModel
    x0s : iterable of np.ndarray
        Starting points
    variant : str
        Per-step bound family deciding the `dominated` column ('T31'/'T51' radius-average forms or 'T52'
        center-only forms). Defaults to 'T52': the 'T31' z and x bounds apply the radius condition to the pair
        (y, z) jointly, and along motivational traces inside the T31 ball most x-step rows exceed them, while the
        T52 forms and the T31 y-step bound hold.
    tol, max_iter : solver options
    slack_abs, slack_rel : float
        An error counts as dominated when it is <= bound + slack_abs + slack_rel*bound
    norm : str
    progress : bool
        Show a tqdm progress bar

    Returns
    -------
    pd.DataFrame
        One row per (start, t) with errors err_x, err_y, err_z, err_next, bounds bound_y, bound_z, bound_x,
        bound_linear and the boolean column dominated
    """

    if problem.known_root is None:
        raise InsufficientData('check_domination needs a problem with a known root')

    def ok(err, bound):
        return bool(np.isnan(bound) or err <= bound + slack_abs + slack_rel*bound)

    rows = []
    for i, x0 in enumerate(tqdm(list(x0s), disable=not progress, desc='domination')):
        trace = solver.solve(problem, x0, tol=tol, max_iter=max_iter, norm=norm)
        seeds = seeds_from_trace(trace)

        linear = None
        if not seeds.degenerate:
            with warnings.catch_warnings():
                warnings.simplefilter('ignore')
                linear = constants_report(model, seeds).linear_factor()

        steps = [r for r in trace.records if r['err_y'] is not None]
        for rec, nxt in zip(steps, trace.records[1:]):
            t = rec['t']
            ex, ey, ez, en = rec['err_x'], rec['err_y'], rec['err_z'], nxt['err_x']
            by = per_step_bound(model, (ex, ex), 'y', variant)
            bz = per_step_bound(model, (ex, ey), 'z', variant)
            bx = per_step_bound(model, (ey, ez), 'x', variant)
            bl = linear**(t + 1)*seeds.rho_x0 if linear is not None else np.nan

            rows.append({'start': i, 't': t, 'err_x': ex, 'err_y': ey, 'err_z': ez, 'err_next': en,
                         'bound_y': by, 'bound_z': bz, 'bound_x': bx, 'bound_linear': bl,
                         'dominated': ok(ey, by) and ok(ez, bz) and ok(en, bx) and ok(en, bl)})

    return pd.DataFrame(rows, columns=['start', 't', 'err_x', 'err_y', 'err_z', 'err_next', 'bound_y', 'bound_z',
                                       'bound_x', 'bound_linear', 'dominated'])
