# Convergence and uniqueness radii.
#
# Every radius condition has a left side that is non-decreasing in delta (nonnegative integrands, shrinking
# denominators), so its feasible set is an interval (0, delta*]. Radii are found by bisection on that interval, with
# closed forms used whenever the kinds of the averages admit one.

import dataclasses
import warnings
from dataclasses import dataclass
import numpy as np
import scipy.optimize as sco
from . import averages as av
from . import util
from .exceptions import DomainError, ModelError, NoRadiusError, NotFoundError

BISECT_TOL = 1e-12
SEARCH_CAP = 1e3
LHS_SLACK = 1e-9
DISCREPANCY_TOL = 1e-8

THEOREMS = ('T31', 'T41', 'T51', 'T51Strong', 'T52')
THRESHOLDS = {'T31': 1.0, 'T41': 1.0, 'T51': 1.0, 'T51Strong': 1.0, 'T52': 1/3}

# Exponents tried when looking for an a with kappa_a non-decreasing
A_GRID = (1.0, 0.75, 0.5, 0.25, 0.0)


@dataclass(frozen=True)
class RadiusResult:
    """A computed radius together with the value of its condition at that radius.

    Parameters
    ----------
    delta : float
        The radius
    condition_lhs_at_delta : float
        Left side of the theorem's radius condition evaluated at delta
    theorem : str
        One of THEOREMS
    method : str
        'ClosedForm' or 'Bisection'
    clamped : bool
        True if the condition still held at the search limit, so delta is only a lower bound on the true radius
    notes : tuple of str
        Cross-checks and discrepancies
    """

    delta: float
    condition_lhs_at_delta: float
    theorem: str
    method: str
    clamped: bool = False
    notes: tuple = ()

    @property
    def threshold(self):
        return THRESHOLDS[self.theorem]

    def with_notes(self, *notes):
        return dataclasses.replace(self, notes=self.notes + tuple(notes))

    def to_dict(self):
        return {'delta': self.delta,
                'lhs': self.condition_lhs_at_delta,
                'theorem': self.theorem,
                'method': self.method,
                'clamped': self.clamped,
                'notes': list(self.notes)}


def _center(obj):
    return obj.center_avg if isinstance(obj, av.LipschitzModel) else obj


def default_search_hi(*fns):
    """min(domain_hi/2, SEARCH_CAP) over the given averages. Arguments of the integrals are 2*delta, so the search
    stops just short of half the domain.
    """
    limit = min(f.domain_hi for f in fns if f is not None)/2
    if np.isfinite(limit):
        limit *= 1 - 1e-12
    return min(limit, SEARCH_CAP)


def _search_limit(search_hi, *fns):
    limit = default_search_hi(*fns)
    if search_hi is None:
        return limit
    if not search_hi > 0:
        raise DomainError(f'search_hi must be positive, got {search_hi}')
    return min(search_hi, limit)


def lhs_t31(model, delta, tol=av.QUAD_TOL):
    """int_0^{2d} kappa u du / (2d (1 - int_0^{2d} kappa0)); infinite once the kappa0 integral reaches 1."""
    kappa = model.require_radius('The non-decreasing average condition')
    k0 = av.integral_K(model.center_avg, 2*delta, tol)
    if k0 >= 1:
        return np.inf
    return av.integral_M(kappa, 2*delta, tol)/(2*delta*(1 - k0))


def lhs_t41(center, delta, tol=av.QUAD_TOL):
    """int_0^{2d} kappa0(u) (2d - u) du / (2d)."""
    return av.integral_center_moment(_center(center), delta, tol)/delta


def lhs_t51(model, delta, tol=av.QUAD_TOL):
    kappa = model.require_radius('The weak average condition')
    return av.integral_K(kappa, 2*delta, tol) + av.integral_K(model.center_avg, 2*delta, tol)


def lhs_t51_strong(model, delta, tol=av.QUAD_TOL):
    """int_0^{2d} kappa0 + int_0^{2d} kappa u du / (2d). The same feasible set as lhs_t31."""
    kappa = model.require_radius('The strong weak-average condition')
    return av.integral_K(model.center_avg, 2*delta, tol) + av.integral_M(kappa, 2*delta, tol)/(2*delta)


def lhs_t52(center, delta, tol=av.QUAD_TOL):
    return av.integral_K(_center(center), 2*delta, tol)


def bisect_radius(lhs, threshold, search_hi, tol=BISECT_TOL):
    """Largest delta in (0, search_hi] with lhs(delta) <= threshold, for a non-decreasing lhs.

    Returns
    -------
    (float, bool)
        The radius, and whether it was clamped at search_hi
    """

    if lhs(search_hi) <= threshold:
        return search_hi, True

    lo, hi = 0.0, search_hi
    while hi - lo > tol:
        mid = 0.5*(lo + hi)
        if lhs(mid) <= threshold:
            lo = mid
        else:
            hi = mid

    if lo == 0.0:
        raise NoRadiusError(f'Radius condition exceeds {threshold} on all of (0, {search_hi}] '
                            f'(checked down to {hi:.3e})')
    return lo, False


def _positive_root(quad, lin, rhs=1.0):
    """Positive root of quad*d**2 + lin*d = rhs, written to avoid cancellation when quad is small."""
    if quad == 0 and lin == 0:
        return None
    return 2*rhs/(lin + np.sqrt(lin**2 + 4*quad*rhs))


def _as_affine(f):
    if isinstance(f, av.Constant):
        return f.k, 0.0
    if isinstance(f, av.Affine):
        return f.gamma, f.slope
    return None


def closed_form_radius(model, theorem):
    """Closed-form radius for the given theorem, when the kinds of the averages admit one.

    Parameters
    ----------
    model : averages.LipschitzModel or averages.AverageFunction
        Center-only theorems ('T41', 'T52') also accept a bare center average
    theorem : str
        One of THEOREMS

    Returns
    -------
    float or None
        None when no closed form applies
    """

    if theorem not in THEOREMS:
        raise ValueError(f'Unknown theorem {theorem!r}; expected one of {THEOREMS}')

    kappa0 = _center(model)
    kappa = model.radius_avg if isinstance(model, av.LipschitzModel) else None

    if theorem == 'T41':
        if isinstance(kappa0, av.Power):
            return ((kappa0.a + 1)/kappa0.c)**(1/kappa0.a)/2
        if isinstance(kappa0, av.Rational):
            return 1/(2*kappa0.gamma*(1 + kappa0.c0))
        aff = _as_affine(kappa0)
        if aff is not None:
            return _positive_root(2*aff[1]/3, aff[0])
        return None

    if theorem == 'T52':
        if isinstance(kappa0, av.Power):
            return (1/(3*kappa0.c*2**kappa0.a))**(1/kappa0.a)
        if isinstance(kappa0, av.Rational):
            g, c0 = kappa0.gamma, kappa0.c0
            return (3*c0 + 1 - np.sqrt(3*c0*(3*c0 + 1)))/(2*g*(3*c0 + 1))
        aff = _as_affine(kappa0)
        if aff is not None:
            return _positive_root(2*aff[1], 2*aff[0], 1/3)
        return None

    if kappa is None:
        return None

    if isinstance(kappa, av.Power) and isinstance(kappa0, av.Power) and kappa.a == kappa0.a:
        a, c, c0 = kappa.a, kappa.c, kappa0.c
        if theorem == 'T51':
            return (1/(2**a*(c + c0)))**(1/a)
        return closed_form_cr53(c, c0, a)

    aff, aff0 = _as_affine(kappa), _as_affine(kappa0)
    if aff is None or aff0 is None:
        return None
    (g, s), (g0, s0) = aff, aff0

    if theorem == 'T51':
        return _positive_root(2*(s + s0), 2*(g + g0))
    # T31 and T51Strong share the feasible set: int kappa0 + int kappa u/(2d) <= 1
    return _positive_root(2*s0 + 4*s/3, 2*g0 + g)


def closed_form_cr56(gamma, kappa, kappa0):
    """Printed radius for kappa(u) = gamma + kappa*u, kappa0(u) = gamma + kappa0*u (shared gamma)."""
    disc = 9*gamma**2 + (16/3)*kappa + 8*kappa0
    if disc < 0:
        return None
    return (-3*gamma + np.sqrt(disc))/((8/3)*kappa + 4*kappa0)


def closed_form_cr57(gamma, kappa0):
    """Printed uniqueness radius for kappa0(u) = gamma + kappa0*u. Kept as a regression reference only: it does not
    solve the uniqueness condition, whose root is closed_form_radius(Affine(gamma, kappa0), 'T41').
    """
    disc = 4*gamma**2 - (16/3)*kappa0
    if disc < 0:
        return None
    return (2*gamma - np.sqrt(disc))/((8/3)*kappa0)


def closed_form_cr53(c, c0, a):
    """Printed radius for kappa(u) = c a u**(a-1), kappa0(u) = c0 a u**(a-1)."""
    return ((a + 1)/(2**a*(c0*(a + 1) + c*a)))**(1/a)


def _solve(theorem, lhs, search_hi, tol, closed, method):
    threshold = THRESHOLDS[theorem]

    if method not in (None, 'closed', 'bisection'):
        raise ValueError(f'Unknown radius method {method!r}')

    if method != 'bisection' and closed is not None and 0 < closed <= search_hi:
        value = lhs(closed)
        if value <= threshold + LHS_SLACK:
            return RadiusResult(float(closed), float(value), theorem, 'ClosedForm')
        warnings.warn(f'Closed-form {theorem} radius {closed} gives condition value {value} > {threshold}; '
                      f'using bisection')
    elif method == 'closed':
        raise NoRadiusError(f'No usable closed form for {theorem} within (0, {search_hi}]')

    delta, clamped = bisect_radius(lhs, threshold, search_hi, tol)
    notes = (f'clamped at search limit {search_hi}',) if clamped else ()
    if clamped:
        warnings.warn(f'{theorem} condition still holds at the search limit {search_hi}; returning the limit')
    return RadiusResult(float(delta), float(lhs(delta)), theorem, 'Bisection', clamped, notes)


def radius_t31(model, search_hi=None, tol=BISECT_TOL, method=None):
    """Radius of the non-decreasing average theorem: the largest delta with

        int_0^{2d} kappa(u) u du / (2d (1 - int_0^{2d} kappa0)) <= 1  and  int_0^{2d} kappa0 < 1.

    Parameters
    ----------
    model : averages.LipschitzModel
        Needs both averages and both non-decreasing flags
    search_hi : float, optional
        Upper end of the search; defaults to default_search_hi
    tol : float
        Absolute bisection tolerance on delta
    method : str, optional
        None (closed form when available), 'closed' or 'bisection'

    Returns
    -------
    RadiusResult
    """

    kappa = model.require_radius('The non-decreasing average theorem')
    if not (model.radius_nondecreasing and model.center_nondecreasing):
        raise ModelError('The non-decreasing average theorem needs both kappa and kappa0 non-decreasing '
                         f'(radius_nondecreasing={model.radius_nondecreasing}, '
                         f'center_nondecreasing={model.center_nondecreasing})')

    search_hi = _search_limit(search_hi, kappa, model.center_avg)
    return _solve('T31', lambda d: lhs_t31(model, d), search_hi, tol, closed_form_radius(model, 'T31'), method)


def radius_uniqueness_t41(model, search_hi=None, tol=BISECT_TOL, method=None):
    """Uniqueness radius: largest delta with int_0^{2d} kappa0(u) (2d - u) du / (2d) <= 1. Only kappa0 enters;
    model may be a LipschitzModel or a bare center average.
    """

    center = _center(model)
    search_hi = _search_limit(search_hi, center)
    return _solve('T41', lambda d: lhs_t41(center, d), search_hi, tol, closed_form_radius(center, 'T41'), method)


def radius_t51(model, search_hi=None, tol=BISECT_TOL, method=None):
    """Weak-average radius: largest delta with int_0^{2d} (kappa + kappa0) <= 1. No monotonicity needed."""

    kappa = model.require_radius('The weak average theorem')
    search_hi = _search_limit(search_hi, kappa, model.center_avg)
    return _solve('T51', lambda d: lhs_t51(model, d), search_hi, tol, closed_form_radius(model, 'T51'), method)


def radius_t51_strong(model, a=1.0, search_hi=None, tol=BISECT_TOL, method=None):
    """Weak-average radius under the kappa_a hypothesis: largest delta with

        (1/2d) int_0^{2d} (2d kappa0(u) + u kappa(u)) du <= 1.

    Parameters
    ----------
    model : averages.LipschitzModel
    a : float
        Exponent in [0, 1] for which kappa_a(P) = P**(1-a) kappa(P) must be non-decreasing
    search_hi, tol, method
        As in radius_t31

    Returns
    -------
    RadiusResult
    """

    kappa = model.require_radius('The strong weak-average condition')
    search_hi = _search_limit(search_hi, kappa, model.center_avg)

    hi = min(2*search_hi, kappa.sample_hi())
    if not av.is_nondecreasing_kappa_a(kappa, a, hi):
        raise ModelError(f'kappa_a with a={a} is not non-decreasing on (0, {hi:.6g}]')

    result = _solve('T51Strong', lambda d: lhs_t51_strong(model, d), search_hi, tol,
                    closed_form_radius(model, 'T51Strong'), method)
    return result.with_notes(f'kappa_a non-decreasing for a={a}')


def radius_t52(center, search_hi=None, tol=BISECT_TOL, method=None):
    """Center-only radius: largest delta with int_0^{2d} kappa0 <= 1/3."""

    center = _center(center)
    search_hi = _search_limit(search_hi, center)
    return _solve('T52', lambda d: lhs_t52(center, d), search_hi, tol, closed_form_radius(center, 'T52'), method)


def delta_bar(center, search_hi=None, tol=BISECT_TOL):
    """Minimal positive zero of 2*kappa0(u)*u - 1, bracketed on a geometric grid and refined by bisection.

    Parameters
    ----------
    center : averages.AverageFunction or averages.LipschitzModel
    search_hi : float, optional
        Right end of the bracket scan. Defaults to min(domain_hi, SEARCH_CAP) just inside the domain.
    tol : float

    Returns
    -------
    float
    """

    center = _center(center)
    hi = center.sample_hi() if search_hi is None else min(search_hi, center.sample_hi())

    def h(u):
        return 2*center(u)*u - 1

    grid = util.geometric_grid(hi, av.GRID_N)
    values = 2*center.values(grid)*grid - 1
    roots = util.sign_changes(values)
    if roots.size == 0:
        raise NotFoundError(f'2*kappa0(u)*u - 1 has no sign change in (0, {hi:.6g}]')

    i = int(roots[0])
    if values[i] == 0.0:
        return float(grid[i])
    if i == 0:
        raise NotFoundError(f'2*kappa0(u)*u - 1 is already positive at u={grid[0]:.3e}')

    return float(sco.bisect(h, grid[i-1], grid[i], xtol=tol))


def refined_model(model, search_hi=None):
    """Model with the refined average kappa-bar in place of kappa, for use on B(x*, delta) intersected with
    B(x*, delta_bar).

    The dominance kappa-bar <= kappa is checked by sampling on (0, min(delta, delta_bar)], where delta is the
    non-decreasing average radius when its hypotheses hold and the weak-average radius otherwise.

    Returns
    -------
    averages.LipschitzModel
        With delta_bar populated
    """

    if model.refined_avg is None:
        raise ModelError('refined_model needs a refined average kappa_bar')
    kappa = model.require_radius('refined_model')

    dbar = delta_bar(model.center_avg, search_hi)
    if model.radius_nondecreasing and model.center_nondecreasing:
        delta = radius_t31(model, search_hi).delta
    else:
        delta = radius_t51(model, search_hi).delta

    hi = min(delta, dbar, model.refined_avg.sample_hi())
    excess, where = av.sampled_dominance(model.refined_avg, kappa, hi)
    if excess > 0:
        raise ModelError(f'kappa_bar exceeds kappa at u={where:.6g} (by {excess:.3e}) inside '
                         f'(0, min(delta, delta_bar)] = (0, {hi:.6g}]')

    return av.LipschitzModel(radius_avg=model.refined_avg,
                             center_avg=model.center_avg,
                             refined_avg=model.refined_avg,
                             center_nondecreasing=model.center_nondecreasing,
                             delta_bar=dbar)


def kappa_a_exponent(kappa, hi):
    """Largest exponent on A_GRID (plus a power kind's own exponent) for which kappa_a is non-decreasing, or None."""

    candidates = sorted(set(A_GRID) | ({kappa.a} if isinstance(kappa, av.Power) else set()), reverse=True)
    for a in candidates:
        if av.is_nondecreasing_kappa_a(kappa, a, hi):
            return a
    return None


def _crosscheck(result, model, search_hi, tol, lhs):
    """Compare a radius against the other method and against the printed corollary formulas."""

    notes = []
    if result.method == 'ClosedForm':
        other, clamped = bisect_radius(lhs, result.threshold, search_hi, tol)
        label = 'bisection'
    else:
        other = closed_form_radius(model, result.theorem)
        label = 'closed form'

    if other is not None:
        if abs(other - result.delta) > DISCREPANCY_TOL*max(1.0, result.delta):
            notes.append(f'{label} gives {other:.12g}')
            warnings.warn(f'{result.theorem}: {label} radius {other:.12g} differs from {result.delta:.12g}')
        else:
            notes.append(f'{label} agrees ({other:.12g})')

    kappa0 = model.center_avg
    kappa = model.radius_avg
    printed = None
    if result.theorem == 'T41' and isinstance(kappa0, av.Affine):
        printed = closed_form_cr57(kappa0.gamma, kappa0.slope)
    elif result.theorem in ('T31', 'T51Strong') and isinstance(kappa, av.Affine) and isinstance(kappa0, av.Affine) \
            and kappa.gamma == kappa0.gamma:
        printed = closed_form_cr56(kappa.gamma, kappa.slope, kappa0.slope)
    elif result.theorem in ('T51', 'T51Strong') and isinstance(kappa, av.Power) and isinstance(kappa0, av.Power) \
            and kappa.a == kappa0.a:
        printed = closed_form_cr53(kappa.c, kappa0.c, kappa.a)

    if printed is not None:
        if abs(printed - result.delta) > DISCREPANCY_TOL*max(1.0, result.delta):
            notes.append(f'printed corollary radius {printed:.12g} does not match')
            warnings.warn(f'{result.theorem}: printed corollary radius {printed:.12g} differs from the solved '
                          f'radius {result.delta:.12g}')
        else:
            notes.append(f'printed corollary radius agrees ({printed:.12g})')

    return result.with_notes(*notes)


def radius_report(model, search_hi=None, tol=BISECT_TOL):
    """Every radius the model's hypotheses support, each cross-checked.

    Parameters
    ----------
    model : averages.LipschitzModel
    search_hi : float, optional
    tol : float

    Returns
    -------
    list of RadiusResult
        T31 (when both averages are non-decreasing), T41, T51, T51Strong (when kappa_a is non-decreasing for some
        a in [0, 1]) and T52. Center-only models give T41 and T52 only.
    """

    kappa, center = model.radius_avg, model.center_avg
    limit = _search_limit(search_hi, kappa, center)
    report = []

    if kappa is not None and model.radius_nondecreasing and model.center_nondecreasing:
        r = radius_t31(model, search_hi, tol)
        report.append(_crosscheck(r, model, limit, tol, lambda d: lhs_t31(model, d)))

    r = radius_uniqueness_t41(model, search_hi, tol)
    report.append(_crosscheck(r, model, limit, tol, lambda d: lhs_t41(center, d)))

    if kappa is not None:
        weak = radius_t51(model, search_hi, tol)
        weak = _crosscheck(weak, model, limit, tol, lambda d: lhs_t51(model, d))

        a = kappa_a_exponent(kappa, min(2*limit, kappa.sample_hi()))
        strong = None
        if a is not None:
            strong = radius_t51_strong(model, a, search_hi, tol)
            strong = _crosscheck(strong, model, limit, tol, lambda d: lhs_t51_strong(model, d))

        if strong is not None and strong.delta > weak.delta:
            strong = strong.with_notes('operative weak-average radius (strong condition is larger)')
        else:
            weak = weak.with_notes('operative weak-average radius')
        report.append(weak)
        if strong is not None:
            report.append(strong)

    r = radius_t52(center, search_hi, tol)
    report.append(_crosscheck(r, av.LipschitzModel(None, center), limit, tol, lambda d: lhs_t52(center, d)))

    return report
