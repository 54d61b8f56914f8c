# Average functions (the kappa of a generalized Lipschitz condition) and the integral transforms every radius
# condition and error bound is built from.
#
# An average function is a positive integrable kappa on (0, domain_hi). The generalized Lipschitz conditions replace
# a Lipschitz constant L by an integral of kappa over a distance range, so everything downstream needs
#
#     K(s) = int_0^s kappa(u) du          (integral_K)
#     M(s) = int_0^s kappa(u) u du        (integral_M)
#
# Closed forms are used for the parametric kinds; Callback kinds go through scipy's QUADPACK wrapper.

import ast
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional
import numpy as np
import scipy.integrate as sci
from . import util
from .exceptions import ConfigError, DomainError, ModelError, QuadratureError

QUAD_TOL = 1e-10
QUAD_BUDGET = 10**6
GRID_N = 512
MONOTONE_RTOL = 1e-12

# Sampling range used for kinds with an unbounded domain when a check needs a finite interval
SAMPLE_CAP = 2e3

_KRONROD_POINTS = 21


def adaptive_quadrature(g, lo, hi, tol=QUAD_TOL, budget=QUAD_BUDGET):
    """Integrate g over [lo, hi] with adaptive Gauss-Kronrod panels (QUADPACK QAGS via scipy.integrate.quad).

    The Kronrod nodes are interior to every panel, so g is never evaluated at lo or hi; integrable endpoint
    singularities such as u**(a-1) at 0 are handled by the extrapolation in QAGS.

    Parameters
    ----------
    g : callable
        Integrand, float -> float
    lo, hi : float
        Integration limits, lo <= hi
    tol : float
        Requested relative error
    budget : int
        Maximum number of integrand evaluations

    Returns
    -------
    float
        Estimate of the integral
    """

    if hi < lo:
        raise DomainError(f'Integration limits out of order: lo={lo} > hi={hi}')
    if hi == lo:
        return 0.0

    limit = max(budget // _KRONROD_POINTS, 1)
    out = sci.quad(g, lo, hi, epsabs=0.0, epsrel=tol, limit=limit, full_output=1)
    value, abserr, info = out[0], out[1], out[2]

    if info['last'] >= limit or info['neval'] >= budget:
        raise QuadratureError(f'Quadrature on [{lo}, {hi}] exhausted its budget of {budget} evaluations '
                              f'(estimate {value}, error {abserr})')

    if abserr > max(tol*abs(value), 1e-300) and len(out) > 3:
        warnings.warn(f'Quadrature on [{lo}, {hi}] did not certify rtol={tol}: error estimate {abserr:.3e} for '
                      f'value {value:.16e}')

    return float(value)


def parse_number(value):
    """Parse a numeric model parameter. Strings may be arithmetic expressions in e, pi, exp and sqrt, so that the
    constants of the motivational example can be written exactly, e.g. '(e-1)/2' or 'exp(1/(e-1))/2'.

    Parameters
    ----------
    value : int, float or str

    Returns
    -------
    float
    """

    if isinstance(value, (int, float, np.floating, np.integer)) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f'Expected a number or expression, got {type(value).__name__}')

    names = {'e': np.e, 'pi': np.pi, 'exp': np.exp, 'sqrt': np.sqrt}
    allowed = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Name, ast.Load, ast.Call,
               ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)

    try:
        tree = ast.parse(value, mode='eval')
    except SyntaxError as e:
        raise ConfigError(f'Cannot parse numeric expression {value!r}') from e

    for node in ast.walk(tree):
        if not isinstance(node, allowed):
            raise ConfigError(f'Disallowed syntax in numeric expression {value!r}')
        if isinstance(node, ast.Name) and node.id not in names:
            raise ConfigError(f'Unknown name {node.id!r} in numeric expression {value!r}')

    return float(eval(compile(tree, '<model>', 'eval'), {'__builtins__': {}}, names))


class AverageFunction:
    """Base class of the average functions. Subclasses are frozen dataclasses, one per kind, providing kappa
    itself and, where available, closed forms of K(s) and M(s).
    """

    kind = None

    @property
    def domain_hi(self):
        return np.inf

    def __call__(self, u):
        raise NotImplementedError

    def values(self, u):
        """Evaluate kappa on an array of points."""
        return np.asarray(self(np.asarray(u, dtype=float)), dtype=float)

    def closed_K(self, s):
        return None

    def closed_M(self, s):
        return None

    @property
    def nondecreasing(self):
        return True

    def to_dict(self):
        raise NotImplementedError

    @staticmethod
    def from_dict(spec):
        """Build an average function from its JSON form {"kind": ..., params...}."""

        if not isinstance(spec, dict) or 'kind' not in spec:
            raise ConfigError(f'Average function spec must be an object with a "kind" key, got {spec!r}')

        kinds = {'constant': Constant, 'const': Constant, 'affine': Affine, 'power': Power, 'rational': Rational}
        kind = str(spec['kind']).lower()
        if kind not in kinds:
            raise ConfigError(f'Unknown average function kind {spec["kind"]!r}; expected one of '
                              f'{sorted(set(kinds) - {"const"})}')

        cls = kinds[kind]
        params = {k: parse_number(v) for k, v in spec.items() if k != 'kind'}
        try:
            return cls(**params)
        except TypeError as e:
            raise ConfigError(f'Bad parameters for {kind} average function: {params}') from e

    def sample_hi(self):
        """Right end of the interval used when kappa has to be sampled."""
        return min(0.999*self.domain_hi, SAMPLE_CAP)


@dataclass(frozen=True)
class Constant(AverageFunction):
    """kappa(u) = k: the classical Lipschitz constant written as an average."""

    k: float
    kind = 'constant'

    def __post_init__(self):
        if not self.k > 0:
            raise ModelError(f'Constant average needs k > 0, got {self.k}')

    def __call__(self, u):
        return self.k*np.ones_like(u, dtype=float) if np.ndim(u) else self.k

    def closed_K(self, s):
        return self.k*s

    def closed_M(self, s):
        return 0.5*self.k*s**2

    def to_dict(self):
        return {'kind': self.kind, 'k': self.k}


@dataclass(frozen=True)
class Affine(AverageFunction):
    """kappa(u) = gamma + slope*u."""

    gamma: float
    slope: float
    kind = 'affine'

    def __post_init__(self):
        if self.gamma < 0 or self.slope < 0 or self.gamma + self.slope <= 0:
            raise ModelError(f'Affine average needs gamma, slope >= 0 and not both zero, got '
                             f'gamma={self.gamma}, slope={self.slope}')

    def __call__(self, u):
        return self.gamma + self.slope*u

    def closed_K(self, s):
        return self.gamma*s + 0.5*self.slope*s**2

    def closed_M(self, s):
        return 0.5*self.gamma*s**2 + self.slope*s**3/3

    def to_dict(self):
        return {'kind': self.kind, 'gamma': self.gamma, 'slope': self.slope}


@dataclass(frozen=True)
class Power(AverageFunction):
    """kappa(u) = c*a*u**(a-1), 0 < a <= 1. Singular at 0 for a < 1 but integrable: K(s) = c*s**a."""

    c: float
    a: float
    kind = 'power'

    def __post_init__(self):
        if not self.c > 0:
            raise ModelError(f'Power average needs c > 0, got {self.c}')
        if not 0 < self.a <= 1:
            raise ModelError(f'Power average needs an exponent a in (0, 1], got {self.a}')

    def __call__(self, u):
        return self.c*self.a*np.power(u, self.a - 1)

    def closed_K(self, s):
        return self.c*s**self.a

    def closed_M(self, s):
        return self.c*self.a*s**(self.a + 1)/(self.a + 1)

    @property
    def nondecreasing(self):
        return self.a == 1

    def to_dict(self):
        return {'kind': self.kind, 'c': self.c, 'a': self.a}


@dataclass(frozen=True)
class Rational(AverageFunction):
    """kappa(u) = 2*gamma*c0/(1 - gamma*u)**3 on (0, 1/gamma), so that K(2*rho) = c0/(1-2*gamma*rho)**2 - c0."""

    gamma: float
    c0: float
    kind = 'rational'

    def __post_init__(self):
        if not (self.gamma > 0 and self.c0 > 0):
            raise ModelError(f'Rational average needs gamma > 0 and c0 > 0, got gamma={self.gamma}, c0={self.c0}')

    @property
    def domain_hi(self):
        return 1/self.gamma

    def __call__(self, u):
        return 2*self.gamma*self.c0/(1 - self.gamma*u)**3

    def closed_K(self, s):
        return self.c0/(1 - self.gamma*s)**2 - self.c0

    def closed_M(self, s):
        # Antiderivative of 2*gamma*c0*u/(1-gamma*u)**3 from 0 to s, simplified
        return self.c0*self.gamma*s**2/(1 - self.gamma*s)**2

    def to_dict(self):
        return {'kind': self.kind, 'gamma': self.gamma, 'c0': self.c0}


@dataclass(frozen=True)
class Callback(AverageFunction):
    """User supplied kappa. The callable must be re-entrant; integrals always go through adaptive_quadrature.

    Parameters
    ----------
    fn : callable
        u -> kappa(u), float -> float
    hi : float
        Largest u for which kappa is finite
    """

    fn: Callable = field(compare=False)
    hi: float = np.inf
    kind = 'callback'

    def __post_init__(self):
        if not self.hi > 0:
            raise ModelError(f'Callback average needs a positive domain bound, got {self.hi}')

    @property
    def domain_hi(self):
        return self.hi

    def __call__(self, u):
        if np.ndim(u):
            return np.array([self.fn(float(v)) for v in np.ravel(u)]).reshape(np.shape(u))
        return self.fn(u)

    @property
    def nondecreasing(self):
        return is_nondecreasing_kappa_a(self, 1.0, self.sample_hi())

    def to_dict(self):
        raise ConfigError('Callback average functions are library-only and cannot be serialized')


def _check_upper(f, s, name='s'):
    if s < 0:
        raise DomainError(f'{name}={s} must be nonnegative')
    if s >= f.domain_hi:
        raise DomainError(f'{name}={s} is outside the domain of the {f.kind} average (domain_hi={f.domain_hi})')
    return


def eval_kappa(f, u):
    """Evaluate kappa(u) for 0 < u < domain_hi."""

    if not 0 < u < f.domain_hi:
        raise DomainError(f'u={u} is outside (0, {f.domain_hi}) for the {f.kind} average')
    return float(f(u))


def kappa_a(f, a, P):
    """kappa_a(P) = P**(1-a)*kappa(P). Its monotonicity for some a in [0, 1] is what the weak-average error bounds
    with exponent (1+3a+a**2)**t rest on.
    """
    return P**(1 - a)*eval_kappa(f, P)


def integral_K(f, s, tol=QUAD_TOL):
    """K(s) = int_0^s kappa(u) du.

    Parameters
    ----------
    f : AverageFunction
    s : float
        Upper limit, 0 <= s < f.domain_hi
    tol : float
        Relative tolerance, only used by kinds without a closed form

    Returns
    -------
    float
    """

    _check_upper(f, s)
    if s == 0:
        return 0.0

    closed = f.closed_K(s)
    if closed is not None:
        return float(closed)
    return adaptive_quadrature(f, 0.0, s, tol)


def integral_M(f, s, tol=QUAD_TOL):
    """M(s) = int_0^s kappa(u)*u du. Same contract as integral_K."""

    _check_upper(f, s)
    if s == 0:
        return 0.0

    closed = f.closed_M(s)
    if closed is not None:
        return float(closed)
    return adaptive_quadrature(lambda u: u*f(u), 0.0, s, tol)


def integral_tail(f, lo, hi, tol=QUAD_TOL):
    """int_lo^hi kappa(u) du = K(hi) - K(lo), the right side of the radius Lipschitz condition with
    lo = tau*(rho(x)+rho(y)) and hi = rho(x)+rho(y).
    """

    if not 0 <= lo <= hi:
        raise DomainError(f'Tail integral needs 0 <= lo <= hi, got lo={lo}, hi={hi}')
    _check_upper(f, hi, 'hi')

    if lo == hi:
        return 0.0
    if f.closed_K(hi) is None:
        return adaptive_quadrature(f, lo, hi, tol)
    return max(integral_K(f, hi, tol) - integral_K(f, lo, tol), 0.0)


def integral_center_moment(f, rho, tol=QUAD_TOL):
    """int_0^{2 rho} kappa0(u)*(rho - u/2) du, the bound on the averaged center Lipschitz term
    int_0^1 ||G'(x*)^-1 (G'(x^tau) - G'(x*))|| rho(x) dtau.
    """
    return max(rho*integral_K(f, 2*rho, tol) - 0.5*integral_M(f, 2*rho, tol), 0.0)


def integral_segment_moment(f, rho_x, rho_y, tol=QUAD_TOL):
    """int_0^{rho_x+rho_y} kappa(u) u/(rho_x+rho_y) rho_y du, the bound on the averaged radius Lipschitz term along
    the segment from x to y. Zero when both distances vanish.
    """

    total = rho_x + rho_y
    if total == 0:
        return 0.0
    return integral_M(f, total, tol)*rho_y/total


def phi(f, beta, a, P, tol=QUAD_TOL):
    """phi_{beta,a}(P) = P**-(a+beta) * int_0^P u**beta kappa(u) du, non-decreasing in P whenever kappa_a is.

    Parameters
    ----------
    f : AverageFunction
    beta : float
        Moment order, >= 0
    a : float
        Exponent in [0, 1]
    P : float
        0 < P < f.domain_hi

    Returns
    -------
    float
    """

    if beta < 0 or not 0 <= a <= 1:
        raise DomainError(f'phi needs beta >= 0 and a in [0, 1], got beta={beta}, a={a}')
    if not 0 < P < f.domain_hi:
        raise DomainError(f'P={P} is outside (0, {f.domain_hi}) for the {f.kind} average')

    if beta == 0:
        moment = integral_K(f, P, tol)
    elif beta == 1:
        moment = integral_M(f, P, tol)
    else:
        moment = adaptive_quadrature(lambda u: u**beta*f(u), 0.0, P, tol)

    return moment/P**(a + beta)


def is_nondecreasing_kappa_a(f, a, hi, grid_n=GRID_N):
    """Check on a geometric grid of grid_n points in (0, hi] that kappa_a(P) = P**(1-a) kappa(P) never decreases by
    more than a relative 1e-12.

    Returns
    -------
    bool
    """

    if not 0 < hi < f.domain_hi:
        raise DomainError(f'hi={hi} is outside (0, {f.domain_hi}) for the {f.kind} average')

    grid = util.geometric_grid(hi, grid_n)
    values = grid**(1 - a)*f.values(grid)
    return util.count_decreases(values, MONOTONE_RTOL) == 0


def sampled_dominance(lower, upper, hi, grid_n=GRID_N, rtol=1e-12):
    """Largest excess lower(u) - (1+rtol)*upper(u) over a geometric grid in (0, hi]; positive values are violations of
    lower <= upper.
    """

    grid = util.geometric_grid(hi, grid_n)
    lo_vals = lower.values(grid)
    up_vals = upper.values(grid)
    excess = lo_vals - up_vals*(1 + rtol)
    i = int(np.argmax(excess))
    return float(excess[i]), float(grid[i])


@dataclass(frozen=True)
class LipschitzModel:
    """The averages entering the generalized Lipschitz conditions on [G'(x*)]^-1 G'.

    Parameters
    ----------
    radius_avg : AverageFunction or None
        kappa of the radius condition. None for center-only models (uniqueness and the center-only convergence
        theorem do not need it).
    center_avg : AverageFunction
        kappa0 of the center condition; must satisfy kappa0 <= kappa pointwise.
    refined_avg : AverageFunction, optional
        kappa-bar of the refinement on the smaller ball B(x*, min(delta, delta_bar)).
    radius_nondecreasing, center_nondecreasing : bool, optional
        Monotonicity hypotheses. Inferred from the kinds when not given.
    delta_bar : float, optional
        Set by radii.refined_model.
    """

    radius_avg: Optional[AverageFunction]
    center_avg: AverageFunction
    refined_avg: Optional[AverageFunction] = None
    radius_nondecreasing: Optional[bool] = None
    center_nondecreasing: Optional[bool] = None
    delta_bar: Optional[float] = None

    def __post_init__(self):
        if self.center_avg is None:
            raise ModelError('A Lipschitz model needs a center average kappa0')

        if self.radius_nondecreasing is None:
            flag = self.radius_avg.nondecreasing if self.radius_avg is not None else False
            object.__setattr__(self, 'radius_nondecreasing', bool(flag))
        if self.center_nondecreasing is None:
            object.__setattr__(self, 'center_nondecreasing', bool(self.center_avg.nondecreasing))

        if self.radius_avg is not None:
            hi = min(self.radius_avg.sample_hi(), self.center_avg.sample_hi())
            excess, where = sampled_dominance(self.center_avg, self.radius_avg, hi)
            if excess > 0:
                raise ModelError(f'kappa0 exceeds kappa at u={where:.6g} (by {excess:.3e}); the center average must '
                                 f'be dominated by the radius average')
        return

    @property
    def center_only(self):
        return self.radius_avg is None

    def require_radius(self, what):
        if self.radius_avg is None:
            raise ModelError(f'{what} needs a radius average kappa; this model is center-only')
        return self.radius_avg

    def classical(self):
        """The single-function model kappa0 := kappa that older analyses use."""
        kappa = self.require_radius('The classical model')
        return LipschitzModel(radius_avg=kappa, center_avg=kappa)

    def domain_hi(self):
        his = [f.domain_hi for f in (self.radius_avg, self.center_avg) if f is not None]
        return min(his)

    def to_dict(self):
        d = {'kappa0': self.center_avg.to_dict()}
        if self.radius_avg is not None:
            d['kappa'] = self.radius_avg.to_dict()
        if self.refined_avg is not None:
            d['kappa_bar'] = self.refined_avg.to_dict()
        return d

    @staticmethod
    def from_dict(spec):
        """Build a model from {"kappa": {...}, "kappa0": {...}, "kappa_bar": {...}}; only kappa0 is required."""

        if not isinstance(spec, dict) or 'kappa0' not in spec:
            raise ConfigError(f'Model spec must be an object with at least a "kappa0" entry, got {spec!r}')

        kappa = AverageFunction.from_dict(spec['kappa']) if spec.get('kappa') is not None else None
        kappa_bar = AverageFunction.from_dict(spec['kappa_bar']) if spec.get('kappa_bar') is not None else None
        return LipschitzModel(radius_avg=kappa,
                              center_avg=AverageFunction.from_dict(spec['kappa0']),
                              refined_avg=kappa_bar,
                              radius_nondecreasing=spec.get('radius_nondecreasing'),
                              center_nondecreasing=spec.get('center_nondecreasing'))
