# Benchmark problems with known roots and their Lipschitz models, plus sampling checks of the models.

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional
import numpy as np
import pandas as pd
import scipy.integrate as sci
import scipy.special as scs
from tqdm import tqdm
from . import averages as av
from . import util
from .exceptions import ConfigError, QuadratureError
from .solver import LUFactorization, Problem, evaluate_jacobian, vector_norm

E = np.e
DEFAULT_SEED = 42
VIOLATION_RTOL = 1e-12
VIOLATION_ATOL = 1e-15

# Beyond SICI_LIMIT the sine tail is integrated with QAWF instead of the sine-integral closed form, and beyond
# ASYMPTOTIC_LIMIT its two-term asymptotic expansion is exact to double precision
SICI_LIMIT = 1e3
ASYMPTOTIC_LIMIT = 1e6


@dataclass(frozen=True)
class BenchmarkCase:
    """A problem, its Lipschitz model and the values the theory predicts for it.

    Parameters
    ----------
    name : str
    problem : solver.Problem
    model : averages.LipschitzModel
    expected : dict
        Named reference values (radii)
    provenance : dict
        For each expected value, 'quoted' (published to 6 decimals) or 'derived' (exact arithmetic)
    x0 : np.ndarray
        Default starting point
    ball_radius : float
        Radius of the ball around the root where the model is stated to hold
    scan_function : callable, optional
        Vectorized scalar function whose sign changes are scanned for uniqueness checks
    validated : bool
        False for model variants that only serve radius arithmetic and are not satisfied by the problem
    """

    name: str
    problem: Problem
    model: av.LipschitzModel
    expected: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    x0: np.ndarray = None
    ball_radius: float = 1.0
    scan_function: Optional[Callable] = field(default=None, compare=False)
    validated: bool = True


def make_motivational(variant='constant'):
    """G(x, y, z) = (e**x - 1, (e-1)/2 y**2 + y, z) on the closed unit ball, root at the origin.

    Parameters
    ----------
    variant : str
        'constant' for the averages kappa = e/2, kappa0 = (e-1)/2, kappa-bar = e**(1/(e-1))/2. 'affine' uses the same
        coefficients as slopes of linear averages; the problem does not satisfy that model and the case only carries
        its radii.

    Returns
    -------
    BenchmarkCase
    """

    def residual(w):
        x, y, z = w
        return np.array([np.exp(x) - 1, (E - 1)/2*y**2 + y, z])

    def jacobian(w):
        x, y, _ = w
        return np.diag([np.exp(x), (E - 1)*y + 1, 1.0])

    def component(y):
        return (E - 1)/2*y**2 + y

    k, k0, kbar = E/2, (E - 1)/2, np.exp(1/(E - 1))/2

    if variant == 'constant':
        model = av.LipschitzModel(radius_avg=av.Constant(k), center_avg=av.Constant(k0), refined_avg=av.Constant(kbar))
        expected = {'delta0': 0.245253, 'delta1': 0.324947, 'delta2': 0.382692,
                    'delta_bar': 1/(E - 1), 'delta_t41': 1/k0}
        provenance = {'delta0': 'quoted', 'delta1': 'quoted', 'delta2': 'quoted',
                      'delta_bar': 'derived', 'delta_t41': 'derived'}
        name, validated = 'motivational', True
    elif variant == 'affine':
        model = av.LipschitzModel(radius_avg=av.Affine(0.0, k), center_avg=av.Affine(0.0, k0),
                                  refined_avg=av.Affine(0.0, kbar))
        expected = {'delta0': 1/np.sqrt(5*E/3),
                    'delta1': 1/np.sqrt(2*k0 + 4*k/3),
                    'delta2': 1/np.sqrt(2*k0 + 4*kbar/3),
                    'delta_bar': 1/np.sqrt(2*k0),
                    'delta_t41': np.sqrt(3/(2*k0))}
        provenance = {key: 'derived' for key in expected}
        name, validated = 'motivational-affine', False
    else:
        raise ValueError(f'Unknown motivational variant {variant!r}; expected "constant" or "affine"')

    problem = Problem(dim=3, residual=residual, jacobian=jacobian, known_root=np.zeros(3), name=name)
    return BenchmarkCase(name=name, problem=problem, model=model, expected=expected, provenance=provenance,
                         x0=np.full(3, 0.3), ball_radius=1.0, scan_function=component, validated=validated)


def make_hammerstein(n=8):
    """Gauss-Legendre discretization of h(s) - int_0^1 s t h(t)**3 dt = 0 on n nodes, root h = 0.

    G_i(h) = h_i - t_i sum_j w_j t_j h_j**3 and G'(h)_ij = delta_ij - 3 t_i w_j t_j h_j**2 with nodes t and weights w
    mapped to [0, 1]. Model kappa0(u) = 1.5u, kappa(u) = kappa-bar(u) = 3u.
    """

    if n < 2:
        raise ValueError(f'The Hammerstein discretization needs at least 2 nodes, got {n}')

    nodes, weights = np.polynomial.legendre.leggauss(n)
    t = (nodes + 1)/2
    w = weights/2

    def residual(h):
        return h - t*np.dot(w*t, h**3)

    def jacobian(h):
        return np.eye(n) - 3*np.outer(t, w*t*h**2)

    kappa = av.Affine(0.0, 3.0)
    model = av.LipschitzModel(radius_avg=kappa, center_avg=av.Affine(0.0, 1.5), refined_avg=kappa)
    name = f'hammerstein:{n}'
    problem = Problem(dim=n, residual=residual, jacobian=jacobian, known_root=np.zeros(n), name=name)

    return BenchmarkCase(name=name, problem=problem, model=model,
                         expected={'delta_t31': 1/np.sqrt(7)}, provenance={'delta_t31': 'derived'},
                         x0=np.full(n, 0.3), ball_radius=1.0)


def _sin_tail_qawf(A):
    # int_A^inf sin(s)/s**3 ds = A**-2 int_1^inf sin(A v) v**-3 dv
    out = sci.quad(lambda v: v**-3, 1, np.inf, weight='sin', wvar=A, epsabs=1e-12/A, limlst=100, full_output=1)
    value, abserr = out[0], out[1]
    if len(out) > 3 and abserr > 1e-10/A:
        raise QuadratureError(f'Fourier tail integral at A={A} did not converge (error estimate {abserr:.3e})')
    return value/A**2


def sin_tail(A):
    """int_A^inf sin(s)/s**3 ds for A > 0, vectorized over A."""

    A = np.asarray(A, dtype=float)
    out = np.empty_like(A)
    small = A <= SICI_LIMIT

    a = A[small]
    si, _ = scs.sici(a)
    out[small] = np.sin(a)/(2*a**2) + np.cos(a)/(2*a) + si/2 - np.pi/4
    large = A > ASYMPTOTIC_LIMIT
    b = A[large]
    out[large] = np.cos(b)/b**3 + 3*np.sin(b)/b**4

    mid = ~small & ~large
    out[mid] = [_sin_tail_qawf(v) for v in A[mid]]
    return out


def sin_residual(x):
    """G(x) = int_0^x (1 + 2t sin(pi/t)) dt = x + sign(x) 2 pi**2 int_{pi/|x|}^inf sin(s)/s**3 ds, vectorized."""

    x = np.asarray(x, dtype=float)
    out = x.copy()
    nz = x != 0
    out[nz] += np.sign(x[nz])*2*np.pi**2*sin_tail(np.pi/np.abs(x[nz]))
    return out


def sin_derivative(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(x == 0, 1.0, 1 + 2*x*np.sin(np.pi/np.where(x == 0, 1.0, x)))


def make_scalar_sin():
    """G(x) = int_0^x (1 + 2t sin(pi/t)) dt, G'(0) = 1, root 0. Only a center condition holds, with
    kappa0 = 1: |G'(x) - G'(0)| = |2x sin(pi/x)| <= 2|x|.
    """

    problem = Problem(dim=1, residual=sin_residual, jacobian=lambda x: sin_derivative(x).reshape(1, 1),
                      known_root=np.zeros(1), name='scalar-sin')
    model = av.LipschitzModel(radius_avg=None, center_avg=av.Constant(1.0))

    return BenchmarkCase(name='scalar-sin', problem=problem, model=model,
                         expected={'delta_t52': 1/6, 'delta_t41': 1.0},
                         provenance={'delta_t52': 'quoted', 'delta_t41': 'derived'},
                         x0=np.array([0.1]), ball_radius=1.0, scan_function=sin_residual)


def get_case(name):
    """Resolve 'motivational', 'motivational-affine', 'hammerstein' or 'hammerstein:n', and 'scalar-sin'."""

    key, _, arg = str(name).partition(':')
    if key == 'motivational' and not arg:
        return make_motivational()
    elif key == 'motivational-affine' and not arg:
        return make_motivational('affine')
    elif key == 'hammerstein':
        try:
            return make_hammerstein(int(arg) if arg else 8)
        except ValueError as e:
            raise ConfigError(f'Bad Hammerstein size in {name!r}: {e}') from e
    elif key == 'scalar-sin' and not arg:
        return make_scalar_sin()
    raise ConfigError(f'Unknown problem {name!r}; expected motivational, motivational-affine, hammerstein:n or '
                      f'scalar-sin')


def construction_points(k_values):
    """Points x = y = 1/k with tau = 2k/(2k+1), where |G'(x) - G'(tau y)| = 4/(2k+1) for the scalar-sin problem while
    any integrable radius average bounds it by an integral over (2/(2k+1), 2/k).

    Returns
    -------
    pd.DataFrame
        Columns k, x, y, tau, lhs_exact
    """

    k = np.asarray(list(k_values), dtype=float)
    return pd.DataFrame({'k': k.astype(int), 'x': 1/k, 'y': 1/k, 'tau': 2*k/(2*k + 1), 'lhs_exact': 4/(2*k + 1)})


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of sampling a Lipschitz model against a problem.

    Ratios are left side over right side of each condition; a sample violates a condition when the left side
    exceeds the right side beyond a relative 1e-12.
    """

    n_samples: int
    pairing: str
    radius_checked: bool
    radius_violations: int
    center_violations: int
    max_radius_ratio: float
    max_center_ratio: float
    worst_radius_point: tuple = None
    seed: int = DEFAULT_SEED

    @property
    def violations(self):
        return self.radius_violations + self.center_violations

    def to_dict(self):
        return {'n_samples': self.n_samples, 'pairing': self.pairing, 'radius_checked': self.radius_checked,
                'radius_violations': self.radius_violations, 'center_violations': self.center_violations,
                'max_radius_ratio': self.max_radius_ratio, 'max_center_ratio': self.max_center_ratio,
                'worst_radius_point': (None if self.worst_radius_point is None
                                       else [np.asarray(v).tolist() for v in self.worst_radius_point]),
                'seed': self.seed}


def _operator_norm(M, norm):
    return float(np.linalg.norm(M, np.inf if norm == 'max' else 2))


def _ratio(lhs, rhs):
    if rhs > 0:
        return lhs/rhs
    return 0.0 if lhs <= VIOLATION_ATOL else np.inf


def _violates(lhs, rhs):
    return lhs > rhs*(1 + VIOLATION_RTOL) + VIOLATION_ATOL


def _sample_ball(rng, center, radius, norm):
    if norm == 'max':
        return center + rng.uniform(-radius, radius, size=center.size)
    direction = rng.standard_normal(center.size)
    direction /= np.linalg.norm(direction)
    return center + radius*rng.uniform()**(1/center.size)*direction


def verify_model(p, m, n_samples=10**4, seed=DEFAULT_SEED, radius=1.0, pairing='diagonal', points=None, norm='max',
                 progress=False):
    """Sample the radius and center Lipschitz conditions of a model on a problem with a known root.

    For each triple (x, y, tau) this checks

        ||G'(x*)^-1 (G'(x) - G'(y^tau))|| <= int_{tau(rho(x)+rho(y))}^{rho(x)+rho(y)} kappa,   y^tau = x* + tau(y - x*)
        ||G'(x*)^-1 (G'(x^tau) - G'(x*))|| <= int_0^{2 tau rho(x)} kappa0

    Parameters
    ----------
    p : solver.Problem
        Needs a known root and, preferably, an analytic Jacobian
    m : averages.LipschitzModel
        The radius condition is skipped for center-only models
    n_samples : int
        Number of random triples, ignored when points are given
    seed : int
    radius : float
        Sampling ball radius in the chosen norm
    pairing : str
        'diagonal' samples y = x, 'independent' draws y separately
    points : iterable of (x, y, tau), optional
        Explicit triples to check instead of random ones
    norm : str
    progress : bool

    Returns
    -------
    ValidationReport
    """

    if p.known_root is None:
        raise ValueError('verify_model needs a problem with a known root')
    if pairing not in ('diagonal', 'independent'):
        raise ValueError(f'Unknown pairing {pairing!r}; expected "diagonal" or "independent"')

    root = p.known_root

    def J(x):
        return evaluate_jacobian(p, x)

    j_star = J(root)
    precond = LUFactorization(j_star)

    if points is None:
        rng = np.random.default_rng(seed)
        triples = []
        for _ in range(n_samples):
            x = _sample_ball(rng, root, radius, norm)
            y = x if pairing == 'diagonal' else _sample_ball(rng, root, radius, norm)
            triples.append((x, y, rng.uniform()))
    else:
        triples = [(np.atleast_1d(np.asarray(x, dtype=float)), np.atleast_1d(np.asarray(y, dtype=float)), float(tau))
                   for x, y, tau in points]

    kappa = m.radius_avg
    n_rad = n_cen = 0
    max_rad = max_cen = 0.0
    worst = None

    for x, y, tau in tqdm(triples, disable=not progress, desc='verify'):
        rho_x = vector_norm(x - root, norm)
        rho_y = vector_norm(y - root, norm)
        jx = J(x)

        if kappa is not None:
            y_tau = root + tau*(y - root)
            lhs = _operator_norm(precond.solve(jx - J(y_tau)), norm)
            total = rho_x + rho_y
            rhs = av.integral_tail(kappa, tau*total, total)
            r = _ratio(lhs, rhs)
            if r > max_rad:
                max_rad, worst = r, (x, y, tau)
            n_rad += _violates(lhs, rhs)

        x_tau = root + tau*(x - root)
        lhs = _operator_norm(precond.solve(J(x_tau) - j_star), norm)
        rhs = av.integral_K(m.center_avg, 2*tau*rho_x)
        max_cen = max(max_cen, _ratio(lhs, rhs))
        n_cen += _violates(lhs, rhs)

    return ValidationReport(n_samples=len(triples), pairing=pairing if points is None else 'points',
                            radius_checked=kappa is not None, radius_violations=int(n_rad),
                            center_violations=int(n_cen), max_radius_ratio=float(max_rad),
                            max_center_ratio=float(max_cen), worst_radius_point=worst, seed=seed)


@dataclass(frozen=True)
class UniquenessScan:
    """Sign changes of a scalar function on a grid over the open interval (center - delta, center + delta)."""

    center: float
    delta: float
    n: int
    brackets: tuple

    @property
    def spurious(self):
        """Brackets that do not contain the center."""
        return tuple(b for b in self.brackets if not b[0] <= self.center <= b[1])


def scan_uniqueness(fn, delta, n=10**5, center=0.0):
    """Scan a vectorized scalar function on n interior points of (center - delta, center + delta) for roots.

    Returns
    -------
    UniquenessScan
        brackets holds one (lo, hi) interval per detected root, with lo == hi for exact zeros
    """

    if not delta > 0:
        raise ValueError(f'Scan radius must be positive, got {delta}')

    grid = center + np.linspace(-delta, delta, n + 2)[1:-1]
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', RuntimeWarning)
        values = np.asarray(fn(grid), dtype=float)

    brackets = []
    for i in util.sign_changes(values):
        if values[i] == 0.0:
            brackets.append((float(grid[i]), float(grid[i])))
        else:
            brackets.append((float(grid[i-1]), float(grid[i])))

    return UniquenessScan(center=center, delta=delta, n=n, brackets=tuple(brackets))
