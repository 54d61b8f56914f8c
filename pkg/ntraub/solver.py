# The three-step Newton-Traub iteration
#
#     y = x - G'(x)^-1 G(x)
#     z = y - G'(x)^-1 G(y)
#     x+ = z - G'(y)^-1 G(z)
#
# with one factorization of G'(x) shared by the first two solves, plus plain Newton for comparison.

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional
import numpy as np
import pandas as pd
import scipy.linalg as scl
from . import ioutil
from .exceptions import DomainError, InsufficientData, ModelError, SingularJacobian, SingularMatrix

log = logging.getLogger(__name__)

FD_STEP = np.sqrt(np.finfo(float).eps)
DIVERGENCE = 1e12
PIVOT_TOL = 1e-14
ROOT_TOL = 1e-12

# Errors at or below this are treated as saturated by rounding
SATURATION = 10*np.finfo(float).eps**0.9

STATUSES = ('Converged', 'MaxIter', 'SingularJacobian', 'Diverged')


def vector_norm(v, norm='max'):
    if norm == 'max':
        return float(np.max(np.abs(v))) if np.size(v) else 0.0
    elif norm == 'euclidean':
        return float(np.linalg.norm(v))
    raise ValueError(f'Unknown norm {norm!r}; expected "max" or "euclidean"')


@dataclass(frozen=True)
class Problem:
    """A nonlinear system G(x) = 0 on R^dim.

    Parameters
    ----------
    dim : int
    residual : callable
        x -> G(x), 1-D arrays of length dim
    jacobian : callable, optional
        x -> G'(x), (dim, dim) array. Forward differences are used when absent.
    known_root : np.ndarray, optional
        x*, enabling error norms in traces
    name : str
    """

    dim: int
    residual: Callable = field(compare=False)
    jacobian: Optional[Callable] = field(default=None, compare=False)
    known_root: Optional[np.ndarray] = field(default=None, compare=False)
    name: str = ''

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f'Problem dimension must be positive, got {self.dim}')
        if self.known_root is not None:
            root = np.asarray(self.known_root, dtype=float).reshape(self.dim)
            object.__setattr__(self, 'known_root', root)
            res = vector_norm(self.G(root))
            if res > ROOT_TOL*(1 + vector_norm(root)):
                raise ModelError(f'{self.name or "problem"}: residual {res:.3e} at the stated root is not zero')
        return

    def G(self, x):
        return np.asarray(self.residual(x), dtype=float).reshape(self.dim)

    def check_point(self, x):
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dim:
            raise DomainError(f'{self.name or "problem"} has dimension {self.dim}, got a point of size {x.size}')
        return x

    def error(self, x, norm='max'):
        if self.known_root is None or x is None:
            return None
        return vector_norm(x - self.known_root, norm)


class LUFactorization:
    """Partial-pivoting LU factorization of a square matrix, reusable for any number of right-hand sides."""

    def __init__(self, A, pivot_tol=PIVOT_TOL):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f'LU factorization needs a square matrix, got shape {A.shape}')

        if not np.all(np.isfinite(A)):
            raise SingularMatrix('Matrix has non-finite entries')

        with warnings.catch_warnings():
            warnings.simplefilter('ignore', scl.LinAlgWarning)
            self.lu, self.piv = scl.lu_factor(A, check_finite=False)

        # Row i of U was built from row perm[i] of A
        perm = np.arange(A.shape[0])
        for i, p in enumerate(self.piv):
            perm[i], perm[p] = perm[p], perm[i]
        scale = np.max(np.abs(A), axis=1)[perm]
        pivots = np.abs(np.diag(self.lu))

        bad = np.nonzero((pivots <= pivot_tol*scale) | (scale == 0))[0]
        if bad.size:
            raise SingularMatrix(f'Matrix is singular to working precision: pivot {bad[0]} is {pivots[bad[0]]:.3e} '
                                 f'against a row scale of {scale[bad[0]]:.3e}')
        self.shape = A.shape
        return

    def solve(self, b):
        return scl.lu_solve((self.lu, self.piv), np.asarray(b, dtype=float))


def lu_solve(A, b):
    """Solve A x = b. A may be a matrix or an existing LUFactorization."""
    factorization = A if isinstance(A, LUFactorization) else LUFactorization(A)
    return factorization.solve(b)


def jacobian_fd(p, x, fd_step=FD_STEP):
    """Forward-difference Jacobian; column j uses the step fd_step*max(1, |x_j|)."""

    x = np.asarray(x, dtype=float)
    g0 = p.G(x)
    jac = np.empty((p.dim, x.size))
    for j in range(x.size):
        xj = x.copy()
        xj[j] += fd_step*max(1.0, abs(x[j]))
        # Difference of the representable points, not the nominal step
        h = xj[j] - x[j]
        jac[:, j] = (p.G(xj) - g0)/h
    return jac


def evaluate_jacobian(p, x, fd_step=FD_STEP):
    if p.jacobian is None:
        return jacobian_fd(p, x, fd_step)
    return np.atleast_2d(np.asarray(p.jacobian(x), dtype=float)).reshape(p.dim, p.dim)


def _factor(p, x, fd_step, which):
    try:
        return LUFactorization(evaluate_jacobian(p, x, fd_step))
    except SingularMatrix as e:
        raise SingularJacobian(f'G\'({which}) is singular: {e}', which=which) from e


def newton_traub_step(p, x, fd_step=FD_STEP, gx=None):
    """One step of the three-step iteration, with two Jacobian factorizations: G'(x) for the y and z sub-steps and
    G'(y) for the last one.

    Parameters
    ----------
    p : Problem
    x : np.ndarray
    fd_step : float
        Forward-difference step, only used when p has no analytic Jacobian
    gx : np.ndarray, optional
        G(x), if already known

    Returns
    -------
    (np.ndarray, np.ndarray, np.ndarray)
        y, z and the next iterate
    """

    x = p.check_point(x)
    gx = p.G(x) if gx is None else gx

    fx = _factor(p, x, fd_step, 'x')
    y = x - fx.solve(gx)
    z = y - fx.solve(p.G(y))

    fy = _factor(p, y, fd_step, 'y')
    return y, z, z - fy.solve(p.G(z))


def newton_traub_step_reference(p, x, fd_step=FD_STEP):
    """newton_traub_step with G'(x) recomputed and refactored for the z sub-step."""

    x = p.check_point(x)
    y = x - _factor(p, x, fd_step, 'x').solve(p.G(x))
    z = y - _factor(p, x, fd_step, 'x').solve(p.G(y))
    return y, z, z - _factor(p, y, fd_step, 'y').solve(p.G(z))


def newton_step(p, x, fd_step=FD_STEP, gx=None):
    x = p.check_point(x)
    gx = p.G(x) if gx is None else gx
    return x - _factor(p, x, fd_step, 'x').solve(gx)


@dataclass
class IterationTrace:
    """Record of a solve: one dict per outer iteration with keys t, x, y, z, res_norm, err_x, err_y, err_z.

    y and z (and their errors) are None on the final record and for plain Newton; errors are None when the problem
    has no known root.
    """

    problem: str = ''
    method: str = 'traub'
    norm: str = 'max'
    records: list = field(default_factory=list)
    status: str = None

    @property
    def iterations(self):
        """Number of completed outer steps."""
        return sum(1 for r in self.records if r['stepped'])

    @property
    def converged(self):
        return self.status == 'Converged'

    @property
    def final_residual(self):
        return self.records[-1]['res_norm'] if self.records else None

    @property
    def x(self):
        return self.records[-1]['x'] if self.records else None

    def errors(self):
        """Outer-iterate errors err_x as an array, or None without a known root."""
        if not self.records or self.records[0]['err_x'] is None:
            return None
        return np.array([r['err_x'] for r in self.records])

    def to_frame(self):
        cols = ['t', 'res_norm', 'err_x', 'err_y', 'err_z']
        rows = [{c: (np.nan if r[c] is None else r[c]) for c in cols} for r in self.records]
        return pd.DataFrame(rows, columns=cols)

    def to_jsonl(self):
        keys = ('t', 'x', 'y', 'z', 'res_norm', 'err_x', 'err_y', 'err_z')
        return ''.join(ioutil.dumps({k: r[k] for k in keys}, indent=None) + '\n' for r in self.records)

    def to_dict(self):
        return {'problem': self.problem, 'method': self.method, 'norm': self.norm, 'status': self.status,
                'iterations': self.iterations, 'final_residual': self.final_residual}


def _record(p, t, x, y, z, res_norm, norm, stepped):
    return {'t': t, 'x': x, 'y': y, 'z': z, 'res_norm': res_norm,
            'err_x': p.error(x, norm), 'err_y': p.error(y, norm), 'err_z': p.error(z, norm),
            'stepped': stepped}


def solve(p, x0, tol=1e-12, max_iter=50, fd_step=FD_STEP, norm='max', method='traub'):
    """Iterate from x0 until ||G(x_t)|| <= tol.

    Parameters
    ----------
    p : Problem
    x0 : array_like
        Starting point of dimension p.dim
    tol : float
        Residual tolerance in the chosen norm
    max_iter : int
        Maximum number of outer steps
    fd_step : float
    norm : str
        'max' or 'euclidean', for residuals and errors
    method : str
        'traub' for the three-step iteration, 'newton' for plain Newton

    Returns
    -------
    IterationTrace
        status is 'Converged', 'MaxIter' or 'Diverged'. A singular Jacobian raises SingularJacobian carrying the
        partial trace. The residual is tested before any Jacobian is formed, so a start at a root is Converged even
        where G' is singular there (G(x) = x**2 from 0).
    """

    if max_iter < 1:
        raise ValueError(f'max_iter must be at least 1, got {max_iter}')
    if not tol > 0:
        raise ValueError(f'tol must be positive, got {tol}')
    if method not in ('traub', 'newton'):
        raise ValueError(f'Unknown method {method!r}; expected "traub" or "newton"')

    x = p.check_point(x0)
    trace = IterationTrace(problem=p.name, method=method, norm=norm)

    for t in range(max_iter + 1):
        gx = p.G(x)
        res = vector_norm(gx, norm)
        log.debug('%s t=%d residual=%.3e', p.name, t, res)

        if res <= tol:
            trace.status = 'Converged'
        elif not np.all(np.isfinite(x)) or vector_norm(x, norm) > DIVERGENCE:
            trace.status = 'Diverged'
        elif t == max_iter:
            trace.status = 'MaxIter'
        if trace.status is not None:
            trace.records.append(_record(p, t, x, None, None, res, norm, False))
            break

        try:
            if method == 'traub':
                y, z, x_next = newton_traub_step(p, x, fd_step, gx)
            else:
                y, z, x_next = None, None, newton_step(p, x, fd_step, gx)
        except SingularJacobian as e:
            trace.records.append(_record(p, t, x, None, None, res, norm, False))
            trace.status = 'SingularJacobian'
            raise SingularJacobian(str(e), which=e.which, trace=trace) from e

        trace.records.append(_record(p, t, x, y, z, res, norm, True))
        x = x_next

    log.debug('%s finished: %s after %d steps', p.name, trace.status, trace.iterations)
    return trace


def newton_solve(p, x0, tol=1e-12, max_iter=50, fd_step=FD_STEP, norm='max'):
    """Plain Newton under the same trace type."""
    return solve(p, x0, tol, max_iter, fd_step, norm, method='newton')


def _admissible_errors(trace):
    errors = trace.errors()
    if errors is None:
        raise InsufficientData('Convergence order estimates need a problem with a known root')
    return errors


def coc_estimate(trace):
    """Computational order of convergence ln(e_{t+1}/e_t)/ln(e_t/e_{t-1}) over every triple of consecutive outer
    errors above the rounding floor.

    Returns
    -------
    list of float
    """

    estimates = [float(v) for v in coc_series(trace) if np.isfinite(v)]
    if not estimates:
        raise InsufficientData(f'No three consecutive errors above {SATURATION:.1e} in a trace of '
                               f'{len(trace.records)}')
    return estimates


def coc_series(trace):
    """COC aligned with the trace records: entry t uses e_{t-2}, e_{t-1}, e_t and is NaN where the triple is missing
    or saturated.
    """

    errors = _admissible_errors(trace)
    out = np.full(errors.size, np.nan)
    for t in range(2, errors.size):
        e0, e1, e2 = errors[t-2:t+1]
        if min(e0, e1, e2) > SATURATION and e1 != e0:
            out[t] = np.log(e2/e1)/np.log(e1/e0)
    return out


def fit_order_constant(trace, order=5):
    """Smallest K with e_{t+1} <= K e_t**order over the consecutive pairs whose first error is above the rounding
    floor.
    """

    errors = _admissible_errors(trace)
    ratios = [e1/e0**order for e0, e1 in zip(errors, errors[1:]) if e0 > SATURATION]
    if not ratios:
        raise InsufficientData('No pre-saturation error pairs to fit')
    return float(max(ratios))
