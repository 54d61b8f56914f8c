import json
import numpy as np
import pytest
from numpy.testing import assert_allclose
from .. import problems
from .. import radii
from .. import solver
from ..exceptions import DomainError, InsufficientData, SingularJacobian, SingularMatrix


def sqrt2():
    return solver.Problem(dim=1, residual=lambda x: x**2 - 2, jacobian=lambda x: np.array([[2*x[0]]]),
                          known_root=np.array([np.sqrt(2)]), name='sqrt2')


def test_lu():

    rng = np.random.default_rng(0)
    A = rng.standard_normal((6, 6)) + 6*np.eye(6)
    b = rng.standard_normal(6)
    assert_allclose(solver.lu_solve(A, b), np.linalg.solve(A, b), rtol=1e-12)

    f = solver.LUFactorization(A)
    assert_allclose(solver.lu_solve(f, 2*b), 2*np.linalg.solve(A, b), rtol=1e-12)

    for bad in [np.array([[1.0, 2.0], [2.0, 4.0]]), np.zeros((2, 2)), np.array([[1.0, np.nan], [0.0, 1.0]])]:
        with pytest.raises(SingularMatrix):
            solver.LUFactorization(bad)

    with pytest.raises(ValueError):
        solver.LUFactorization(np.ones((2, 3)))

    return


def test_lu_scaled_rows():

    # Badly scaled but nonsingular rows are accepted
    A = np.array([[1e-20, 0.0], [0.0, 1e20]])
    assert_allclose(solver.lu_solve(A, np.array([1e-20, 1e20])), [1.0, 1.0], rtol=1e-14)

    return


def test_fd_jacobian():

    case = problems.make_hammerstein(6)
    x = np.linspace(-0.3, 0.3, 6)
    assert_allclose(solver.jacobian_fd(case.problem, x), case.problem.jacobian(x), atol=1e-6)

    return


def test_step_matches_reference():

    case = problems.make_hammerstein(8)
    x = np.full(8, 0.3)
    for fast, ref in zip(solver.newton_traub_step(case.problem, x), solver.newton_traub_step_reference(case.problem, x)):
        assert_allclose(fast, ref, rtol=1e-14, atol=1e-16)

    return


def test_solve_scalar():

    trace = solver.solve(sqrt2(), [1.0])
    assert trace.converged
    assert_allclose(trace.x, [np.sqrt(2)], rtol=1e-15)
    assert trace.iterations <= 3

    newton = solver.newton_solve(sqrt2(), [1.0])
    assert newton.converged
    assert newton.iterations > trace.iterations
    assert newton.records[0]['y'] is None

    return


def test_solve_without_jacobian():

    p = solver.Problem(dim=2, residual=lambda x: np.array([x[0]**2 + x[1] - 3, x[0] - x[1] + 1]),
                       known_root=np.array([1.0, 2.0]))
    trace = solver.solve(p, [1.2, 2.1])
    assert trace.converged
    assert_allclose(trace.x, [1.0, 2.0], rtol=1e-10)

    return


def test_statuses():

    case = problems.make_motivational()
    trace = solver.solve(case.problem, case.x0, tol=1e-15, max_iter=1)
    assert trace.status == 'MaxIter'
    assert trace.iterations == 1
    assert trace.records[-1]['y'] is None

    atan = solver.Problem(dim=1, residual=np.arctan, jacobian=lambda x: np.array([[1/(1 + x[0]**2)]]),
                          known_root=np.zeros(1))
    assert solver.solve(atan, [3.0], method='newton').status == 'Diverged'

    done = solver.solve(case.problem, np.zeros(3))
    assert done.converged
    assert done.iterations == 0

    return


def test_singular_jacobian():

    # G(x) = x**2 + 1 from x = 1 puts y exactly at 0, where G' vanishes
    p = solver.Problem(dim=1, residual=lambda x: x**2 + 1, jacobian=lambda x: np.array([[2*x[0]]]))
    with pytest.raises(SingularJacobian) as info:
        solver.solve(p, [1.0])
    assert info.value.which == 'y'
    assert info.value.trace.status == 'SingularJacobian'
    assert len(info.value.trace.records) == 1

    with pytest.raises(SingularJacobian) as info:
        solver.solve(p, [0.0])
    assert info.value.which == 'x'

    # A start at a root stops on the residual before G'(x0) = 0 is factored
    square = solver.Problem(dim=1, residual=lambda x: x**2, jacobian=lambda x: np.array([[2*x[0]]]),
                            known_root=np.zeros(1))
    trace = solver.solve(square, [0.0])
    assert trace.status == 'Converged'
    assert trace.iterations == 0

    return


def test_step_by_hand():

    identity = solver.Problem(dim=1, residual=lambda x: x, jacobian=lambda x: np.eye(1))
    for v in solver.newton_traub_step(identity, [1.0]):
        assert_allclose(v, [0.0], atol=1e-15)

    # y = 2 - 3/4, z = y - (y**2 - 1)/4, x+ = z - (z**2 - 1)/(2y)
    p = solver.Problem(dim=1, residual=lambda x: x**2 - 1, jacobian=lambda x: np.array([[2*x[0]]]))
    y, z, x_next = solver.newton_traub_step(p, [2.0])
    assert_allclose(y, [1.25], rtol=1e-15)
    assert_allclose(z, [1.109375], rtol=1e-15)
    assert_allclose(x_next, [1.01708984375], rtol=1e-15)

    return


def test_affine_covariance():

    case = problems.make_motivational()
    p = case.problem
    rng = np.random.default_rng(7)
    A = rng.standard_normal((3, 3)) + 4*np.eye(3)
    mixed = solver.Problem(dim=3, residual=lambda x: A @ p.G(x), jacobian=lambda x: A @ p.jacobian(x),
                           known_root=np.zeros(3))

    x = mixed_x = case.x0
    for _ in range(2):
        steps = solver.newton_traub_step(p, x)
        mixed_steps = solver.newton_traub_step(mixed, mixed_x)
        for a, b in zip(steps, mixed_steps):
            assert_allclose(a, b, rtol=1e-12, atol=1e-12)
        x, mixed_x = steps[-1], mixed_steps[-1]

    return


def test_errors_decrease_inside_the_ball():

    case = problems.make_motivational()
    delta = radii.radius_t31(case.model).delta
    rng = np.random.default_rng(3)

    for _ in range(30):
        x0 = rng.uniform(-0.99*delta, 0.99*delta, 3)
        trace = solver.solve(case.problem, x0, tol=1e-15, max_iter=6)
        err = trace.errors()
        assert np.all(np.diff(err) <= 1e-15)
        for r in trace.records:
            for key in ('err_y', 'err_z'):
                assert r[key] is None or r[key] < delta

    return


def test_bad_arguments():

    case = problems.make_motivational()
    with pytest.raises(DomainError):
        solver.solve(case.problem, [0.1, 0.1])
    with pytest.raises(ValueError):
        solver.solve(case.problem, case.x0, tol=0.0)
    with pytest.raises(ValueError):
        solver.solve(case.problem, case.x0, method='halley')
    with pytest.raises(ValueError):
        solver.vector_norm(case.x0, 'l1')

    return


def test_coc_motivational():

    case = problems.make_motivational()
    trace = solver.solve(case.problem, case.x0)
    estimates = solver.coc_estimate(trace)

    assert len(estimates) >= 1
    for coc in estimates:
        assert 4 <= coc <= 6

    K = solver.fit_order_constant(trace)
    errors = trace.errors()
    for e0, e1 in zip(errors, errors[1:]):
        if e0 > solver.SATURATION:
            assert e1 <= K*e0**5*(1 + 1e-12)

    series = solver.coc_series(trace)
    assert len(series) == len(trace.records)
    assert np.isnan(series[:2]).all()

    return


def test_hammerstein_converges():

    case = problems.make_hammerstein(8)
    trace = solver.solve(case.problem, case.x0)
    assert trace.converged
    assert trace.iterations <= 4
    assert np.isfinite(solver.fit_order_constant(trace))

    return


def test_coc_needs_data():

    with pytest.raises(InsufficientData):
        solver.coc_estimate(solver.solve(solver.Problem(dim=1, residual=lambda x: x**2 - 2), [1.0]))

    case = problems.make_motivational()
    with pytest.raises(InsufficientData):
        solver.coc_estimate(solver.solve(case.problem, np.zeros(3)))

    return


def test_trace_serialization():

    case = problems.make_motivational()
    trace = solver.solve(case.problem, case.x0)

    frame = trace.to_frame()
    assert list(frame.columns) == ['t', 'res_norm', 'err_x', 'err_y', 'err_z']
    assert len(frame) == len(trace.records)
    assert np.isnan(frame['err_y'].iloc[-1])

    lines = trace.to_jsonl().splitlines()
    assert len(lines) == len(trace.records)
    first = json.loads(lines[0])
    assert_allclose(first['x'], case.x0)
    assert set(trace.to_dict()) == {'problem', 'method', 'norm', 'status', 'iterations', 'final_residual'}

    return


def test_euclidean_norm():

    case = problems.make_hammerstein(4)
    trace = solver.solve(case.problem, case.x0, norm='euclidean')
    assert trace.converged
    assert_allclose(trace.records[0]['err_x'], 0.3*2, rtol=1e-14)

    return
