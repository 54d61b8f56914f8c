import warnings
import numpy as np
import pytest
from numpy.testing import assert_allclose
from .. import averages as av
from .. import bounds
from .. import problems
from .. import radii
from .. import solver
from ..exceptions import InsufficientData, ModelError

E = np.e


def quiet_report(model, d):
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        return bounds.constants_report(model, d)


def test_constant_closed_forms():

    m = problems.make_motivational().model
    d = bounds.SeedDistances(0.1, 0.01, 0.001)
    report = quiet_report(m, d)

    assert report.variant == 'T31'
    assert report.flags['closed_form_mismatch'] == []
    assert_allclose(report.c, report.closed_forms['c'], rtol=1e-12)
    assert report.flags['c_lt_1']

    k, k0 = E/2, (E - 1)/2
    assert_allclose(report.c1, k*0.1/(1 - 2*k0*0.1), rtol=1e-12)
    assert_allclose(report.e_factor, report.c1**2*report.c2*0.1**2/(0.01*0.001), rtol=1e-12)
    assert_allclose(report.e_factor_printed, report.c1*report.c2*0.1**2/(0.01*0.001), rtol=1e-12)

    return


def test_affine_closed_forms():

    m = problems.make_hammerstein(4).model
    report = quiet_report(m, bounds.SeedDistances(0.2, 0.05, 0.01))
    assert_allclose(report.c, report.closed_forms['c'], rtol=1e-12)
    assert report.flags['closed_form_mismatch'] == []

    return


def test_center_only_closed_forms():

    d = bounds.SeedDistances(0.05, 0.02, 0.01)
    for center in [av.Power(1.0, 0.5), av.Rational(1.0, 1.0)]:
        report = quiet_report(av.LipschitzModel(radius_avg=None, center_avg=center), d)
        assert report.variant == 'T52'
        assert report.c is None
        assert report.e_factor is None
        assert_allclose(report.q_t52, report.closed_forms['q_t52'], rtol=1e-10)
        assert report.flags['closed_form_mismatch'] == []

    return


def test_printed_power_q_is_flagged():

    m = av.LipschitzModel(radius_avg=av.Power(2.0, 0.5), center_avg=av.Power(1.0, 0.5))
    with pytest.warns(UserWarning, match='Closed-form q_t51'):
        report = bounds.constants_report(m, bounds.SeedDistances(0.01, 0.005, 0.001))
    assert 'q_t51' in report.flags['closed_form_mismatch']
    assert report.variant == 'T51'

    # The printed form carries an extra a/(1+a)
    assert_allclose(report.closed_forms['q_t51'][0], report.q1*0.5/1.5, rtol=1e-12)

    return


def test_degenerate_seeds():

    m = problems.make_motivational().model
    with pytest.warns(UserWarning, match='landed exactly'):
        report = bounds.constants_report(m, bounds.SeedDistances(0.1, 0.0, 0.0))
    assert report.flags['converged_degenerate']
    assert report.e_factor == 0.0
    assert report.f_factor == 0.0

    zero = quiet_report(m, bounds.SeedDistances(0.0, 0.0, 0.0))
    assert zero.c == (0.0, 0.0, 0.0)
    assert zero.q_t52 == (0.0, 0.0, 0.0)
    seq = bounds.bound_sequences(zero, t_max=3)
    assert (seq['bound_linear'] == 0).all()

    return


def test_outside_ball():

    with pytest.raises(ModelError):
        bounds.constants_q_t52(av.Constant(1.0), bounds.SeedDistances(0.6, 0.0, 0.0))
    with pytest.raises(ValueError):
        bounds.SeedDistances(-0.1, 0.0, 0.0)

    return


def test_sequences():

    assert_allclose(bounds.error_seq_order5(0.5, 1.0, 3), [0.5**4, 0.5**24, 0.5**124], rtol=1e-14)
    assert_allclose(bounds.error_seq_linear(0.5, 2.0, 3), [1.0, 0.5, 0.25], rtol=1e-14)
    assert_allclose(bounds.error_seq_weak(0.5, 1.0, 1.0, 3), bounds.error_seq_order5(0.5, 1.0, 3), rtol=1e-14)
    assert_allclose(bounds.error_seq_weak(0.5, 0.0, 1.0, 3), [0.5**0]*3, rtol=1e-14)

    with pytest.warns(UserWarning, match='vacuous'):
        bounds.error_seq_linear(1.5, 1.0, 3)
    with pytest.raises(ValueError):
        bounds.error_seq_weak(0.5, 2.0, 1.0, 3)

    return


def test_per_step_bounds():

    k0 = (E - 1)/2
    center = av.Constant(k0)
    rho = 0.1
    assert_allclose(bounds.per_step_bound(center, (rho, rho), 'y', 'T52'), 3*k0*rho**2/(1 - 2*k0*rho), rtol=1e-12)

    m = problems.make_motivational().model
    assert_allclose(bounds.per_step_bound(m, (rho, rho), 'y', 'T31'), E/2*rho**2/(1 - 2*k0*rho), rtol=1e-12)
    assert_allclose(bounds.per_step_bound(m, (rho, 0.01), 'z', 'T31'), E/2*(rho + 0.01)/2*0.01/(1 - 2*k0*rho),
                    rtol=1e-12)

    with pytest.raises(ValueError):
        bounds.per_step_bound(m, (rho, rho), 'w')
    with pytest.raises(ModelError):
        bounds.per_step_bound(center, (rho, rho), 'y', 'T31')

    return


def test_predicted_seeds():

    m = problems.make_motivational().model
    d = bounds.predict_seeds(m, 0.1)
    q1, q2, _ = bounds.constants_q_t51(m, bounds.SeedDistances(0.1, d.rho_y0, 0.0))
    assert_allclose(d.rho_y0, bounds.constants_q_t51(m, bounds.SeedDistances(0.1, 0.0, 0.0))[0]*0.1, rtol=1e-14)
    assert_allclose(d.rho_z0, q2*d.rho_y0, rtol=1e-14)
    assert d.rho_z0 < d.rho_y0 < d.rho_x0

    return


def test_seeds_from_trace():

    case = problems.make_motivational()
    trace = solver.solve(case.problem, case.x0)
    d = bounds.seeds_from_trace(trace)
    assert d.rho_x0 == pytest.approx(0.3)
    assert d.rho_z0 < d.rho_y0 < d.rho_x0

    unknown = solver.Problem(dim=1, residual=lambda x: x**2 - 2)
    with pytest.raises(InsufficientData):
        bounds.seeds_from_trace(solver.solve(unknown, [1.0]))

    return


def random_starts(n, radius, dim, seed=0):
    rng = np.random.default_rng(seed)
    return [rng.uniform(-radius, radius, size=dim) for _ in range(n)]


def test_domination_motivational():

    case = problems.make_motivational()
    m = case.model
    delta = radii.radius_t31(m).delta
    starts = random_starts(50, 0.99*delta, 3)

    frame = bounds.check_domination(case.problem, m, starts, variant='T52')
    assert len(frame) > 0
    assert frame['dominated'].all()

    # The y-step needs the radius condition only on the diagonal, where the problem satisfies it
    for row in frame.itertuples():
        bound = bounds.per_step_bound(m, (row.err_x, row.err_x), 'y', 'T31')
        assert row.err_y <= bound + 1e-12 + 1e-9*bound

    # The T31 z and x bounds need it on (y, z) pairs off the diagonal, and fail there
    default = bounds.check_domination(case.problem, m, starts)
    assert default['dominated'].all()
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        radius_form = bounds.check_domination(case.problem, m, starts, variant='T31')
    assert not radius_form['dominated'].all()

    return


def test_constants_below_one_in_ball():

    case = problems.make_motivational()
    m = case.model
    delta = radii.radius_t31(m).delta
    for x0 in random_starts(50, 0.99*delta, 3, seed=1):
        trace = solver.solve(case.problem, x0, max_iter=1)
        d = bounds.seeds_from_trace(trace)
        if d.degenerate:
            continue
        report = quiet_report(m, d)
        assert report.flags['c_lt_1']

    # The q's need the smaller of the weak and center-only balls
    small = min(radii.radius_t51(m).delta, radii.radius_t52(m.center_avg).delta)
    for x0 in random_starts(50, 0.99*small, 3, seed=2):
        d = bounds.seeds_from_trace(solver.solve(case.problem, x0, max_iter=1))
        if d.degenerate:
            continue
        report = quiet_report(m, d)
        assert report.flags['q_lt_1']
        assert report.flags['q_t52_lt_1']

    return


def test_domination_hammerstein():

    case = problems.make_hammerstein(8)
    delta = radii.radius_t31(case.model).delta
    frame = bounds.check_domination(case.problem, case.model, random_starts(20, 0.99*delta, 8), variant='T52')
    assert frame['dominated'].all()

    return


def test_bound_sequences_frame():

    m = problems.make_motivational().model
    report = quiet_report(m, bounds.SeedDistances(0.1, 0.01, 0.001))
    seq = bounds.bound_sequences(report, t_max=4)
    assert list(seq.columns) == ['t', 'bound_linear', 'bound_order5', 'bound_weak', 'bound_f', 'bound_f_weak']
    assert list(seq['t']) == [1, 2, 3, 4]

    d = report.to_dict()
    for key in ['c', 'q', 'E', 'E_printed', 'F', 'variant', 'flags']:
        assert key in d

    return
