import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from .. import averages as av
from .. import util
from ..exceptions import ConfigError, DomainError, ModelError, QuadratureError

E = np.e
QUICK = settings(max_examples=50, derandomize=True, deadline=None)
ORACLE = settings(max_examples=200, derandomize=True, deadline=None)


def test_integral_closed_forms():

    assert integral_equal(av.integral_K(av.Constant(2.0), 3.0), 6.0)
    assert integral_equal(av.integral_M(av.Affine(1.0, 2.0), 3.0), 22.5)
    assert integral_equal(av.integral_K(av.Power(2.0, 0.5), 4.0), 4.0)
    assert integral_equal(av.integral_K(av.Rational(1.0, 1.0), 0.5), 3.0)
    assert integral_equal(av.integral_M(av.Rational(1.0, 1.0), 0.5), 1.0)
    assert av.integral_K(av.Affine(1.0, 1.0), 0.0) == 0.0

    return


def integral_equal(a, b):
    return abs(a - b) <= 1e-12*max(1.0, abs(b))


averages = st.one_of(
    st.builds(av.Constant, st.floats(0.1, 10)),
    st.builds(av.Affine, st.floats(0.0, 5), st.floats(0.1, 5)),
    st.builds(av.Power, st.floats(0.1, 5), st.floats(0.3, 1.0)),
    st.builds(av.Rational, st.floats(0.1, 5), st.floats(0.1, 5)),
)


@ORACLE
@given(averages, st.floats(0.01, 0.9))
def test_closed_forms_match_quadrature(f, frac):

    s = frac*min(f.domain_hi, 10.0)
    K = av.adaptive_quadrature(f, 0.0, s, tol=1e-12)
    M = av.adaptive_quadrature(lambda u: u*f(u), 0.0, s, tol=1e-12)

    assert_allclose(av.integral_K(f, s), K, rtol=1e-9)
    assert_allclose(av.integral_M(f, s), M, rtol=1e-9)

    return


@QUICK
@given(averages, st.floats(0.01, 0.45), st.floats(0.0, 1.0))
def test_tail_is_additive(f, frac, split):

    hi = frac*min(f.domain_hi, 10.0)
    lo = split*hi
    assert_allclose(av.integral_tail(f, lo, hi) + av.integral_K(f, lo), av.integral_K(f, hi), rtol=1e-12, atol=1e-15)

    return


def test_callback_uses_quadrature():

    f = av.Callback(lambda u: 1 + 2*u)
    assert_allclose(av.integral_K(f, 1.0), 2.0, rtol=1e-10)
    assert_allclose(av.integral_M(f, 1.0), 0.5 + 2/3, rtol=1e-10)
    assert_allclose(av.integral_tail(f, 0.5, 1.0), 2.0 - 0.75, rtol=1e-10)
    assert f.nondecreasing

    with pytest.raises(ConfigError):
        f.to_dict()

    return


def test_center_moment_constant():

    k, rho = 0.7, 0.3
    assert_allclose(av.integral_center_moment(av.Constant(k), rho), k*rho**2, rtol=1e-14)
    assert_allclose(av.integral_segment_moment(av.Constant(k), 0.2, 0.1), k*0.3/2*0.1, rtol=1e-14)
    assert av.integral_segment_moment(av.Constant(k), 0.0, 0.0) == 0.0

    return


def test_domain_errors():

    with pytest.raises(DomainError):
        av.eval_kappa(av.Constant(1.0), 0.0)
    with pytest.raises(DomainError):
        av.eval_kappa(av.Rational(2.0, 1.0), 0.5)
    with pytest.raises(DomainError):
        av.integral_K(av.Rational(2.0, 1.0), 0.5)
    with pytest.raises(DomainError):
        av.integral_K(av.Constant(1.0), -1.0)
    with pytest.raises(DomainError):
        av.integral_tail(av.Constant(1.0), 0.5, 0.2)
    with pytest.raises(DomainError):
        av.adaptive_quadrature(np.cos, 1.0, 0.0)

    return


def test_invalid_parameters():

    with pytest.raises(ModelError):
        av.Constant(0.0)
    with pytest.raises(ModelError):
        av.Affine(0.0, 0.0)
    with pytest.raises(ModelError):
        av.Power(1.0, 1.5)
    with pytest.raises(ModelError):
        av.Rational(-1.0, 1.0)

    return


def test_quadrature_budget():

    with pytest.raises(QuadratureError):
        av.adaptive_quadrature(lambda u: abs(np.sin(50*u)), 0.0, 10.0, tol=1e-14, budget=42)

    return


def test_quadrature_endpoint_singularity():

    # u**-0.7 is integrable at 0 and the integrand is never evaluated there
    assert_allclose(av.adaptive_quadrature(lambda u: u**-0.7, 0.0, 1.0), 1/0.3, rtol=1e-9)

    return


def test_parse_number():

    assert_allclose(av.parse_number('e/2'), E/2, rtol=1e-15)
    assert_allclose(av.parse_number('exp(1/(e-1))/2'), np.exp(1/(E - 1))/2, rtol=1e-15)
    assert av.parse_number(3) == 3.0

    for bad in ['__import__("os")', 'e +', 'x*2', True]:
        with pytest.raises(ConfigError):
            av.parse_number(bad)

    return


def test_from_dict():

    f = av.AverageFunction.from_dict({'kind': 'const', 'k': '(e-1)/2'})
    assert f == av.Constant((E - 1)/2)
    assert av.AverageFunction.from_dict(av.Rational(1.0, 2.0).to_dict()) == av.Rational(1.0, 2.0)

    with pytest.raises(ConfigError):
        av.AverageFunction.from_dict({'kind': 'spline'})
    with pytest.raises(ConfigError):
        av.AverageFunction.from_dict({'kind': 'affine', 'gamma': 1.0})
    with pytest.raises(ConfigError):
        av.AverageFunction.from_dict([1, 2])

    return


def test_model_serialization():

    m = av.LipschitzModel(radius_avg=av.Affine(0.0, 3.0), center_avg=av.Affine(0.0, 1.5), refined_avg=av.Affine(0.0, 3.0))
    assert av.LipschitzModel.from_dict(m.to_dict()) == m

    center_only = av.LipschitzModel.from_dict({'kappa0': {'kind': 'constant', 'k': 1}})
    assert center_only.center_only
    with pytest.raises(ModelError):
        center_only.require_radius('test')
    with pytest.raises(ConfigError):
        av.LipschitzModel.from_dict({'kappa': {'kind': 'constant', 'k': 1}})

    return


def test_model_dominance():

    with pytest.raises(ModelError):
        av.LipschitzModel(radius_avg=av.Constant(1.0), center_avg=av.Constant(2.0))
    with pytest.raises(ModelError):
        av.LipschitzModel(radius_avg=av.Affine(0.0, 1.0), center_avg=av.Constant(0.5))

    m = av.LipschitzModel(radius_avg=av.Power(2.0, 0.5), center_avg=av.Power(1.0, 0.5))
    assert not m.radius_nondecreasing
    assert not m.center_nondecreasing
    assert m.classical().center_avg == av.Power(2.0, 0.5)

    return


def test_kappa_a_monotonicity():

    f = av.Power(1.0, 0.5)
    assert not av.is_nondecreasing_kappa_a(f, 1.0, 10.0)
    assert av.is_nondecreasing_kappa_a(f, 0.5, 10.0)
    assert av.is_nondecreasing_kappa_a(f, 0.0, 10.0)
    assert_allclose(av.kappa_a(f, 0.5, 4.0), 0.5, rtol=1e-15)

    return


nondecreasing = st.one_of(
    st.builds(av.Constant, st.floats(0.1, 10)),
    st.builds(av.Affine, st.floats(0.0, 5), st.floats(0.1, 5)),
    st.builds(av.Rational, st.floats(0.1, 5), st.floats(0.1, 5)),
)


@QUICK
@given(nondecreasing)
def test_normalized_moment_is_nondecreasing(f):

    grid = util.geometric_grid(0.9*min(f.domain_hi, 10.0), av.GRID_N)
    values = np.array([av.integral_M(f, s)/s**2 for s in grid])
    assert util.count_decreases(values, av.MONOTONE_RTOL) == 0

    return


@QUICK
@given(st.floats(0.1, 5), st.floats(0.2, 1.0), st.floats(0.0, 1.0), st.sampled_from([0.0, 1.0]))
def test_phi_is_nondecreasing(c, a_kappa, frac, beta):

    # kappa_a is non-decreasing for every a <= a_kappa
    f = av.Power(c, a_kappa)
    a = frac*a_kappa
    assert av.is_nondecreasing_kappa_a(f, a, 10.0)

    grid = util.geometric_grid(10.0, av.GRID_N)
    values = np.array([av.phi(f, beta, a, P) for P in grid])
    assert util.count_decreases(values, av.MONOTONE_RTOL) == 0

    return


def test_phi_general_moment():

    f = av.Affine(1.0, 2.0)
    # int_0^1 u**0.5 (1 + 2u) du = 2/3 + 4/5
    assert_allclose(av.phi(f, 0.5, 1.0, 1.0), 2/3 + 4/5, rtol=1e-9)
    with pytest.raises(DomainError):
        av.phi(f, -1.0, 1.0, 1.0)

    return


def test_sign_changes_and_decreases():

    values = np.array([-2.0, -1.0, 0.0, 1.0, 2.0, -1.0])
    assert list(util.sign_changes(values)) == [2, 5]
    assert util.count_decreases(np.array([1.0, 2.0, 1.5, 3.0]), 1e-12) == 1
    assert util.dict_add({'a': 1}, {'a': 2, 'b': 3}) == {'a': 1, 'b': 3}

    return
