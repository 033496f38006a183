import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from lrasobol.errors import InvalidParameter, NonFinite, OutOfSupport
from lrasobol.input_model import EULER_GAMMA, InputModel, Marginal, gumbel_params, lognormal_params


def all_families():
    return [
        Marginal.uniform(2.0, 6.0, "u"),
        Marginal.gaussian(1.0, 2.0, "g"),
        Marginal.lognormal(1.0, 0.3, "ln"),
        Marginal.gumbel(50.0, 0.15, "gu"),
    ]


def test_uniform_midpoint_maps_to_zero():
    assert Marginal.uniform(0, 1).to_standard(0.5) == pytest.approx(0.0, abs=1e-15)


def test_lognormal_median_maps_to_zero():
    m = Marginal.lognormal(1.0, 0.3)
    lam, _ = m.params
    assert m.to_standard(math.exp(lam)) == pytest.approx(0.0, abs=1e-12)


def test_gumbel_median_maps_to_zero():
    m = Marginal.gumbel(50.0, 0.15)
    assert m.to_standard(m.ppf(0.5)) == pytest.approx(0.0, abs=1e-10)


def test_uniform_endpoint():
    assert Marginal.uniform(2, 6).from_standard(-1.0) == pytest.approx(2.0)


def test_lognormal_from_standard_zero_is_median():
    m = Marginal.lognormal(1.0, 0.3)
    zeta = math.sqrt(math.log(1.09))
    lam = -zeta**2 / 2
    x = m.from_standard(0.0)
    assert x == pytest.approx(math.exp(lam), rel=1e-14)
    # independent oracle: numerically invert the scipy CDF
    ref = stats.lognorm(s=zeta, scale=math.exp(lam))
    assert ref.cdf(x) == pytest.approx(0.5, abs=1e-12)


def test_round_trip_all_families():
    rng = np.random.default_rng(0)
    for m in all_families():
        u = rng.uniform(-1, 1, 1000) if m.standard_family == "legendre" else rng.standard_normal(1000)
        assert np.max(np.abs(m.to_standard(m.from_standard(u)) - u)) < 1e-10


def test_cdf_matching_against_scipy():
    rng = np.random.default_rng(1)
    refs = {
        "uniform": stats.uniform(2.0, 4.0),
        "gaussian": stats.norm(1.0, 2.0),
    }
    lam, zeta = lognormal_params(1.0, 0.3)
    refs["lognormal"] = stats.lognorm(s=zeta, scale=math.exp(lam))
    loc, scale = gumbel_params(50.0, 0.15)
    refs["gumbel"] = stats.gumbel_r(loc, scale)
    for m in all_families():
        ref = refs[m.family]
        x = ref.ppf(rng.uniform(0.001, 0.999, 1000))
        u = m.to_standard(x)
        std_cdf = (u + 1) / 2 if m.standard_family == "legendre" else stats.norm.cdf(u)
        assert np.max(np.abs(std_cdf - ref.cdf(x))) < 1e-10


def test_monotone():
    for m in all_families():
        x = m.ppf(np.linspace(0.01, 0.99, 200))
        assert np.all(np.diff(m.to_standard(x)) > 0)


def test_lognormal_params_reject_zero_cov():
    with pytest.raises(InvalidParameter):
        lognormal_params(1.0, 0.0)
    with pytest.raises(InvalidParameter):
        lognormal_params(-1.0, 0.1)


@pytest.mark.parametrize("mean,cov", [(1.0, 0.3), (30000.0, 0.15), (2.1e11, 0.1)])
def test_lognormal_moments_by_quadrature(mean, cov):
    lam, zeta = lognormal_params(mean, cov)
    if (mean, cov) == (1.0, 0.3):
        assert zeta == pytest.approx(0.29356, abs=1e-5)
    pdf = stats.lognorm(s=zeta, scale=math.exp(lam)).pdf
    # integrate in log space for conditioning
    m1 = integrate.quad(lambda t: math.exp(t) * pdf(math.exp(t)) * math.exp(t), lam - 12 * zeta, lam + 12 * zeta,
                        epsabs=0, epsrel=1e-13)[0]
    m2 = integrate.quad(lambda t: math.exp(2 * t) * pdf(math.exp(t)) * math.exp(t), lam - 12 * zeta,
                        lam + 12 * zeta, epsabs=0, epsrel=1e-13)[0]
    assert m1 / mean == pytest.approx(1.0, abs=1e-11)
    assert math.sqrt(m2 - m1**2) / m1 == pytest.approx(cov, rel=1e-9)


def test_gumbel_moments_by_quadrature():
    loc, scale = gumbel_params(50.0, 0.15)
    assert scale > 0 and loc < 50.0
    assert loc == pytest.approx(50.0 - EULER_GAMMA * scale)
    pdf = stats.gumbel_r(loc, scale).pdf
    m1 = integrate.quad(lambda x: x * pdf(x), loc - 40 * scale, loc + 60 * scale, epsabs=0, epsrel=1e-13)[0]
    m2 = integrate.quad(lambda x: x * x * pdf(x), loc - 40 * scale, loc + 60 * scale, epsabs=0, epsrel=1e-13)[0]
    assert m1 == pytest.approx(50.0, abs=1e-10)
    assert math.sqrt(m2 - m1**2) / m1 == pytest.approx(0.15, rel=1e-9)


@given(st.floats(0.01, 1e6), st.floats(0.01, 2.0))
def test_gumbel_scale_positive_location_below_mean(mean, cov):
    loc, scale = gumbel_params(mean, cov)
    assert scale > 0 and loc < mean


@given(st.floats(1e-3, 1e12), st.floats(1e-3, 3.0))
@settings(max_examples=50)
def test_lognormal_params_reproduce_mean(mean, cov):
    m = Marginal.lognormal(mean, cov)
    assert m.mean == pytest.approx(mean, rel=1e-12)
    assert m.std / m.mean == pytest.approx(cov, rel=1e-12)


def test_out_of_support():
    with pytest.raises(OutOfSupport):
        Marginal.uniform(0, 1).to_standard(1.5)
    with pytest.raises(OutOfSupport):
        Marginal.lognormal(1.0, 0.3).to_standard(-1.0)


def test_from_standard_overflow():
    with pytest.raises(NonFinite):
        Marginal.lognormal(1.0, 0.3).from_standard(1e6)
    with pytest.raises(NonFinite):
        Marginal.gaussian(0, 1).from_standard(np.nan)


@pytest.mark.parametrize("args", [("uniform", 1, 1), ("gaussian", 0, 0), ("lognormal", 0, 0.1), ("weibull", 1, 1)])
def test_invalid_parameters(args):
    with pytest.raises(InvalidParameter):
        Marginal(*args)


def test_input_model_vectorized_and_records():
    im = InputModel(all_families())
    assert im.dim == 4
    assert im.standard_families == ["legendre", "hermite", "hermite", "hermite"]
    q = np.random.default_rng(2).random((50, 4))
    x = im.from_unit(q)
    assert np.allclose(im.from_standard(im.to_standard(x)), x, rtol=1e-10)
    assert np.allclose(im.standard_from_unit(q), im.to_standard(x), atol=1e-9)
    assert InputModel.from_records(im.to_records()) == im


def test_default_names():
    im = InputModel([Marginal.uniform(0, 1), Marginal.uniform(0, 1)])
    assert im.names == ["x1", "x2"]


def test_record_missing_field():
    with pytest.raises(InvalidParameter, match="cov"):
        Marginal.from_record({"name": "E", "family": "lognormal", "mean": 1.0})
