import math

import mpmath
import numpy as np
import pytest
from scipy import integrate, stats

from finmix import model_core as mc
from finmix import presets
from finmix.errors import ConfigError, DomainError

ERRORS = [mc.Gaussian(0.7), mc.SkewNormal(4.0), mc.SkewNormal(-2.5, 1.5), mc.Laplace(0.8)]


def _scipy_law(e):
    if isinstance(e, mc.Gaussian):
        return stats.norm(scale=e.sigma)
    if isinstance(e, mc.SkewNormal):
        return stats.skewnorm(e.alpha, loc=-e.mu, scale=e.omega)
    return stats.laplace(scale=e.b)


@pytest.mark.parametrize("err", ERRORS, ids=repr)
def test_error_law_is_centered_with_declared_variance(err):
    law = _scipy_law(err)
    assert law.mean() == pytest.approx(0.0, abs=1e-12)
    assert law.var() == pytest.approx(err.variance, rel=1e-12)


@pytest.mark.parametrize("err", ERRORS, ids=repr)
def test_mgf_matches_quadrature(err):
    law = _scipy_law(err)
    for t in (-0.9, -0.3, 0.4, 1.1):
        try:
            got = float(err.mgf(t))
        except DomainError:
            assert not err.mgf_domain[0] < t < err.mgf_domain[1]
            continue
        f = lambda e: math.exp(t * e + law.logpdf(e))
        ref = integrate.quad(f, -np.inf, 0.0, limit=400)[0] + integrate.quad(f, 0.0, np.inf, limit=400)[0]
        assert got == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("err", ERRORS, ids=repr)
def test_cf_matches_quadrature(err):
    law = _scipy_law(err)
    for s in (0.3, 1.0, 2.5):
        re = integrate.quad(lambda e: math.cos(s * e) * law.pdf(e), -np.inf, np.inf, limit=200)[0]
        im = integrate.quad(lambda e: math.sin(s * e) * law.pdf(e), -np.inf, np.inf, limit=200)[0]
        got = complex(err.cf(s))
        assert abs(got - complex(re, im)) < 1e-8


@pytest.mark.parametrize("err", ERRORS, ids=repr)
def test_cdf_matches_scipy(err):
    z = np.linspace(-4, 4, 17)
    assert np.allclose(err.cdf(z), _scipy_law(err).cdf(z), atol=1e-14)


@pytest.mark.parametrize("err", ERRORS, ids=repr)
def test_high_precision_log_mgf_agrees_with_float(err):
    for t in (-0.5, 0.2, 0.9):
        if not err.mgf_domain[0] < t < err.mgf_domain[1]:
            continue
        assert float(err.log_mgf_mp(mpmath.mpf(t))) == pytest.approx(float(err.log_mgf(t)), rel=1e-12, abs=1e-14)


def test_laplace_mgf_domain_is_enforced():
    with pytest.raises(DomainError):
        mc.Laplace(0.5).log_mgf(2.0)


def test_skew_normal_sampler_moments():
    e = mc.SkewNormal(4.0, 1.5)
    x = e.sample(np.random.default_rng(0), 400_000)
    assert abs(x.mean()) < 5 * math.sqrt(e.variance / x.size)
    assert x.var() == pytest.approx(e.variance, rel=0.01)


def test_gm1_mgf_closed_form():
    # 0.6 e^{1 + 2.25/2} + 0.4 e^{-1 + 0.25/2}
    ref = 0.6 * math.exp(1 + 1.125) + 0.4 * math.exp(-1 + 0.125)
    assert math.exp(mc.pop_cond_mgf(presets.gm1(), 1.0, 0.0)) == pytest.approx(ref, rel=1e-14)
    assert ref == pytest.approx(5.1905, abs=1e-4)


def test_mgf_at_zero_is_one():
    for name, make in presets.PRESETS.items():
        m = make()
        assert mc.pop_cond_mgf(m, 0.0, np.zeros(m.k) + 0.1) == pytest.approx(0.0, abs=1e-15), name


def test_degenerate_log_mgf_is_line_plus_error():
    m = presets.degenerate(0.8)
    for t in (-2.0, 0.5, 3.0):
        assert mc.pop_cond_mgf(m, t, 0.3) == pytest.approx(t * 1.6 + 0.5 * 0.64 * t * t, rel=1e-14)


def test_gm1_cf_closed_form():
    ref = 0.6 * np.exp(1j) * math.exp(-1.125) + 0.4 * np.exp(-1j) * math.exp(-0.125)
    assert abs(mc.pop_cond_cf(presets.gm1(), 1.0, 0.0) - ref) < 1e-15
    assert mc.pop_cond_cf(presets.gm1(), 0.0, 0.7) == 1.0


def test_cf_of_indistinguishable_components():
    e = mc.Gaussian(1.0)
    line = mc.polynomial([0.5, 1.0])
    m = mc.MixtureModel([mc.Component(line, e), mc.Component(line, e)], weights=[0.3, 0.7])
    for s in (0.5, 2.0):
        ref = np.exp(1j * s * 0.9) * math.exp(-0.5 * s * s)
        assert abs(mc.pop_cond_cf(m, s, 0.4) - ref) < 1e-15


def test_gm1_cdf_and_moments():
    gm = presets.gm1()
    assert mc.pop_cond_cdf(gm, 50.0, 0.0) == pytest.approx(1.0, abs=1e-12)
    ref = 0.6 * stats.norm.cdf(0.0) + 0.4 * stats.norm.cdf(2.0 / 0.5)
    assert mc.pop_cond_cdf(gm, 1.0, 0.0) == pytest.approx(ref, abs=1e-15)
    assert mc.pop_cond_mean(gm, 0.0) == pytest.approx(0.2, abs=1e-15)
    assert mc.pop_cond_m2(gm, 0.0) == pytest.approx(2.45, abs=1e-14)


def test_ratio_is_one_at_the_base_point():
    gm = presets.gm1()
    assert mc.pop_log_R(gm, 3.0, 0.4, 0.4) == 0.0
    assert mc.pop_rho(gm, 3.0, 0.4, 0.4) == 1.0


def test_mgf_ratio_slope_is_exact_for_one_line():
    m = presets.degenerate()
    for t in (-5.0, 0.3, 7.0):
        assert mc.pop_log_R(m, t, 0.5, 0.0) / t == pytest.approx(1.0, rel=1e-13)


def test_hp_mgf_matches_log_sum_exp():
    gm3 = presets.gm3()
    ctx = mpmath.mp.clone()
    ctx.dps = 40
    for t in (0.5, 4.0):
        hp = float(ctx.log(mc.pop_cond_mgf_mp(gm3, ctx.mpf(t), [1.2], ctx)))
        assert hp == pytest.approx(mc.pop_cond_mgf(gm3, t, 1.2), rel=1e-13)


def test_polynomial_gradient_matches_differences():
    f = mc.polynomial_terms([(1.0, (2, 0)), (-0.5, (1, 1)), (3.0, (0, 3))], k=2)
    assert f.check_gradient([[0.3, -1.0], [1.5, 2.0]])
    assert f([2.0, 1.0]) == pytest.approx(4 - 1 + 3)


def test_weights_must_sum_to_one():
    comps = [mc.Component(mc.polynomial([0.0]), mc.Gaussian(1.0))] * 2
    with pytest.raises(ConfigError, match="sum"):
        mc.MixtureModel(comps, weights=[0.5, 0.4])


def test_weight_function_range_is_checked():
    m = presets.fe_sk1()
    with pytest.raises(ConfigError):
        m.weights_at(mc.as_point(3.0))


def test_permuted_model_has_same_observables():
    gm = presets.gm1()
    sw = gm.permuted([1, 0])
    for t in (-2.0, 1.5):
        assert mc.pop_cond_mgf(sw, t, 0.3) == pytest.approx(mc.pop_cond_mgf(gm, t, 0.3), rel=1e-14)
    assert mc.pop_cond_cdf(sw, 0.4, 0.3) == pytest.approx(mc.pop_cond_cdf(gm, 0.4, 0.3), abs=1e-15)
