import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from finmix import dgp, presets
from finmix import model_core as mc
from finmix.errors import ConfigError, EmptyWindow
from finmix.smoothing import KernelSpec, LocalWindow, nw_cond_cdf, nw_cond_cf, nw_cond_mean, nw_cond_mgf

TWO_POINT = dgp.Dataset(np.array([0.0, 0.5]), np.array([0.0, 1.0]))
G01 = KernelSpec("gaussian", 0.1)


def test_two_point_hand_weights():
    # the far point carries relative weight e^{-12.5}
    w = math.exp(-12.5)
    mgf = nw_cond_mgf(TWO_POINT, 0.5, 2.0, G01).value
    assert mgf == pytest.approx(math.log((math.exp(2.0) + w) / (1 + w)), abs=1e-15)
    assert abs(mgf - 2.0) < 1e-5
    assert abs(nw_cond_mean(TWO_POINT, 0.0, G01).value) < 1e-5
    q = KernelSpec("quartic_compact", 0.4)
    assert nw_cond_cdf(TWO_POINT, 0.0, 0.5, q).value == 1.0


def test_single_point_cf():
    d = dgp.Dataset(np.array([0.3]), np.array([1.7]))
    for s in (0.5, 3.0):
        assert nw_cond_cf(d, 0.3, s, G01).value == pytest.approx(np.exp(1j * s * 1.7), abs=1e-15)


def test_constant_response_moments_are_exact():
    d = dgp.Dataset(np.linspace(0, 1, 30), np.full(30, 0.3))
    w = LocalWindow(d.x, d.z, 0.5, KernelSpec("gaussian", 0.2))
    assert w.mean() == 0.3
    assert w.m2() == 0.3 * 0.3


def test_weights_match_direct_kernel_formula():
    rng = np.random.default_rng(1)
    x, z = rng.uniform(-1, 1, 40), rng.standard_normal(40)
    h = 0.3
    k = np.exp(-0.5 * ((x - 0.1) / h) ** 2)
    w = LocalWindow(x, z, 0.1, KernelSpec("gaussian", h))
    assert w.mean() == pytest.approx(np.sum(k * z) / np.sum(k), rel=1e-13)
    assert w.log_mgf(0.7) == pytest.approx(math.log(np.sum(k * np.exp(0.7 * z)) / np.sum(k)), rel=1e-13)


def test_quartic_window_and_cdf_edges():
    x, z = np.array([0.0, 0.1, 2.0]), np.array([1.0, 2.0, 3.0])
    w = LocalWindow(x, z, 0.0, KernelSpec("quartic_compact", 0.5))
    assert w.cdf(0.5) == 0.0 and w.cdf(2.0) == 1.0
    assert w.weights[2] == 0.0


def test_empty_window_raises():
    with pytest.raises(EmptyWindow):
        LocalWindow(np.array([0.0]), np.array([1.0]), 5.0, KernelSpec("quartic_compact", 0.1))


def test_kernel_validation():
    with pytest.raises(ConfigError):
        KernelSpec("epanechnikov", 1.0)
    with pytest.raises(ConfigError):
        KernelSpec("gaussian", -1.0)


def test_sample_transforms_track_population():
    gm = presets.gm1()
    d = dgp.simulate(gm, dgp.SimulationDesign(20_000, dgp.uniform(-3.0, 3.5), seed=12))
    g = KernelSpec("gaussian", 0.15)
    w = LocalWindow(d.x, d.z, 0.0, g)
    n_eff = w.effective_count
    # standard errors from the population variance of the transformed response
    assert abs(math.exp(w.log_mgf(1.0)) - 5.191) < 6 * math.sqrt(math.exp(mc.pop_cond_mgf(gm, 2.0, 0.0)) / n_eff) + 0.3
    assert abs(w.cf(1.0) - mc.pop_cond_cf(gm, 1.0, 0.0)) < 6 / math.sqrt(n_eff) + 0.02
    assert abs(w.mean() - 0.2) < 6 * math.sqrt(2.45 / n_eff) + 0.05
    assert abs(w.m2() - 2.45) < 0.3
    q = LocalWindow(d.x, d.z, 0.0, KernelSpec("quartic_compact", 0.5))
    assert abs(q.cdf(1.0) - 0.69999) < 6 * math.sqrt(0.21 / q.effective_count) + 0.02


@settings(max_examples=200, deadline=None)
@given(
    n=st.integers(1, 40),
    seed=st.integers(0, 2**32 - 1),
    h=st.floats(0.05, 2.0),
    t=st.lists(st.floats(-5.0, 5.0), min_size=1, max_size=4),
)
def test_vector_and_scalar_transforms_agree(n, seed, h, t):
    rng = np.random.default_rng(seed)
    x, z = rng.uniform(-1, 1, n), rng.standard_normal(n)
    w = LocalWindow(x, z, float(x[0]), KernelSpec("gaussian", h))
    tv = np.array(t)
    assert np.allclose(w.log_mgf(tv), [w.log_mgf(v) for v in t], rtol=1e-13, atol=1e-13)
    assert np.allclose(w.cf(tv), [w.cf(v) for v in t], rtol=1e-13, atol=1e-13)
    assert np.all(w.log_mgf(np.zeros(3)) == 0.0)
