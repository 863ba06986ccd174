import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from hermproj.hermite import (ScaledReal, amplitude_fit, eigenspace_dim, hermite_1d, hermite_1d_scaled,
                              hermite_deriv, hermite_sweep, hermite_zero_value, multi_indices,
                              phi_alpha, s_minus, s_plus, wkb_error_budget, wkb_hermite, wkb_regime)

PI14 = math.pi ** -0.25


def h_mp(k, t, dps=60):
    """High-precision oracle: H_k(t) exp(-t^2/2) / sqrt(2^k k! sqrt(pi))."""
    with mp.workdps(dps):
        t = mp.mpf(t)
        v = mp.hermite(k, t) * mp.e ** (-t * t / 2) / mp.sqrt(mp.mpf(2) ** k * mp.factorial(k) * mp.sqrt(mp.pi))
        return v


def test_examples_at_zero():
    assert hermite_1d(0, 0.0) == pytest.approx(PI14, rel=1e-15)
    assert hermite_1d(1, 0.0) == 0.0
    # closed form (-1)^5 pi^{-1/4} sqrt(9!!/10!!)
    assert hermite_1d(10, 0.0) == pytest.approx(-0.3726171364, abs=1e-10)
    assert hermite_1d(10, 0.0) == pytest.approx(hermite_zero_value(10), rel=1e-13)
    assert hermite_1d(10, 0.0) == pytest.approx(float(h_mp(10, 0)), rel=1e-13)


def test_negative_order_rejected():
    with pytest.raises(ValueError):
        hermite_1d(-1, 0.0)


def test_sweep_small_example():
    v = hermite_sweep(2, 0.0)
    np.testing.assert_allclose(v, [PI14, 0.0, -PI14 / math.sqrt(2)], rtol=1e-15, atol=1e-300)


@pytest.mark.parametrize("k,t", [(5, 1.3), (50, 3.0), (200, -7.5), (1000, 20.0), (1000, 44.0),
                                 (4000, 60.0), (10_000, 100.0), (10_000, 150.0), (10_000, 250.0)])
def test_against_high_precision(k, t):
    ref = h_mp(k, t, dps=80 + k // 20)
    got = hermite_1d_scaled(k, t)
    # compare in log2 to cover values below double range
    with mp.workdps(40):
        ref_log2 = float(mp.log(abs(ref), 2))
    assert abs(got.log2abs() - ref_log2) < 1e-10 / math.log(2) + 1e-12
    assert np.sign(got.mantissa) == np.sign(float(mp.sign(ref)))


def test_sweep_matches_pointwise():
    t = np.linspace(-12, 12, 41)
    S = hermite_sweep(60, t)
    for k in (0, 1, 7, 33, 60):
        np.testing.assert_allclose(S[k], hermite_1d(k, t), rtol=1e-12, atol=1e-300)
    partial = np.cumsum(S ** 2, axis=0)
    assert np.all(np.diff(partial, axis=0) >= 0)


def test_sweep_subset():
    t = np.array([0.3, 2.0])
    S = hermite_sweep(40, t, ks=[3, 40])
    np.testing.assert_allclose(S, hermite_sweep(40, t)[[3, 40]], rtol=1e-15)
    with pytest.raises(ValueError):
        hermite_sweep(4, t, ks=[5])


def test_derivative_examples():
    assert hermite_deriv(0, 0.0) == 0.0
    # h_1'(0) = -2 h_2(0) = sqrt(2) pi^{-1/4}
    assert hermite_deriv(1, 0.0) == pytest.approx(math.sqrt(2) * PI14, rel=1e-14)


def test_derivative_central_difference_order2():
    k, t = 50, 3.0
    errs = []
    for eps in (1e-2, 5e-3):
        fd = (hermite_1d(k, t + eps) - hermite_1d(k, t - eps)) / (2 * eps)
        errs.append(abs(hermite_deriv(k, t) - fd))
    assert errs[1] < errs[0] / 3.5   # O(eps^2)


@given(k=st.integers(0, 300), t=st.floats(-30, 30))
def test_parity(k, t):
    a, b = hermite_1d(k, t), hermite_1d(k, -t)
    assert abs(a - (-1) ** k * b) <= 1e-14 * max(abs(a), 1e-300)


def test_orthonormality_gauss_hermite():
    # Gauss-Hermite with weight exp(-t^2): integrand h_u h_v exp(t^2) is a polynomial of degree u + v
    x, w = np.polynomial.hermite.hermgauss(210)
    H = hermite_sweep(200, x) * np.exp(x * x / 2)
    G = (H * w) @ H.T
    assert np.max(np.abs(G - np.eye(201))) < 1e-8


def test_eigenrelation_finite_difference():
    rng = np.random.default_rng(3)
    eps = 1e-3
    for k in (0, 3, 40, 200):
        nu = math.sqrt(2 * k + 1)
        t = rng.uniform(-nu - 2, nu + 2, 50)
        h = hermite_1d(k, t)
        d2 = (hermite_1d(k, t + eps) - 2 * h + hermite_1d(k, t - eps)) / eps ** 2
        resid = -d2 + t * t * h - (2 * k + 1) * h
        # O(eps^2) truncation, scaled by the fourth derivative ~ nu^4 |h|
        assert np.max(np.abs(resid)) < eps ** 2 * nu ** 4 + 1e-8 * nu ** 2


@given(m=st.floats(1.0, 1.999999), e=st.integers(-10 ** 6, 10 ** 6))
def test_scaled_real_round_trip(m, e):
    s = ScaledReal.from_parts(m, e)
    assert s.mantissa == m and s.exponent == e
    if -1000 < e < 1000:
        assert ScaledReal.from_float(float(s)) == s


def test_scaled_real_rejects_bad_mantissa():
    with pytest.raises(ValueError):
        ScaledReal(3.0, 0)


def test_scaled_far_forbidden_region():
    # h_10000(400) is far below double range; log2 must still be finite
    v = hermite_1d_scaled(10_000, 400.0)
    assert v.exponent < -10_000 and math.isfinite(v.log2abs())
    assert hermite_1d(10_000, 400.0) == 0.0


def test_multi_indices_and_dim():
    for d, N in [(1, 5), (2, 0), (2, 7), (3, 4), (4, 3)]:
        idx = multi_indices(d, N)
        assert len(idx) == eigenspace_dim(d, N) == math.comb(N + d - 1, d - 1)
        assert len(set(idx)) == len(idx)
        assert all(sum(a) == N and len(a) == d for a in idx)


def test_phi_alpha():
    assert phi_alpha((0, 0), [0.0, 0.0]) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-15)
    x = np.array([0.4, -1.1, 2.0])
    for a in [(1, 2, 0), (3, 3, 1)]:
        assert phi_alpha(a, -x) == pytest.approx((-1) ** sum(a) * phi_alpha(a, x), rel=1e-14)
    with pytest.raises(ValueError):
        phi_alpha((1, 2), [0.0, 0.0, 0.0])


def test_phi_alpha_orthonormal_tensor_quadrature():
    x, w = np.polynomial.hermite.hermgauss(30)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    W = np.outer(w, w) * np.exp(X1 ** 2 + X2 ** 2)
    pts = np.stack([X1, X2], -1)
    idx = multi_indices(2, 6) + multi_indices(2, 7)
    vals = [phi_alpha(a, pts) for a in idx]
    G = np.array([[np.sum(W * u * v) for v in vals] for u in vals])
    assert np.max(np.abs(G - np.eye(len(idx)))) < 1e-8


# --- WKB -----------------------------------------------------------------------

def test_phase_integrals():
    for nu in (3.0, 11.0, 40.0):
        assert float(s_plus(nu, nu)) == 0.0
        assert float(s_minus(nu, nu)) == pytest.approx(math.pi * nu * nu / 4, rel=1e-14)
        # s_minus is the integral of sqrt(nu^2 - tau^2)
        t = 0.6 * nu
        q = mp.quad(lambda u: mp.sqrt(nu * nu - u * u), [0, t])
        assert float(s_minus(nu, t)) == pytest.approx(float(q), rel=1e-12)
        t = 1.4 * nu
        q = mp.quad(lambda u: mp.sqrt(u * u - nu * nu), [nu, t])
        assert float(s_plus(nu, t)) == pytest.approx(float(q), rel=1e-10)


def test_regime_boundaries():
    k = 400
    nu = math.sqrt(2 * k + 1)
    band = nu ** (-1 / 3)
    assert wkb_regime(k, nu - 1.01 * band) == "oscillatory"
    assert wkb_regime(k, nu) == "turning"
    assert wkb_regime(k, -nu - 1.01 * band) == "exponential"
    assert wkb_hermite(k, nu).value is None
    with pytest.raises(ValueError):
        wkb_hermite(0, 0.0)


def test_wkb_oscillatory_example():
    k = 500
    nu = math.sqrt(2 * k + 1)
    t = 0.5 * nu
    w = wkb_hermite(k, t)
    bound = 10 * abs(w.amplitude) * (nu * nu - t * t) ** -0.25 * wkb_error_budget(k, t)
    assert w.regime == "oscillatory"
    assert abs(w.value - hermite_1d(k, t)) <= bound


def test_wkb_exponential_branch():
    k = 400
    nu = math.sqrt(2 * k + 1)
    for t in (nu + 2.0, -(nu + 3.0)):
        w = wkb_hermite(k, t)
        h = hermite_1d(k, t)
        assert w.regime == "exponential"
        assert np.sign(w.value) == np.sign(h)
        assert abs(w.value / h - 1) < 0.05


def test_amplitude_fit_range_and_residuals():
    fit = amplitude_fit([100, 200, 400])
    assert 0.25 <= abs(fit.a_minus) <= 4 and 0.25 <= abs(fit.a_plus) <= 4
    res = [fit.per_k[k][2] for k in (100, 200, 400)]
    assert res[0] > res[1] > res[2]


def test_branch_parity_cos_sin():
    # even k: even function (cos), odd k: odd function (sin) in the oscillatory zone
    for k in (200, 201):
        nu = math.sqrt(2 * k + 1)
        t = 0.3 * nu
        a, b = wkb_hermite(k, t).value, wkb_hermite(k, -t).value
        assert a == pytest.approx((-1) ** k * b, rel=1e-12)
    assert wkb_hermite(201, 0.0).value == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("k", [100, 400, 1600])
def test_turning_envelope(k):
    nu = math.sqrt(2 * k + 1)
    band = nu ** (-1 / 3)
    t = np.linspace(nu - band, nu + band, 101)
    assert np.max(np.abs(hermite_1d(k, t))) <= 4 * nu ** (-1 / 6)
