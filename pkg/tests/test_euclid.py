import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hermproj.euclid import (ball_volume, shell_power_diff, tabulate, wp_at_zero, wp_kernel,
                             wp_kernel_quadrature, wp_norm_exact, wp_slope_report, wp_tilde_kernel,
                             wp_tilde_norm)
from hermproj.opnorm import INF


def test_ball_volumes():
    assert ball_volume(2) == pytest.approx(math.pi)
    assert ball_volume(3) == pytest.approx(4 * math.pi / 3)


@pytest.mark.parametrize("k", [1.5, 10.0, 1e6, 1e12])
def test_shell_power_diff_no_cancellation(k):
    from mpmath import mp, mpf
    mp.dps = 50
    ref = float(mpf(k) ** 1.5 - (mpf(k) - 1) ** 1.5)
    assert shell_power_diff(k, 3) == pytest.approx(ref, rel=1e-13)
    assert shell_power_diff(k, 2) == 1.0


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("k", [2.0, 9.0, 50.0])
def test_kernel_against_radial_quadrature(d, k):
    for r in (0.05, 0.7, 3.0, 11.0):
        assert wp_kernel(k, d, r) == pytest.approx(wp_kernel_quadrature(k, d, r), rel=1e-9, abs=1e-13)


@pytest.mark.parametrize("d", [2, 3])
def test_kernel_continuous_at_origin(d):
    k = 30.0
    z = wp_at_zero(k, d)
    assert wp_kernel(k, d, 0.0) == pytest.approx(z, rel=1e-14)
    # the Taylor branch and the closed form meet at the switch radius
    rs = 1e-3 / math.sqrt(k)
    a, b = wp_kernel(k, d, rs * (1 - 1e-9)), wp_kernel(k, d, rs * (1 + 1e-9))
    assert a == pytest.approx(b, rel=1e-9)


def test_wp_zero_examples():
    # d = 2: area of the annulus pi / (2 pi)^2
    assert wp_at_zero(7.0, 2) == pytest.approx(1 / (4 * math.pi))
    assert wp_at_zero(4.0, 3) == pytest.approx((4 / 3) * math.pi * (8 - 3 ** 1.5) / (8 * math.pi ** 3))


@pytest.mark.parametrize("d", [2, 3])
def test_plancherel_l2_norm(d):
    # ||wp_k||_2^2 = wp_k(0); the radial tail decays like r^{-d-1}
    k = 6.0
    r = np.linspace(0, 400, 400_001)
    area = 2 * math.pi if d == 2 else 4 * math.pi
    f = wp_kernel(k, d, r) ** 2 * area * r ** (d - 1)
    val = float(np.sum((f[1:] + f[:-1]) / 2) * (r[1] - r[0]))
    assert val == pytest.approx(wp_at_zero(k, d), rel=0.01)


@settings(max_examples=30)
@given(k=st.floats(1.5, 200), r=st.floats(0, 30), d=st.sampled_from([2, 3]))
def test_rescaling_identity(k, r, d):
    lhs = wp_kernel(k, d, r)
    rhs = k ** (d / 2 - 1) * wp_tilde_kernel(k, d, math.sqrt(k) * r)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-15)


def test_negative_radius_rejected():
    with pytest.raises(ValueError):
        wp_kernel(4.0, 2, -1.0)
    with pytest.raises(ValueError):
        wp_at_zero(4.0, 4)


def test_tabulate_audit():
    prof = tabulate(lambda r: wp_tilde_kernel(8.0, 2, r), 20.0, n=512, tol=1e-9)
    assert prof.audit_error <= 1e-9
    r = np.random.default_rng(0).uniform(0, 20, 200)
    np.testing.assert_allclose(prof(r), wp_tilde_kernel(8.0, 2, r), atol=3e-9)


def test_exact_norm_relations():
    k, d = 25.0, 3
    z = wp_at_zero(k, d)
    assert wp_norm_exact(k, d, 1, INF) == z
    assert wp_norm_exact(k, d, 2, INF) == pytest.approx(math.sqrt(z))
    assert wp_norm_exact(k, d, 1, 2) == wp_norm_exact(k, d, 2, INF)
    assert wp_norm_exact(k, d, 2, 2) == 1.0
    assert wp_norm_exact(k, d, 1.5, 3) is None


def test_truncated_rescaled_norm_22():
    # multiplier k 1{shell}: truncation to a disk can only lose norm, less so for larger R
    k = 4.0
    a = wp_tilde_norm(k, 2, 2, 2, R=6, check_truncation=False).lower
    b = wp_tilde_norm(k, 2, 2, 2, R=12, check_truncation=False).lower
    assert a < b <= k


def test_truncated_bracket_and_flag():
    est = wp_tilde_norm(4.0, 2, 1.5, 3, R=4)
    assert 0 < est.lower <= est.upper
    assert "truncation_change" in est.notes and isinstance(est.notes["truncation_flag"], bool)


@pytest.mark.parametrize("d,p,q,beta", [(2, 1, INF, 0.0), (2, 2, INF, 0.0), (3, 1, INF, 0.5), (3, 2, INF, 0.25)])
def test_exact_slopes_match_beta(d, p, q, beta):
    rep = wp_slope_report(d, p, q, [1e6, 1e7, 1e8, 1e9, 1e10])
    assert rep.beta == pytest.approx(beta)
    assert rep.fit_lower.slope == pytest.approx(beta, abs=1e-6)
    assert not rep.inconclusive


def test_excluded_segment_rejected():
    from hermproj.exponents import named_point
    C, D = named_point("C", 2), named_point("D", 2)
    a, b = float(C.a + D.a) / 2, float(C.b + D.b) / 2
    with pytest.raises(ValueError):
        wp_slope_report(2, 1 / a, 1 / b if b > 0 else INF, [4, 8])
