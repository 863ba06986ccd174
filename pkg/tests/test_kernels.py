import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hermproj.decompositions import build_partition
from hermproj.hermite import hermite_1d, phi_alpha
from hermproj.kernels import (EigenspaceSpec, NearSingularError, QuadratureError, d2phi1_ds2,
                              dphi1_ds, discriminant, discriminant_polar, envelope, envelope_case,
                              envelope_check, fourier_integer, hessian_det_check, kernel_mehler,
                              kernel_mehler_rescaled, kernel_spectral, kernel_windowed_spectral,
                              level_weights, phase_geometry, phi1, phi_matrix, phi_matrix_direct,
                              stationary_times, sum_windows, trace_on_grid, windowed_weights)

P = build_partition()

coord = st.floats(-3, 3, allow_nan=False)
pt2 = st.tuples(coord, coord).map(np.array)


def test_spec_basics():
    s = EigenspaceSpec(3, 4)
    assert s.lam == 11 and s.dim == math.comb(6, 2) == len(s.indices())
    assert EigenspaceSpec.from_lambda(2, 10) == EigenspaceSpec(2, 4)
    with pytest.raises(ValueError):
        EigenspaceSpec.from_lambda(2, 9)


def test_kernel_spectral_origin():
    assert kernel_spectral(EigenspaceSpec(2, 0), [0.0, 0.0], [0.0, 0.0]) == pytest.approx(1 / math.pi, rel=1e-14)


@pytest.mark.parametrize("d,N", [(2, 5), (2, 12), (3, 4), (3, 7)])
def test_kernel_spectral_matches_basis_sum(d, N):
    rng = np.random.default_rng(N)
    spec = EigenspaceSpec(d, N)
    x = rng.normal(size=(6, d)) * 1.5
    y = rng.normal(size=(6, d)) * 1.5
    direct = sum(phi_alpha(a, x) * phi_alpha(a, y) for a in spec.indices())
    np.testing.assert_allclose(kernel_spectral(spec, x, y), direct, rtol=1e-11, atol=1e-14)


@given(x=pt2, y=pt2, N=st.integers(0, 30))
def test_kernel_symmetry_and_parity(x, y, N):
    spec = EigenspaceSpec(2, N)
    k = kernel_spectral(spec, x, y)
    assert kernel_spectral(spec, y, x) == pytest.approx(k, rel=1e-12, abs=1e-15)
    assert kernel_spectral(spec, -x, -y) == pytest.approx(k, rel=1e-12, abs=1e-15)


def test_phi_matrix_fast_equals_direct():
    spec = EigenspaceSpec(3, 5)
    pts = np.random.default_rng(1).normal(size=(10, 3))
    np.testing.assert_allclose(phi_matrix(spec, pts), phi_matrix_direct(spec, pts), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("d,N,want,tol", [(2, 3, 4, 1e-6), (2, 0, 1, 1e-6), (3, 2, 6, 1e-5)])
def test_trace_examples(d, N, want, tol):
    r = trace_on_grid(EigenspaceSpec(d, N))
    assert abs(r.value - want) <= tol * want and not r.under_resolved


def test_trace_flags_coarse_grid():
    from hermproj.opnorm import grid_global
    spec = EigenspaceSpec(2, 10)
    coarse = grid_global(2, spec.lam, 1.5, force=True)
    assert trace_on_grid(spec, coarse).under_resolved


def test_reproducing_identity_gauss_hermite():
    # int Pi(x0, y)^2 dy = Pi(x0, x0); integrand is a polynomial times exp(-|y|^2)
    spec = EigenspaceSpec(2, 9)
    g, w = np.polynomial.hermite.hermgauss(24)
    Y = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    W = np.outer(w, w).ravel() * np.exp(np.sum(Y * Y, 1))
    for x0 in ([0.3, -1.2], [2.5, 0.7]):
        k = kernel_spectral(spec, np.broadcast_to(x0, Y.shape), Y)
        assert np.sum(W * k * k) == pytest.approx(kernel_spectral(spec, x0, x0), rel=1e-10)


# --- windows and weights ---------------------------------------------------------

def test_fourier_integer_against_quadrature():
    eta = P.psi_j(1)
    fh = fourier_integer(eta, 5)
    t = np.linspace(*eta.support, 200001)
    for n in range(-5, 6):
        ref = np.trapezoid(eta(t) * np.exp(-1j * n * t), t)
        assert abs(fh[n + 5] - ref) < 1e-9


def test_weight_at_center_is_mean():
    for eta in (P.psi_j(0), P.psi_j(2), P.eta_circ_profile()):
        w = windowed_weights(eta, 11.0, [11.0])
        assert w[0] == pytest.approx(eta.integral() / (2 * math.pi), rel=1e-9)


def test_even_window_gives_real_weights():
    w = windowed_weights(P.eta_circ_profile(), 10.0, 10.0 + 2 * np.arange(-5, 40))
    assert np.max(np.abs(w.imag)) < 1e-14


def test_weight_decay_constant_uniform_in_j():
    # |w(lambda')| <= C 2^-j (1 + 2^-j |tau|)^-M, tau = (lambda' - lambda)/2, with C independent of j.
    # The erf transitions are narrow, so C is large for M = 5; it is the same for every j >= 1.
    for M, cap in ((2, 11.0), (5, 1.5e7)):
        Cs = []
        for j in range(1, 6):
            n = 4000 * 2 ** (j - 1)
            tau = np.arange(-n, n + 1)
            w = np.abs(fourier_integer(P.psi_j(j), n)) / (2 * math.pi)
            Cs.append(np.max(w / (2.0 ** -j * (1 + 2.0 ** -j * np.abs(tau)) ** -M)))
        assert max(Cs) <= cap
        assert max(Cs) / min(Cs) < 1.01


def test_full_families_reproduce_projection_weights():
    # sum_j (psi_j + psi_j^-) = eta_circ and the +-pi families sum to eta_circ(t - pi),
    # so the four families together carry the weights of eta_0 = 1 on a period: a delta at N
    spec = EigenspaceSpec(2, 7)
    base = P.eta_circ_profile()
    w0 = level_weights(base, spec)
    w1 = level_weights(base.reflect("+pi"), spec)
    n = max(w0.size, w1.size)
    tot = np.pad(w0, (0, n - w0.size)) + np.pad(w1, (0, n - w1.size))
    delta = np.zeros(n)
    delta[spec.N] = 1
    assert np.max(np.abs(tot - delta)) < 1e-6


def test_full_families_reproduce_kernel_pointwise():
    spec = EigenspaceSpec(2, 6)
    rng = np.random.default_rng(5)
    x, y = rng.normal(size=(8, 2)) * 2, rng.normal(size=(8, 2)) * 2
    base = P.eta_circ_profile()
    s = (kernel_windowed_spectral(spec, base, x, y)
         + kernel_windowed_spectral(spec, base.reflect("+pi"), x, y))
    np.testing.assert_allclose(s, kernel_spectral(spec, x, y), atol=1e-6)


def test_windowed_kernel_on_eigenfunction_d1():
    # Pi_lambda[eta] h_N = (int eta / 2 pi) h_N, checked in d = 1 by trapezoid quadrature
    spec = EigenspaceSpec(1, 6)
    eta = P.psi_j(1)
    w = level_weights(eta, spec)
    y = np.linspace(-70, 70, 14001)
    dy = y[1] - y[0]
    hN = hermite_1d(spec.N, y)
    for x0 in (0.0, 1.3, -2.2):
        K = kernel_windowed_spectral(spec, eta, np.full((y.size, 1), x0), y[:, None], weights=w)
        got = np.sum(K * hN) * dy
        want = eta.integral() / (2 * math.pi) * hermite_1d(spec.N, x0)
        assert abs(got - want) < 1e-8


# --- Mehler representation ----------------------------------------------------------

@pytest.mark.parametrize("d,N,j", [(2, 10, 1), (2, 20, 3), (3, 8, 2), (3, 12, 0)])
def test_mehler_matches_spectral(d, N, j):
    spec = EigenspaceSpec(d, N)
    eta = P.psi_j(j)
    rng = np.random.default_rng(d * 100 + N)
    s = math.sqrt(spec.lam)
    X, Y = rng.uniform(-s, s, (6, d)), rng.uniform(-s, s, (6, d))
    ks = kernel_windowed_spectral(spec, eta, X, Y)
    km = np.array([kernel_mehler(d, spec.lam, eta, x, y, atol=1e-12) for x, y in zip(X, Y)])
    assert np.max(np.abs(km - ks)) < 1e-9 * max(1.0, np.max(np.abs(ks)))


def test_mehler_rejects_singular_support():
    with pytest.raises(ValueError):
        kernel_mehler(2, 10.0, P.family_tail(0), [0.1, 0.2], [0.3, 0.1])


def test_mehler_real_on_diagonal_with_partner():
    eta, eta_m = P.psi_j(2), P.psi_j_kappa(2, "-")
    x = np.array([0.7, -0.4])
    lam = 14.0
    a = kernel_mehler(2, lam, eta, x, x)
    # the kappa = '-' partner is evaluated spectrally: its support contains negative times
    b = kernel_windowed_spectral(EigenspaceSpec(2, 6), eta_m, x, x)
    assert abs((a + b).imag) < 1e-10


def test_mehler_rescaling():
    lam = 22.0
    x, y = np.array([0.3, 0.5]), np.array([-0.2, 0.6])
    r = math.sqrt(lam)
    a = kernel_mehler_rescaled(2, lam, P.psi_j(1), x, y, atol=1e-12)
    b = kernel_mehler(2, lam, P.psi_j(1), r * x, r * y, atol=1e-12)
    assert abs(a - b) < 1e-10


def test_mehler_noninteger_lambda_is_smooth():
    a = kernel_mehler(2, 20.0, P.psi_j(1), [0.5, 0.5], [0.2, 0.1])
    b = kernel_mehler(2, 20.001, P.psi_j(1), [0.5, 0.5], [0.2, 0.1])
    assert abs(a - b) < 1e-2 * max(abs(a), 1e-6)


# --- symmetry reduction ---------------------------------------------------------------

@pytest.mark.parametrize("N", [6, 7])
def test_reflected_window_kernels(N):
    spec = EigenspaceSpec(2, N)
    rng = np.random.default_rng(N)
    x, y = rng.normal(size=(5, 2)) * 2, rng.normal(size=(5, 2)) * 2
    k0 = kernel_windowed_spectral(spec, P.psi_j(2), x, y)
    k0r = kernel_windowed_spectral(spec, P.psi_j(2), x, -y)
    km = kernel_windowed_spectral(spec, P.psi_j_kappa(2, "-"), x, y)
    kp = kernel_windowed_spectral(spec, P.psi_j_kappa(2, "+pi"), x, y)
    kmp = kernel_windowed_spectral(spec, P.psi_j_kappa(2, "-pi"), x, y)
    sgn = (-1) ** N
    np.testing.assert_allclose(km, np.conj(k0), atol=1e-8)
    np.testing.assert_allclose(kp, sgn * k0r, atol=1e-8)
    np.testing.assert_allclose(kmp, sgn * np.conj(k0r), atol=1e-8)


def test_reflect_only_base():
    w = P.psi_j_kappa(1, "-")
    with pytest.raises(ValueError):
        w.reflect("+pi")
    with pytest.raises(ValueError):
        P.psi_j(1).reflect("bogus")


def test_sum_windows_support():
    s = sum_windows([P.psi_j(0), P.psi_j(3)])
    assert s.support[0] == P.psi_j(3).support[0] and s.support[1] == P.psi_j(0).support[1]
    t = np.linspace(0.01, 1.5, 7)
    np.testing.assert_allclose(s(t), P.psi_j(0)(t) + P.psi_j(3)(t))


# --- phase geometry -------------------------------------------------------------------

@given(x=pt2, y=pt2)
def test_discriminant_two_forms(x, y):
    if np.linalg.norm(x) < 1e-3 or np.linalg.norm(y) < 1e-3:
        return
    scale = 1 + (x @ x) * (y @ y) + x @ x + y @ y
    assert abs(discriminant(x, y) - discriminant_polar(x, y)) < 1e-12 * scale


def test_Q_at_pm_one():
    x, y = np.array([0.4, 0.3]), np.array([-0.1, 0.8])
    g = phase_geometry(x, y)
    assert g.Q(1) == pytest.approx(np.sum((x - y) ** 2), rel=1e-13)
    assert g.Q(-1) == pytest.approx(np.sum((x + y) ** 2), rel=1e-13)


def test_diagonal_limits():
    x = np.array([0.3, 0.5])
    g = phase_geometry(x, x)
    assert g.degenerate
    assert g.tau_plus == g.tau_minus == 1 and g.S_c == 0
    assert g.D == pytest.approx((1 - x @ x) ** 2, rel=1e-14)


def test_orthogonal_unit_pair():
    x, y = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert discriminant(x, y) == -1
    assert discriminant_polar(x, y) == pytest.approx(-1, abs=1e-15)


def admissible():
    r = st.floats(0.3, 1.2)
    th = st.floats(0.05, 1.4)
    return st.tuples(r, r, th, st.floats(0, 2 * math.pi))


def _pair(r1, r2, th, rot):
    x = r1 * np.array([math.cos(rot), math.sin(rot)])
    y = r2 * np.array([math.cos(rot + th), math.sin(rot + th)])
    return x, y


@given(a=admissible())
def test_geometry_invariants(a):
    x, y = _pair(*a)
    g = phase_geometry(x, y)
    assert g.tau_plus > 1 > g.tau_minus
    assert math.cos(g.S_c) == pytest.approx(g.tau_minus, abs=1e-12)
    assert abs(g.v @ g.w) <= 1e-12 * max(1.0, np.linalg.norm(g.v) * np.linalg.norm(g.w))
    assert abs(g.R(math.cos(g.S_c))) < 1e-12
    assert 0 < g.detL <= 0.25 + 1e-15
    assert g.detH == pytest.approx((-1 / math.sin(g.S_c)) ** 2 * g.detL, rel=1e-12)
    assert np.linalg.det(g.L) == pytest.approx(g.detL, rel=1e-9, abs=1e-14)
    assert np.linalg.det(g.H) == pytest.approx(g.detH, rel=1e-8)


def test_equal_norms_give_quarter():
    x, y = _pair(0.8, 0.8, 0.7, 0.3)
    assert phase_geometry(x, y).detL == pytest.approx(0.25, abs=1e-14)


def test_Sc_gradients_against_finite_differences():
    x, y = np.array([0.7, 0.2, -0.1]), np.array([0.5, 0.5, 0.2])
    g = phase_geometry(x, y)
    eps = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = eps
        fx = (phase_geometry(x + e, y).S_c - phase_geometry(x - e, y).S_c) / (2 * eps)
        fy = (phase_geometry(x, y + e).S_c - phase_geometry(x, y - e).S_c) / (2 * eps)
        assert fx == pytest.approx(g.dSc_dx[i], rel=1e-6, abs=1e-9)
        assert fy == pytest.approx(g.dSc_dy[i], rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("x,y", [([0.6, 0.1], [0.4, 0.5]), ([0.9, 0.0, 0.1], [0.7, 0.3, 0.0]),
                                 ([1.1, 0.3], [0.95, 0.6])])
def test_hessian_det_check(x, y):
    r = hessian_det_check(x, y)
    assert r.rel_err_chain < 1e-4
    assert r.detH == pytest.approx((-1 / math.sin(phase_geometry(x, y).S_c)) ** len(x) * r.detL, rel=1e-12)


def test_hessian_rejects_degenerate():
    with pytest.raises(NearSingularError):
        hessian_det_check([0.5, 0.5], [0.5, 0.5])


def test_phase_derivative_identities():
    x, y = np.array([0.6, 0.3]), np.array([-0.2, 0.9])
    for s in (0.3, 1.0, 2.2):
        eps = 1e-5
        d1 = (phi1(x, y, s + eps) - phi1(x, y, s - eps)) / (2 * eps)
        d2 = (phi1(x, y, s + eps) - 2 * phi1(x, y, s) + phi1(x, y, s - eps)) / eps ** 2
        assert d1 == pytest.approx(dphi1_ds(x, y, s), rel=1e-6)
        assert d2 == pytest.approx(d2phi1_ds2(x, y, s), rel=1e-4)


def test_stationary_points():
    x, y = np.array([0.5, 0.1]), np.array([0.3, 0.4])
    D = float(discriminant(x, y))
    assert D > 0
    roots = sorted(math.cos(s) for s in stationary_times(x, y))
    want = sorted([x @ y - math.sqrt(D), x @ y + math.sqrt(D)])
    np.testing.assert_allclose(roots, want, atol=1e-10)


# --- envelopes --------------------------------------------------------------------------

def test_envelope_case_labels():
    mu = 1 / 8
    s = mu * mu / 16
    D = np.array([0.0, 0.4 * s, -3 * s, 3 * s, 1.5 * s, 0.0])
    ip = np.array([0.5, 0.5, 0.5, 0.5, 0.5, -0.995])
    assert list(envelope_case(D, ip, mu)) == ["b", "b", "a", "c", "skip", "anti"]
    with pytest.raises(ValueError):
        envelope("z", 1, 10.0, 0.1, 0.0, 2)


def _near_sphere_pairs(mu, n, seed, th_lo, th_hi):
    rng = np.random.default_rng(seed)
    r1 = 1 - rng.uniform(0.5, 2, n) * mu
    r2 = 1 - rng.uniform(0.5, 2, n) * mu
    th = rng.uniform(th_lo, th_hi, n)
    X = np.stack([r1, 0 * r1], 1)
    Y = np.stack([r2 * np.cos(th), r2 * np.sin(th)], 1)
    return X, Y


@pytest.mark.parametrize("j", [2, 3])
def test_envelope_fitted_B_stable(j):
    mu = 1 / 8
    pairs = _near_sphere_pairs(mu, 200, 1, 0.0, 0.8)
    B = [envelope_check(EigenspaceSpec(2, N), j, mu, pairs).fitted_B() for N in (64, 128, 256)]
    for case in ("a", "c"):
        vals = [b[case] for b in B]
        assert max(vals) / min(vals) <= 4, (case, vals)


def test_envelope_antidiagonal():
    mu = 1 / 128
    pairs = _near_sphere_pairs(mu, 60, 2, math.pi - 0.05, math.pi)
    for N in (64, 128):
        rep = envelope_check(EigenspaceSpec(2, N), 2, mu, pairs)
        assert set(rep.cases) <= {"anti", "skip", "a", "c", "b"}
        assert rep.fitted_B()["anti"] < 1


def test_separated_pairs_bound_stable():
    # |D| >= c0 inside the ball: |P[psi_j]| <= B 2^{(d-1)j/2} lam^{-1/2} with B stable in lam
    rng = np.random.default_rng(4)
    X = rng.uniform(-0.35, 0.35, (60, 2))
    Y = rng.uniform(-0.35, 0.35, (60, 2))
    assert np.min(np.abs(discriminant(X, Y))) > 0.5
    j = 2
    B = []
    for N in (32, 64, 128):
        spec = EigenspaceSpec(2, N)
        r = math.sqrt(spec.lam)
        v = np.abs(kernel_windowed_spectral(spec, P.psi_j(j), r * X, r * Y))
        B.append(np.max(v) / (2 ** (j / 2) / r))
    assert max(B) / min(B) <= 4
