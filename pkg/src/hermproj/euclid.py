"""The Euclidean frequency-annulus projector and its rescaled form.

wp_k has Fourier multiplier 1{k - 1 <= |xi|^2 <= k}; its kernel is radial.
The rescaled operator wp~_k has multiplier k 1{sqrt(1 - 1/k) <= |xi| < 1}, and
wp_k(x) = k^{d/2 - 1} wp~_k(sqrt(k) x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.special import j0, j1

from .fitting import SlopeFit, fit_loglog
from .opnorm import INF, NormEstimate, PolarOperator, bracket, polar_grid


def _check_d(d):
    if d not in (2, 3):
        raise ValueError("only d in {2, 3}")


def ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def shell_power_diff(k: float, d: int) -> float:
    """k^{d/2} - (k-1)^{d/2} without cancellation."""
    if d == 2:
        return 1.0
    a, b = k ** (d / 2), (k - 1) ** (d / 2)
    # a - b = (a^2 - b^2)/(a + b) and a^2 - b^2 = k^d - (k-1)^d
    diff = sum(math.comb(d, i) * k ** i * (-1) ** (d - i + 1) for i in range(d))
    return diff / (a + b)


def wp_at_zero(k: float, d: int) -> float:
    _check_d(d)
    return (2 * math.pi) ** -d * ball_volume(d) * shell_power_diff(k, d)


def _antider(rho, r, d):
    if d == 3:
        z = rho * r
        # sin z - z cos z = z^3 sum_n (-1)^n (2n + 2) z^{2n} / (2n + 3)!, used where it cancels
        ser = sum((-1) ** n * (2 * n + 2) / math.factorial(2 * n + 3) * z ** (2 * n) for n in range(8))
        num = np.where(z < 0.5, z ** 3 * ser, np.sin(z) - z * np.cos(z))
        return num / (2 * math.pi ** 2 * r ** 3)
    return rho * j1(rho * r) / (2 * math.pi * r)


def wp_kernel(k: float, d: int, r) -> np.ndarray | float:
    """Radial profile wp_k(r)."""
    _check_d(d)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be >= 0")
    lo, hi = math.sqrt(k - 1), math.sqrt(k)
    out = np.empty_like(r)
    small = r * hi < 1e-3
    rs = r[~small]
    out[~small] = _antider(hi, rs, d) - _antider(lo, rs, d)
    if np.any(small):
        # Taylor: (2pi)^{-d} int_shell (1 - (xi.x)^2/2) dxi
        z = r[small]
        m2 = ((2 * math.pi) ** -d * 2 * math.pi ** (d / 2) / math.gamma(d / 2)
              * (hi ** (d + 2) - lo ** (d + 2)) / (d + 2) / d)
        out[small] = wp_at_zero(k, d) - 0.5 * z * z * m2
    return float(out) if out.ndim == 0 else out


def wp_kernel_quadrature(k: float, d: int, r: float) -> float:
    """Independent radial quadrature (d = 2 through J0, d = 3 through sinc)."""
    lo, hi = math.sqrt(k - 1), math.sqrt(k)
    if d == 2:
        f = lambda rho: rho * j0(rho * r)
        c = 1 / (2 * math.pi)
    else:
        f = lambda rho: rho * rho * np.sinc(rho * r / math.pi)
        c = 4 * math.pi / (2 * math.pi) ** 3
    val, _ = integrate.quad(f, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=400)
    return c * val


def wp_tilde_kernel(k: float, d: int, r) -> np.ndarray | float:
    """wp~_k(r) = k^{1 - d/2} wp_k(r / sqrt(k))."""
    return k ** (1 - d / 2) * wp_kernel(k, d, np.asarray(r, float) / math.sqrt(k))


@dataclass
class RadialProfile:
    """Cubic interpolant of a radial kernel with an audited max error."""

    r_max: float
    spline: CubicSpline
    audit_error: float

    def __call__(self, r):
        return self.spline(np.asarray(r, float))


def tabulate(profile, r_max: float, n: int = 4096, tol: float = 1e-9) -> RadialProfile:
    while True:
        r = np.linspace(0.0, r_max, n)
        sp = CubicSpline(r, profile(r), bc_type=((1, 0.0), "not-a-knot"))
        mid = 0.5 * (r[:-1] + r[1:])
        err = float(np.max(np.abs(sp(mid) - profile(mid))))
        if err <= tol or n > 1 << 22:
            return RadialProfile(r_max, sp, err)
        n *= 2


# --- norms ---------------------------------------------------------------------

def wp_norm_exact(k: float, d: int, p: float, q: float) -> float | None:
    """Global norms with closed forms: (1, inf), (2, inf), (1, 2), (2, 2)."""
    z = wp_at_zero(k, d)
    if (p, q) == (1, INF):
        return z
    if (p, q) in ((2, INF), (1, 2)):
        return math.sqrt(z)  # ||wp_k||_{L^2} by Plancherel
    if (p, q) == (2, 2):
        return 1.0
    return None


def _rotation_grid(d, R, h):
    n_r = int(math.ceil(R / h)) + 1
    n_ang = int(math.ceil(2 * math.pi * R / h))
    n_ang += n_ang % 2
    return polar_grid(d, 0.0, R, n_r, n_ang, "trapezoid", "ball", {"lam": 1.0})


def wp_tilde_operator(k: float, d: int, R: float, h: float = 0.4) -> PolarOperator:
    """wp~_k truncated to the disk of radius R, on a polar grid of spacing h (d = 2)."""
    if d != 2:
        raise ValueError("grid operator for wp~_k implemented for d = 2")
    g = _rotation_grid(d, R, h)
    prof = tabulate(lambda r: wp_tilde_kernel(k, d, r), 2 * R)
    r = g.meta["radii"]
    th = 2 * math.pi * np.arange(g.meta["n_ang"]) / g.meta["n_ang"]
    # |r_i e1 - r_j e^{i th}|
    dist = np.sqrt(r[:, None, None] ** 2 + r[None, :, None] ** 2
                   - 2 * r[:, None, None] * r[None, :, None] * np.cos(th)[None, None, :])
    Kb = prof(np.maximum(dist, 0.0))
    op = PolarOperator(Kb, g)
    op.profile_error = prof.audit_error
    return op


class TruncationWarning(UserWarning):
    pass


def wp_tilde_norm(k: float, d: int, p: float, q: float, R: float = 20 * 2 * math.pi,
                  h: float = 0.4, check_truncation: bool = True, restarts: int = 4,
                  seed: int = 0) -> NormEstimate:
    """Discretized bracket of ||wp~_k||_{p->q} on a disk of radius R."""
    est = bracket(wp_tilde_operator(k, d, R, h), p, q, restarts=restarts, seed=seed)
    est.notes["R"] = R
    if check_truncation:
        est2 = bracket(wp_tilde_operator(k, d, 2 * R, h), p, q, restarts=restarts, seed=seed)
        change = abs(est2.lower - est.lower) / max(est.lower, 1e-300)
        est.notes["truncation_change"] = change
        est.notes["truncation_flag"] = change > 0.05
    return est


@dataclass
class WpSlopeReport:
    d: int
    p: float
    q: float
    ks: list
    lower: list
    upper: list
    fit_lower: SlopeFit
    fit_upper: SlopeFit
    beta: float
    inconclusive: bool
    notes: dict = field(default_factory=dict)


def wp_slope_report(d: int, p: float, q: float, k_list, R: float = 40.0, h: float = 0.4) -> WpSlopeReport:
    """Log-log k-slope of ||wp_k||_{p->q} against beta(p, q)."""
    from .exponents import PqPoint, beta, classify
    X = PqPoint.from_pq(p, q)
    if classify(X, d) in ("SegCD", "SegC'D'"):
        raise ValueError("(p, q) on an excluded segment")
    lo, up = [], []
    for k in k_list:
        ex = wp_norm_exact(k, d, p, q)
        if ex is not None:
            lo.append(ex)
            up.append(ex)
            continue
        est = wp_tilde_norm(k, d, p, q, R=R, h=h, check_truncation=False)
        scale = k ** (d / 2 * (1 / p - (0 if q == INF else 1 / q)) - 1)
        lo.append(est.lower * scale)
        up.append(est.upper * scale)
    f_lo = fit_loglog(k_list, lo)
    f_up = fit_loglog(k_list, up)
    ratio = max(u / l for l, u in zip(lo, up))
    return WpSlopeReport(d, p, q, list(k_list), lo, up, f_lo, f_up, float(beta(X, d)), ratio > 10)
