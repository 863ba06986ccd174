"""Projection kernels Pi_lambda(x, y), windowed kernels and phase geometry.

Windowed operators are evaluated two ways:

* spectrally, Pi_lambda[eta] = sum_{lambda'} w(lambda') Pi_{lambda'} with
  w(lambda') = eta_hat((lambda' - lambda)/2) / (2 pi),
  eta_hat(tau) = int eta(t) exp(-i tau t) dt;
* through the Mehler kernel of exp(-i t H / 2) as an oscillatory t-integral.

The two are independent oracles for one another.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .hermite import eigenspace_dim, hermite_sweep, multi_indices, phi_alpha


@dataclass(frozen=True)
class EigenspaceSpec:
    d: int
    N: int

    def __post_init__(self):
        if self.d < 1 or self.N < 0:
            raise ValueError("need d >= 1 and N >= 0")

    @property
    def lam(self) -> int:
        return 2 * self.N + self.d

    @property
    def dim(self) -> int:
        return eigenspace_dim(self.d, self.N)

    def indices(self) -> list[tuple[int, ...]]:
        return multi_indices(self.d, self.N)

    @classmethod
    def from_lambda(cls, d: int, lam: int) -> "EigenspaceSpec":
        if (lam - d) % 2 or lam < d:
            raise ValueError(f"{lam} is not an eigenvalue for d={d}")
        return cls(d, (lam - d) // 2)


# --- window profiles ---------------------------------------------------------

@dataclass(frozen=True)
class WindowProfile:
    """A real time window eta(t) with compact support.

    ``transitions`` lists (lo, hi, scale) intervals where eta varies on the
    length ``scale``; quadrature panels are refined there.  ``kappa`` records
    the reflection/shift applied to a base window.
    """

    func: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float]
    j: int = 0
    kappa: str = "none"
    transitions: tuple = ()
    label: str = ""

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self.func(t)
        return float(out) if out.ndim == 0 else out

    def reflect(self, kappa: str) -> "WindowProfile":
        """kappa='-' : eta(-t);  '+pi' : eta(t - pi);  '-pi' : eta(pi - t)."""
        if self.kappa != "none":
            raise ValueError("reflect only applies to a base window")
        f = self.func
        lo, hi = self.support
        tr = self.transitions
        if kappa == "-":
            g = lambda t: f(-t)
            sup = (-hi, -lo)
            tr2 = tuple((-b, -a, s) for a, b, s in tr)
        elif kappa == "+pi":
            g = lambda t: f(t - math.pi)
            sup = (lo + math.pi, hi + math.pi)
            tr2 = tuple((a + math.pi, b + math.pi, s) for a, b, s in tr)
        elif kappa == "-pi":
            g = lambda t: f(math.pi - t)
            sup = (math.pi - hi, math.pi - lo)
            tr2 = tuple((math.pi - b, math.pi - a, s) for a, b, s in tr)
        else:
            raise ValueError(f"unknown kappa {kappa!r}")
        return replace(self, func=g, support=sup, kappa=kappa, transitions=tr2,
                       label=f"{self.label}^{kappa}")

    def l1(self, n: int = 1 << 16) -> float:
        lo, hi = self.support
        t = np.linspace(lo, hi, n + 1)
        return float(np.trapezoid(np.abs(self(t)), t))

    def integral(self, n: int = 1 << 16) -> float:
        lo, hi = self.support
        t = np.linspace(lo, hi, n + 1)
        return float(np.trapezoid(self(t), t))


def sum_windows(windows: Sequence[WindowProfile], label: str = "sum") -> WindowProfile:
    ws = list(windows)
    lo = min(w.support[0] for w in ws)
    hi = max(w.support[1] for w in ws)
    tr = tuple(x for w in ws for x in w.transitions)

    def f(t):
        return sum(w.func(t) for w in ws)
    kap = {w.kappa for w in ws}
    return WindowProfile(f, (lo, hi), j=min(w.j for w in ws),
                         kappa=kap.pop() if len(kap) == 1 else "mixed",
                         transitions=tr, label=label)


def fourier_integer(eta: WindowProfile, n_max: int, tail_tol: float = 1e-15) -> np.ndarray:
    """eta_hat(n) for integers n in [-n_max, n_max] (index n + n_max).

    eta is supported in an interval of length < 2 pi, so eta_hat at integers
    is a scaled Fourier coefficient of its 2 pi-periodization; the periodic
    trapezoid rule (one FFT) is spectrally accurate.
    """
    lo, hi = eta.support
    if hi - lo >= 2 * math.pi:
        raise ValueError("window support must be shorter than 2 pi")
    c = 0.5 * (lo + hi)
    M = 1 << 17
    while M < 8 * n_max:
        M <<= 1
    while True:
        t = c - math.pi + 2 * math.pi * np.arange(M) / M
        vals = eta(t)
        coef = np.fft.fft(vals) * (2 * math.pi / M)
        # coef[k] = sum eta(t_m) exp(-2 pi i k m / M) dt ; t_m = c - pi + m dt
        tail = np.abs(coef[M // 2 - M // 16: M // 2 + M // 16]).max()
        if tail < tail_tol or M >= 1 << 23:
            break
        M <<= 1
    n = np.arange(-n_max, n_max + 1)
    out = coef[n % M] * np.exp(-1j * n * (c - math.pi))
    return out


def windowed_weights(eta: WindowProfile, lam: float, lam_primes, n_cap: int = 10_000) -> np.ndarray:
    """Weights eta_hat((lambda' - lambda)/2) / (2 pi) for eigenvalues lambda'."""
    lp = np.asarray(lam_primes, dtype=float)
    tau = 0.5 * (lp - lam)
    taui = np.rint(tau).astype(int)
    if np.any(np.abs(tau - taui) > 1e-12):
        raise ValueError("lambda and lambda' must differ by an even integer")
    n_max = int(max(np.abs(taui).max(), 1))
    if n_max > n_cap:
        raise ValueError("requested weight index beyond cap")
    fh = fourier_integer(eta, n_max)
    return fh[taui + n_max] / (2 * math.pi)


class TruncationError(RuntimeError):
    pass


def level_weights(eta: WindowProfile, spec: EigenspaceSpec, tol: float = 1e-12,
                  n_cap: int = 10_000) -> np.ndarray:
    """Weights for levels n = 0..n_stop (lambda' = 2n + d), tail below ``tol``."""
    N = spec.N
    span = n_cap
    fh = fourier_integer(eta, span)
    taus = np.arange(-N, span + 1)
    w = fh[taus + span] / (2 * math.pi)
    big = np.nonzero(np.abs(w) >= tol)[0]
    if big.size == 0:
        return np.zeros(1, dtype=complex)
    n_stop = int(big.max()) + 1
    if n_stop >= w.size - 1:
        raise TruncationError(f"weights above {tol} at the cap n={N + span}")
    return w[: n_stop + 1]


# --- spectral evaluation -----------------------------------------------------

def _as_points(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != d:
        raise ValueError(f"points must have last dimension {d}, got {x.shape}")
    return x


def level_products(d: int, n_max: int, x: np.ndarray, y: np.ndarray) -> list[np.ndarray]:
    """P_i[a, p] = h_a(x_{p,i}) h_a(y_{p,i}) for each coordinate i; x, y of shape (P, d)."""
    P = x.shape[0]
    pts = np.concatenate([x.T.ravel(), y.T.ravel()])
    H = hermite_sweep(n_max, pts)          # (n_max+1, 2 d P)
    Hx = H[:, : d * P].reshape(n_max + 1, d, P)
    Hy = H[:, d * P:].reshape(n_max + 1, d, P)
    return [Hx[:, i, :] * Hy[:, i, :] for i in range(d)]


def kernel_levels(d: int, n_max: int, x, y, chunk: int = 512) -> np.ndarray:
    """Pi_{2n+d}(x_p, y_p) for n = 0..n_max, shape (n_max+1, P)."""
    x = _as_points(x, d).reshape(-1, d)
    y = _as_points(y, d).reshape(-1, d)
    P = x.shape[0]
    out = np.empty((n_max + 1, P))
    for s in range(0, P, chunk):
        sl = slice(s, s + chunk)
        prods = level_products(d, n_max, x[sl], y[sl])
        acc = prods[0]
        for Pi in prods[1:]:
            acc = fftconvolve(acc, Pi, axes=0)[: n_max + 1]
        out[:, sl] = acc
    return out


def kernel_spectral(spec: EigenspaceSpec, x, y) -> np.ndarray | float:
    """Pi_lambda(x, y) = sum_{|alpha|=N} Phi_alpha(x) Phi_alpha(y) by the separable sum."""
    d, N = spec.d, spec.N
    x = _as_points(x, d)
    y = _as_points(y, d)
    x, y = np.broadcast_arrays(x, y)
    shape = x.shape[:-1]
    xf, yf = x.reshape(-1, d), y.reshape(-1, d)
    prods = level_products(d, N, xf, yf)
    if d == 1:
        val = prods[0][N]
    else:
        # exact direct convolution of the last level only
        acc = prods[0]
        for i, Pi in enumerate(prods[1:], start=2):
            if i < d:
                nxt = np.zeros_like(acc)
                for a in range(N + 1):
                    nxt[a:] += acc[a][None, :] * Pi[: N + 1 - a]
                acc = nxt
            else:
                val = np.einsum("ap,ap->p", acc, Pi[::-1])
    val = np.asarray(val).reshape(shape)
    return float(val) if val.ndim == 0 else val


def kernel_windowed_spectral(spec: EigenspaceSpec, eta: WindowProfile, x, y,
                             tol: float = 1e-12, n_cap: int = 10_000,
                             weights: np.ndarray | None = None) -> np.ndarray | complex:
    """sum_n w_n Pi_{2n+d}(x, y), truncated where |w_n| < tol."""
    d = spec.d
    w = level_weights(eta, spec, tol, n_cap) if weights is None else np.asarray(weights)
    x = _as_points(x, d)
    y = _as_points(y, d)
    x, y = np.broadcast_arrays(x, y)
    shape = x.shape[:-1]
    K = kernel_levels(d, w.size - 1, x.reshape(-1, d), y.reshape(-1, d))
    val = (w[:, None] * K).sum(axis=0).reshape(shape)
    return complex(val) if val.ndim == 0 else val


# --- Mehler representation ---------------------------------------------------

def mehler_amplitude(d: int, t):
    """Principal branch of (2 pi i sin t)^{-d/2}, continued across multiples of pi."""
    t = np.asarray(t, dtype=float)
    k = np.floor(t / math.pi)
    return (2 * math.pi * np.abs(np.sin(t))) ** (-d / 2) * np.exp(
        -1j * math.pi * d / 4 - 1j * math.pi * d * k / 2)


def mehler_phase(lam: float, x, y, t):
    """phi_lambda(x, y, t) = lam t / 2 + (|x|^2 + |y|^2) cot t / 2 - <x, y> csc t."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    s2 = float(x @ x + y @ y)
    xy = float(x @ y)
    return lam * t / 2 + s2 / (2 * np.tan(t)) - xy / np.sin(t)


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _panels(lam, x, y, eta: WindowProfile) -> np.ndarray:
    """Breakpoints with per-panel phase change at most pi."""
    lo, hi = eta.support
    a = float(np.linalg.norm(x) + np.linalg.norm(y))
    pts = [lo]
    t = lo
    while t < hi:
        s = min(abs(math.sin(t)), abs(math.sin(min(hi, t + 0.05))))
        bound = abs(lam) / 2 + a * a / (2 * s * s)
        t = min(hi, t + math.pi / bound)
        pts.append(t)
    bps = np.array(pts)
    for (tlo, thi, scale) in eta.transitions:
        tlo, thi = max(tlo, lo), min(thi, hi)
        if thi <= tlo:
            continue
        m = int(math.ceil((thi - tlo) / scale))
        bps = np.concatenate([bps, np.linspace(tlo, thi, m + 1)])
    return np.unique(bps)


def _panel_quad(f, bps: np.ndarray, order: int) -> complex:
    xg, wg = _gl(order)
    a, b = bps[:-1], bps[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    t = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    w = (half[:, None] * wg[None, :]).ravel()
    return complex(np.sum(w * f(t)))


class QuadratureError(RuntimeError):
    pass


def kernel_mehler(d: int, lam: float, eta: WindowProfile, x, y,
                  atol: float = 1e-10, order: int = 16, max_doublings: int = 6) -> complex:
    """(1/2pi) int eta(t) a(t) exp(i phi_lambda(x, y, t)) dt by composite Gauss-Legendre.

    The support of eta must avoid {0, pi}.
    """
    lo, hi = eta.support
    for sing in (0.0, math.pi):
        if lo <= sing <= hi:
            raise ValueError("window support touches a singularity of the Mehler kernel")
    x = np.asarray(x, float).reshape(d)
    y = np.asarray(y, float).reshape(d)

    def f(t):
        return eta(t) * mehler_amplitude(d, t) * np.exp(1j * mehler_phase(lam, x, y, t))

    bps = _panels(lam, x, y, eta)
    prev = _panel_quad(f, bps, order)
    for _ in range(max_doublings):
        mids = 0.5 * (bps[:-1] + bps[1:])
        bps = np.sort(np.concatenate([bps, mids]))
        cur = _panel_quad(f, bps, order)
        if abs(cur - prev) < atol:
            return cur / (2 * math.pi)
        prev = cur
    raise QuadratureError("Mehler quadrature did not converge")


def kernel_mehler_rescaled(d: int, lam: float, eta: WindowProfile, x, y, **kw) -> complex:
    """P_lambda[eta](x, y) = Pi_lambda[eta](sqrt(lam) x, sqrt(lam) y)."""
    r = math.sqrt(lam)
    return kernel_mehler(d, lam, eta, r * np.asarray(x, float), r * np.asarray(y, float), **kw)


# --- phase geometry ----------------------------------------------------------

def discriminant(x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    xy = np.sum(x * y, axis=-1)
    return 1 + xy ** 2 - np.sum(x * x, axis=-1) - np.sum(y * y, axis=-1)


def discriminant_polar(x, y):
    """-|x|^2|y|^2 sin^2 theta + (1 - |x|^2)(1 - |y|^2)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    nx2, ny2 = np.sum(x * x, -1), np.sum(y * y, -1)
    c = np.sum(x * y, -1)
    sin2 = 1 - c * c / (nx2 * ny2)
    return -nx2 * ny2 * sin2 + (1 - nx2) * (1 - ny2)


def phi1(x, y, s):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    return s / 2 + (x @ x + y @ y) / (2 * np.tan(s)) - (x @ y) / np.sin(s)


@dataclass
class PhaseGeometry:
    D: float
    xy: float
    nx2: float
    ny2: float
    tau_plus: float
    tau_minus: float
    S_c: float
    s_star: float | None
    v: np.ndarray
    w: np.ndarray
    dSc_dx: np.ndarray
    dSc_dy: np.ndarray
    H: np.ndarray
    detH: float
    L: np.ndarray
    detL: float
    degenerate: bool = False
    notes: list = field(default_factory=list)

    def Q(self, tau):
        return (tau - self.xy) ** 2 - self.D

    def R(self, tau):
        return self.xy * tau ** 2 - (self.nx2 + self.ny2) * tau + self.xy


def phase_geometry(x, y) -> PhaseGeometry:
    """Scalar, vector and matrix quantities of the phase at the pair (x, y)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    d = x.size
    nx2, ny2, xy = float(x @ x), float(y @ y), float(x @ y)
    D = 1 + xy * xy - nx2 - ny2
    nd, ns = float(np.linalg.norm(x - y)), float(np.linalg.norm(x + y))
    s_star = math.acos(xy) if abs(xy) <= 1 else None
    nan = float("nan")
    if nd == 0 or ns == 0 or xy == 0:
        zero = np.zeros(d)
        deg = PhaseGeometry(D, xy, nx2, ny2, 1.0 if nd == 0 else nan, 1.0 if nd == 0 else nan,
                            0.0 if nd == 0 else nan, s_star, zero, zero, zero, zero,
                            np.full((d, d), nan), nan, np.full((d, d), nan), nan,
                            degenerate=True, notes=["x = +-y or <x,y> = 0"])
        return deg
    tp = (nx2 + ny2 + ns * nd) / (2 * xy)
    tm = (nx2 + ny2 - ns * nd) / (2 * xy)
    one_minus = 2 * nd / (ns + nd)
    S_c = 2 * math.asin(math.sqrt(one_minus / 2))
    c, s = 1 - one_minus, math.sin(S_c)
    v = y * c - x
    w = x * c - y
    den = float(x @ v + y @ w)
    dSx = -(w - c * v) / (s * den)
    dSy = -(v - c * w) / (s * den)
    nv2, nw2 = float(v @ v), float(w @ w)
    M = np.outer(v, v) + np.outer(w, w) - 2 * c * np.outer(v, w)
    L = np.eye(d) - M / (nv2 + nw2)
    H = -(s * s * den * np.eye(d) + M) / (s ** 3 * den)
    detL = nv2 * nw2 / (nv2 + nw2) ** 2
    detH = (-1 / s) ** d * detL
    return PhaseGeometry(D, xy, nx2, ny2, tp, tm, S_c, s_star, v, w, dSx, dSy,
                         H, float(detH), L, float(detL))


def dphi1_ds(x, y, s):
    """-Q(x, y, cos s) / (2 sin^2 s)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    xy = float(x @ y)
    D = 1 + xy * xy - x @ x - y @ y
    return -((np.cos(s) - xy) ** 2 - D) / (2 * np.sin(s) ** 2)


def d2phi1_ds2(x, y, s):
    """-R(x, y, cos s) / sin^3 s."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    xy = float(x @ y)
    c = np.cos(s)
    return -(xy * c * c - (x @ x + y @ y) * c + xy) / np.sin(s) ** 3


def stationary_times(x, y, n: int = 4000) -> list[float]:
    """Zeros of d phi_1 / ds on (0, pi), located by sign change and bisection."""
    s = np.linspace(1e-6, math.pi - 1e-6, n)
    g = dphi1_ds(x, y, s)
    out = []
    for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]:
        a, b = s[i], s[i + 1]
        ga = g[i]
        for _ in range(80):
            m = 0.5 * (a + b)
            gm = dphi1_ds(x, y, m)
            if np.sign(gm) == np.sign(ga):
                a, ga = m, gm
            else:
                b = m
        out.append(0.5 * (a + b))
    return out


class NearSingularError(ValueError):
    pass


@dataclass
class HessianReport:
    detH: float
    detL: float
    det_fd_chain: float
    det_fd_full: float
    rel_err_chain: float


def _fd_grad(f, z, eps):
    g = np.zeros_like(z)
    for i in range(z.size):
        e = np.zeros_like(z)
        e[i] = eps
        g[i] = (f(z + e) - f(z - e)) / (2 * eps)
    return g


def hessian_det_check(x, y, eps: float = 1e-5) -> HessianReport:
    """det H from the closed forms, against finite-difference reconstructions.

    ``det_fd_chain`` assembles -I/sin S_c + dS_c (d_y d_s phi_1)^T + (d_x d_s phi_1) dS_c^T
    with every derivative taken numerically; ``det_fd_full`` differentiates
    phi_1(x, y, S_c(x, y)) twice, which also carries the d_s phi_1 d_x d_y S_c term.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    d = x.size
    g = phase_geometry(x, y)
    if g.degenerate or math.sin(g.S_c) < 1e-8:
        raise NearSingularError("sin S_c below 1e-8")

    def Sc(xx, yy):
        return phase_geometry(xx, yy).S_c

    S = g.S_c
    dSx = _fd_grad(lambda z: Sc(z, y), x, eps)
    dSy = _fd_grad(lambda z: Sc(x, z), y, eps)
    dxs = _fd_grad(lambda z: dphi1_ds(z, y, S), x, eps)
    dys = _fd_grad(lambda z: dphi1_ds(x, z, S), y, eps)
    mixed = np.zeros((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = eps
        mixed[:, j] = (_fd_grad(lambda z: phi1(z, y + e, S), x, eps)
                       - _fd_grad(lambda z: phi1(z, y - e, S), x, eps)) / (2 * eps)
    Hc = mixed + np.outer(dSx, dys) + np.outer(dxs, dSy)
    full = np.zeros((d, d))
    psi = lambda xx, yy: phi1(xx, yy, Sc(xx, yy))
    for j in range(d):
        e = np.zeros(d)
        e[j] = eps
        full[:, j] = (_fd_grad(lambda z: psi(z, y + e), x, eps)
                      - _fd_grad(lambda z: psi(z, y - e), x, eps)) / (2 * eps)
    dc = float(np.linalg.det(Hc))
    return HessianReport(g.detH, g.detL, dc, float(np.linalg.det(full)),
                         abs(dc - g.detH) / abs(g.detH))


# --- grids and traces ----------------------------------------------------------

def trace_radial(spec: EigenspaceSpec, R: float | None = None, n: int = 400) -> float:
    """int Pi(x, x) dx using radial symmetry and Gauss-Legendre in r."""
    d = spec.d
    if R is None:
        R = math.sqrt(spec.lam) + 12.0
    xg, wg = _gl(n)
    r = 0.5 * R * (xg + 1)
    wr = 0.5 * R * wg
    x = np.zeros((n, d))
    x[:, 0] = r
    diag = kernel_spectral(spec, x, x)
    area = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    return float(area * np.sum(wr * r ** (d - 1) * diag))


def phi_matrix(spec: EigenspaceSpec, pts: np.ndarray) -> np.ndarray:
    """U[i, k] = Phi_{alpha_k}(pts_i) over the eigenspace basis (no Gram involved)."""
    pts = np.asarray(pts, float)
    d, N = spec.d, spec.N
    P = pts.shape[0]
    H = hermite_sweep(N, pts.T.ravel()).reshape(N + 1, d, P)
    idx = spec.indices()
    U = np.ones((P, len(idx)))
    for k, alpha in enumerate(idx):
        for i, a in enumerate(alpha):
            U[:, k] *= H[a, i]
    return U


def phi_matrix_direct(spec: EigenspaceSpec, pts) -> np.ndarray:
    """Same as phi_matrix through phi_alpha (slow; test oracle)."""
    return np.stack([phi_alpha(a, pts) for a in spec.indices()], axis=-1)


@dataclass
class TraceResult:
    value: float
    refined: float
    under_resolved: bool

    def __float__(self) -> float:
        return self.value


def trace_on_grid(spec: EigenspaceSpec, grid=None, n: int = 400, rtol: float = 1e-4) -> TraceResult:
    """Quadrature of Pi(x, x) over R^d; should equal the eigenspace dimension.

    ``grid`` is anything with ``points`` and ``weights`` (a QuadratureGrid);
    without one the radial Gauss rule with ``n`` nodes is used.  The result
    is compared against the radial rule at twice the resolution and flagged
    when they differ by more than ``rtol`` relative.
    """
    if grid is None:
        val = trace_radial(spec, n=n)
    else:
        val = float(np.sum(grid.weights * kernel_spectral(spec, grid.points, grid.points)))
    ref = trace_radial(spec, n=2 * n)
    return TraceResult(val, ref, abs(val - ref) > rtol * max(abs(ref), 1.0))


# --- pointwise envelopes for P_lambda[psi_j] -----------------------------------

@dataclass
class EnvelopeReport:
    j: int
    lam: float
    mu: float
    cases: np.ndarray                 # 'a', 'b', 'c', 'anti' or 'skip' per pair
    values: np.ndarray                # |P_lambda[psi_j](x, y)|
    envelopes: np.ndarray             # nan for skipped pairs
    skipped: int

    @property
    def ratios(self) -> np.ndarray:
        return self.values / self.envelopes

    def fitted_B(self) -> dict[str, float]:
        r = self.ratios
        return {c: float(np.nanmax(r[self.cases == c])) for c in ("a", "b", "c", "anti")
                if np.any(self.cases == c)}


def envelope_case(D, ip, mu: float, small: float = 1 / 16):
    """Case labels by sign and size of D against mu^2.

    'b' when |D| <= small mu^2 / 2, 'a' when -D >= 2 small mu^2, 'c' when
    D >= 2 small mu^2; the factor-2 band in between is 'skip'.  Pairs with
    1 + <x, y> < 1e-2 are 'anti'.
    """
    D = np.asarray(D, float)
    s = small * mu * mu
    out = np.full(D.shape, "skip", dtype=object)
    out[np.abs(D) <= s / 2] = "b"
    out[-D >= 2 * s] = "a"
    out[D >= 2 * s] = "c"
    out[1 + np.asarray(ip) < 1e-2] = "anti"
    return out


def envelope(case: str, j: int, lam: float, mu: float, D: float, d: int, N: float = 2) -> float:
    """Envelope of |P_lambda[psi_j]| for one case, constants set to one."""
    tj = 2.0 ** j
    base = tj ** ((d - 2) / 2)
    far = base * (lam / tj ** 3 + 1) ** -N
    if case == "anti":
        return base * (lam * tj) ** -N
    if case == "a":
        return base * (lam * tj * abs(D) + 1) ** -N if 1 / tj <= abs(D) ** 0.25 else far
    if case == "b":
        return base * (lam * tj * mu * mu + 1) ** -N if 1 / tj <= mu ** 0.5 else far
    if case == "c":
        return tj ** ((d - 1) / 2) / math.sqrt(lam * mu) if 1 / tj <= mu ** 0.5 else far
    raise ValueError(case)


def envelope_check(spec: EigenspaceSpec, j: int, mu: float, sample_pairs, N: float = 2,
                   small: float = 1 / 16) -> EnvelopeReport:
    """Compare |P_lambda[psi_j](x, y)| with the case envelope on rescaled pairs.

    ``sample_pairs`` is (X, Y) with points near the unit sphere
    (|x| ~ 1 - mu).  Values come from the spectral sum of the window weights.
    """
    from .decompositions import build_partition
    X, Y = (np.atleast_2d(np.asarray(a, float)) for a in sample_pairs)
    d, lam = spec.d, spec.lam
    D = discriminant(X, Y)
    ip = np.sum(X * Y, -1)
    cases = envelope_case(D, ip, mu, small)
    eta = build_partition().psi_j_kappa(j, "none")
    r = math.sqrt(lam)
    vals = np.abs(np.asarray(kernel_windowed_spectral(spec, eta, r * X, r * Y))).reshape(-1)
    env = np.array([np.nan if c == "skip" else envelope(c, j, lam, mu, Dv, d, N)
                    for c, Dv in zip(cases, D)])
    return EnvelopeReport(j, lam, mu, cases, vals, env, int(np.sum(cases == "skip")))
