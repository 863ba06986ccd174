"""Hermite functions: stable evaluation, tensor products and WKB asymptotics.

The L^2-normalized Hermite functions satisfy

    h_{k+1}(t) = sqrt(2/(k+1)) t h_k(t) - sqrt(k/(k+1)) h_{k-1}(t),
    h_0(t) = pi^{-1/4} exp(-t^2/2).

The recurrence is run on mantissas with a per-point base-2 exponent carried
alongside, so neither the Gaussian seed nor the growth in the forbidden
region leaves double range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Iterator, Sequence

import numpy as np

LN2 = math.log(2.0)
_RESCALE_BITS = 300
_RESCALE_AT = 2.0 ** _RESCALE_BITS


@dataclass(frozen=True)
class ScaledReal:
    """mantissa * 2**exponent with mantissa in [1, 2) (or 0)."""

    mantissa: float
    exponent: int = 0

    def __post_init__(self):
        m = abs(self.mantissa)
        if m != 0 and not (1.0 <= m < 2.0):
            raise ValueError("mantissa must lie in [1, 2)")

    @classmethod
    def from_parts(cls, m: float, e: int) -> "ScaledReal":
        if m == 0 or not math.isfinite(m):
            return cls(0.0 if m == 0 else m, 0)
        fm, fe = math.frexp(m)  # m = fm * 2**fe, |fm| in [0.5, 1)
        return cls(fm * 2.0, int(e) + fe - 1)

    @classmethod
    def from_float(cls, x: float) -> "ScaledReal":
        return cls.from_parts(x, 0)

    def __float__(self) -> float:
        if self.mantissa == 0:
            return 0.0
        if self.exponent > 1100:
            return math.copysign(math.inf, self.mantissa)
        if self.exponent < -1200:
            return 0.0
        return math.ldexp(self.mantissa, self.exponent)

    def __mul__(self, other: "ScaledReal") -> "ScaledReal":
        return ScaledReal.from_parts(self.mantissa * other.mantissa,
                                     self.exponent + other.exponent)

    def log2abs(self) -> float:
        if self.mantissa == 0:
            return -math.inf
        return math.log2(abs(self.mantissa)) + self.exponent


def _seed(t: np.ndarray):
    """Mantissa/exponent of h_0 at each t."""
    log2h0 = -t * t / (2 * LN2) - 0.25 * math.log2(math.pi)
    e = np.floor(log2h0)
    m = np.exp2(log2h0 - e)
    return m, e.astype(np.int64)


def iter_hermite_scaled(k_max: int, t) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Yield (k, mantissa, exponent) with h_k(t) = mantissa * 2**exponent.

    The mantissa arrays are overwritten in place on the next step; copy if kept.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    t = np.asarray(t, dtype=float)
    m_cur, e = _seed(t)
    m_prev = np.zeros_like(m_cur)
    yield 0, m_cur, e
    for k in range(k_max):
        m_next = math.sqrt(2.0 / (k + 1)) * t * m_cur - math.sqrt(k / (k + 1)) * m_prev
        m_prev, m_cur = m_cur, m_next
        big = np.abs(m_cur) > _RESCALE_AT
        if big.any():
            m_cur[big] *= 2.0 ** -_RESCALE_BITS
            m_prev[big] *= 2.0 ** -_RESCALE_BITS
            e = e + big * _RESCALE_BITS
        yield k + 1, m_cur, e


def _to_float(m: np.ndarray, e: np.ndarray) -> np.ndarray:
    e_clip = np.clip(e, -2000, 2000).astype(np.int64)
    return np.ldexp(m, e_clip)


def hermite_sweep(k_max: int, t, ks: Sequence[int] | None = None) -> np.ndarray:
    """Values h_0..h_{k_max} at t in one recurrence pass.

    Returns an array of shape (k_max+1,) + shape(t), or (len(ks),) + shape(t)
    if only the orders ``ks`` are wanted (saves memory on large sweeps).
    """
    t_arr = np.asarray(t, dtype=float)
    shape = t_arr.shape
    flat = t_arr.ravel()
    wanted = None if ks is None else {int(k): i for i, k in enumerate(ks)}
    if wanted is not None and wanted and max(wanted) > k_max:
        raise ValueError("requested order above k_max")
    n_out = k_max + 1 if wanted is None else len(wanted)
    out = np.empty((n_out, flat.size))
    for k, m, e in iter_hermite_scaled(k_max, flat):
        if wanted is None:
            out[k] = _to_float(m, e)
        elif k in wanted:
            out[wanted[k]] = _to_float(m, e)
    return out.reshape((n_out,) + shape)


def hermite_1d(k: int, t):
    """h_k(t); scalar in, scalar out, array in, array out."""
    if k < 0:
        raise ValueError("k must be >= 0")
    vals = hermite_sweep(k, t, ks=[k])[0]
    return float(vals) if np.ndim(t) == 0 else vals


def hermite_1d_scaled(k: int, t: float) -> ScaledReal:
    """h_k(t) as a ScaledReal; usable far beyond double range."""
    if k < 0:
        raise ValueError("k must be >= 0")
    for kk, m, e in iter_hermite_scaled(k, np.array([float(t)])):
        if kk == k:
            return ScaledReal.from_parts(float(m[0]), int(e[0]))
    raise RuntimeError("unreachable")


def hermite_deriv(k: int, t):
    """h_k'(t) = t h_k(t) - sqrt(2k+2) h_{k+1}(t)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    h = hermite_sweep(k + 1, t, ks=[k, k + 1])
    out = np.asarray(t) * h[0] - math.sqrt(2 * k + 2) * h[1]
    return float(out) if np.ndim(t) == 0 else out


def hermite_zero_value(k: int) -> float:
    """Closed form of h_k(0)."""
    if k % 2:
        return 0.0
    m = k // 2
    # (2m-1)!!/(2m)!! = binom(2m, m) / 4^m, in logs
    lg = math.lgamma(2 * m + 1) - 2 * math.lgamma(m + 1) - 2 * m * LN2
    return (-1) ** m * math.pi ** -0.25 * math.exp(0.5 * lg)


# --- multi-indices and tensor eigenfunctions ---------------------------------

def multi_indices(d: int, N: int) -> list[tuple[int, ...]]:
    """All alpha in N_0^d with |alpha| = N, lexicographically descending in alpha_1."""
    if d < 1 or N < 0:
        raise ValueError("need d >= 1 and N >= 0")
    out = []
    # stars and bars
    for bars in combinations(range(N + d - 1), d - 1):
        prev = -1
        alpha = []
        for b in bars:
            alpha.append(b - prev - 1)
            prev = b
        alpha.append(N + d - 2 - prev)
        out.append(tuple(alpha))
    return out


def eigenspace_dim(d: int, N: int) -> int:
    return math.comb(N + d - 1, d - 1)


def phi_alpha(alpha: Sequence[int], x) -> np.ndarray | float:
    """Tensor Hermite function prod_i h_{alpha_i}(x_i).  x has shape (..., d)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != len(alpha):
        raise ValueError(f"dimension mismatch: alpha has {len(alpha)} entries, x has {x.shape[-1]}")
    val = np.ones(x.shape[:-1])
    for i, a in enumerate(alpha):
        val = val * hermite_1d(int(a), x[..., i])
    return float(val) if val.ndim == 0 else val


# --- WKB ---------------------------------------------------------------------

def s_minus(nu: float, t):
    """int_0^t sqrt(nu^2 - tau^2) dtau for |t| <= nu."""
    t = np.asarray(t, dtype=float)
    r = np.clip(t / nu, -1.0, 1.0)
    return 0.5 * (t * np.sqrt(np.maximum(nu * nu - t * t, 0.0)) + nu * nu * np.arcsin(r))


def s_plus(nu: float, t):
    """int_nu^t sqrt(tau^2 - nu^2) dtau for t >= nu."""
    t = np.asarray(t, dtype=float)
    r = np.maximum(t / nu, 1.0)
    return 0.5 * (t * np.sqrt(np.maximum(t * t - nu * nu, 0.0))
                  - nu * nu * np.log(r + np.sqrt(r * r - 1.0)))


def wkb_regime(k: int, t: float) -> str:
    nu = math.sqrt(2 * k + 1)
    band = nu ** (-1.0 / 3.0)
    at = abs(t)
    if at < nu - band:
        return "oscillatory"
    if at > nu + band:
        return "exponential"
    return "turning"


def wkb_error_budget(k: int, t) -> np.ndarray | float:
    nu = math.sqrt(2 * k + 1)
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.abs(t * t - nu * nu) ** -0.5 / np.abs(np.abs(t) - nu)
    return float(out) if out.ndim == 0 else out


def _osc_basis(k: int, t: np.ndarray) -> np.ndarray:
    nu = math.sqrt(2 * k + 1)
    s = s_minus(nu, t)
    trig = np.cos(s) if k % 2 == 0 else np.sin(s)
    return (-1) ** (k // 2) * (nu * nu - t * t) ** -0.25 * trig


def _exp_basis_log(k: int, t: np.ndarray) -> np.ndarray:
    """log of (t^2 - nu^2)^{-1/4} exp(-s_plus(|t|)) (the decaying branch)."""
    nu = math.sqrt(2 * k + 1)
    at = np.abs(t)
    return -0.25 * np.log(at * at - nu * nu) - s_plus(nu, at)


@dataclass
class WkbValue:
    value: float | None
    regime: str
    error_budget: float
    envelope: float
    amplitude: float


@dataclass
class AmplitudeFit:
    a_minus: float
    a_plus: float
    residual_minus: float
    residual_plus: float
    per_k: dict = field(default_factory=dict)


class AmplitudeFitError(RuntimeError):
    pass


def _fit_one(k: int, n: int = 400):
    """Least-squares amplitudes of both branches against the recurrence."""
    nu = math.sqrt(2 * k + 1)
    band = nu ** (-1.0 / 3.0)
    # oscillatory: keep away from the turning point by a few bands
    t_osc = np.linspace(0.0, nu - 4 * band, n)
    h = hermite_1d(k, t_osc)
    b = _osc_basis(k, t_osc)
    a_m = float(h @ b / (b @ b))
    res_m = float(np.linalg.norm(h - a_m * b) / np.linalg.norm(h))
    # exponential: compare in log space on t > 0
    t_exp = np.linspace(nu + 4 * band, nu + 4 * band + 3.0, n // 4)
    logs = np.array([hermite_1d_scaled(k, float(tt)).log2abs() * LN2 for tt in t_exp[:: max(1, len(t_exp) // 25)]])
    t_sub = t_exp[:: max(1, len(t_exp) // 25)]
    sign = 1.0  # h_k > 0 beyond the largest zero
    diff = logs - _exp_basis_log(k, t_sub)
    log_a = float(np.mean(diff))
    a_p = sign * math.exp(log_a)
    res_p = float(np.max(np.abs(diff - log_a)))
    return a_m, a_p, res_m, res_p


def amplitude_fit(k_range: Sequence[int], max_residual: float = 0.2) -> AmplitudeFit:
    """Fit the WKB amplitudes a_k^- (oscillatory) and a_k^+ (decaying) to the recurrence.

    The sign factor (-1)^{floor(k/2)} is absorbed in the basis, so a fitted
    a_minus is positive.  Returned values are averages over ``k_range``.
    """
    ks = list(k_range)
    if not ks:
        raise ValueError("k_range must be nonempty")
    per = {k: _fit_one_cached(int(k)) for k in ks}
    a_m = float(np.mean([v[0] for v in per.values()]))
    a_p = float(np.mean([v[1] for v in per.values()]))
    r_m = max(v[2] for v in per.values())
    r_p = max(v[3] for v in per.values())
    if r_m > max_residual:
        raise AmplitudeFitError(f"oscillatory residual {r_m:.3g} above {max_residual}")
    return AmplitudeFit(a_m, a_p, r_m, r_p, per)


@lru_cache(maxsize=256)
def _fit_one_cached(k: int):
    return _fit_one(k)


def wkb_hermite(k: int, t: float, amplitudes: tuple[float, float] | None = None) -> WkbValue:
    """WKB approximation of h_k(t) with its regime and error budget.

    In the turning regime only the envelope nu^{-1/6} is returned.
    ``amplitudes`` = (a_minus, a_plus); by default fitted at this k.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if amplitudes is None:
        a_m, a_p = _fit_one_cached(int(k))[:2]
    else:
        a_m, a_p = amplitudes
    nu = math.sqrt(2 * k + 1)
    regime = wkb_regime(k, t)
    budget = float(wkb_error_budget(k, t))
    env = nu ** (-1.0 / 6.0)
    ta = np.array([float(t)])
    if regime == "oscillatory":
        val = float(a_m * _osc_basis(k, ta)[0])
        return WkbValue(val, regime, budget, env, a_m)
    if regime == "exponential":
        par = (-1) ** k if t < 0 else 1
        val = par * a_p * math.exp(float(_exp_basis_log(k, ta)[0]))
        return WkbValue(val, regime, budget, env, a_p)
    return WkbValue(None, regime, budget, env, float("nan"))
