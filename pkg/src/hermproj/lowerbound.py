"""Lower-bound constructions near the sphere |x| = sqrt(lambda).

The test function g = chi_{Q_l} sum_{alpha in J} c_alpha Phi_alpha lives on a
box in the annulus; its pairing with Pi_lambda(x0, .) splits into a diagonal
part I and a remainder II through the one-dimensional integrals
a_{u,v} = int_{-l}^{l} h_u h_v and a*_{u,v} over the radial slab.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hermite import hermite_sweep, multi_indices
from .kernels import EigenspaceSpec, _gl, phi_matrix
from .opnorm import (INF, QuadratureGrid, grid_annulus, projection_gram)

ASYMPTOTIC_J_FRACTIONS = (2.0 ** -10, 2.0 ** -9)
# the asymptotic fractions leave J empty for N <= 2^12 at mu = 1/8
DESK_J_FRACTIONS = (0.0, 1.0 / 16)


# --- one-dimensional integrals --------------------------------------------------

def _panel_rule(a: float, b: float, k_max: int, order: int = 24, per_panel: float = 0.5):
    """Composite Gauss-Legendre nodes on [a, b] with panel length <= per_panel / sqrt(2 k_max + 1) * 2 pi."""
    wave = 2 * math.pi / math.sqrt(2 * k_max + 1)
    n_pan = max(1, int(math.ceil((b - a) / (per_panel * wave))))
    xg, wg = _gl(order)
    e = np.linspace(a, b, n_pan + 1)
    mid, half = 0.5 * (e[:-1] + e[1:]), 0.5 * (e[1:] - e[:-1])
    t = (mid[:, None] + half[:, None] * xg).ravel()
    w = (half[:, None] * wg).ravel()
    return t, w


def overlap_matrix(k_max: int, a: float, b: float, order: int = 24) -> np.ndarray:
    """M[u, v] = int_a^b h_u h_v dt for u, v <= k_max."""
    t, w = _panel_rule(a, b, k_max, order)
    H = hermite_sweep(k_max, t)
    return H @ (w[:, None] * H.T)


def a_uv_closed(u: int, v: int, ell: float) -> float:
    """a_{u,v}(l) = int_{-l}^{l} h_u h_v from boundary values; quadrature when u = v."""
    if u < 0 or v < 0:
        raise ValueError("u, v must be >= 0")
    if (u + v) % 2:
        return 0.0
    if u == v:
        return a_uv_quad(u, v, ell)
    k = max(u, v) + 1
    h = hermite_sweep(k, np.array([float(ell)]))[:, 0]
    return float(2.0 / (math.sqrt(2) * (u - v))
                 * (math.sqrt(u + 1) * h[u + 1] * h[v] - math.sqrt(v + 1) * h[u] * h[v + 1]))


def a_uv_quad(u: int, v: int, ell: float, order: int = 24) -> float:
    t, w = _panel_rule(-ell, ell, max(u, v, 1), order)
    H = hermite_sweep(max(u, v), t, ks=[u, v] if u != v else [u])
    return float(np.sum(w * H[0] * H[-1]))


def a_uv_matrix(k_max: int, ell: float) -> np.ndarray:
    """All a_{u,v}(l) for u, v <= k_max, closed form off the diagonal."""
    h = hermite_sweep(k_max + 1, np.array([float(ell)]))[:, 0]
    u = np.arange(k_max + 1)
    U, V = np.meshgrid(u, u, indexing="ij")
    with np.errstate(divide="ignore", invalid="ignore"):
        A = (1 + (-1.0) ** (U + V)) / (math.sqrt(2) * (U - V)) * (
            np.sqrt(U + 1) * h[U + 1] * h[V] - np.sqrt(V + 1) * h[U] * h[V + 1])
    diag = np.diag(overlap_matrix(k_max, -ell, ell))
    A[u, u] = diag
    return A


def slab(lam: float, mu: float) -> tuple[float, float]:
    s = math.sqrt(lam)
    return s * (1 - 2 * mu), s * (1 - 1.5 * mu)


def a_star_uv(u: int, v: int, lam: float, mu: float) -> float:
    """int over the radial slab [sqrt(lam)(1 - 2 mu), sqrt(lam)(1 - 3 mu / 2)] of h_u h_v."""
    a, b = slab(lam, mu)
    t, w = _panel_rule(a, b, max(u, v, 1))
    H = hermite_sweep(max(u, v), t, ks=sorted({u, v}))
    return float(np.sum(w * H[0] * H[-1]))


def ell_of(lam: float, mu: float, d: int) -> float:
    return math.sqrt(lam * mu) / (2 * math.sqrt(d))


# --- J set and the test function ---------------------------------------------------

@dataclass
class JSet:
    d: int
    N: int
    mu: float
    fractions: tuple[float, float]
    members: list

    @property
    def size(self) -> int:
        return len(self.members)

    def predicted_size(self) -> float:
        lo, hi = self.fractions
        return ((hi - lo) * self.N * self.mu / self.d) ** (self.d - 1)


def jset(d: int, N: int, mu: float, fractions: tuple[float, float] = DESK_J_FRACTIONS) -> JSet:
    """alpha with |alpha| = N and lo N mu / d <= alpha_j <= hi N mu / d for j >= 2."""
    lo, hi = fractions[0] * N * mu / d, fractions[1] * N * mu / d
    rng = [j for j in range(int(math.floor(hi)) + 1) if lo <= j <= hi]
    members = []

    def rec(prefix, remaining, k):
        if k == 0:
            if remaining >= 0:
                members.append((remaining,) + tuple(prefix))
            return
        for j in rng:
            if j <= remaining:
                rec(prefix + [j], remaining - j, k - 1)
    rec([], N, d - 1)
    return JSet(d, N, mu, tuple(fractions), members)


class EmptyJSetError(ValueError):
    pass


@dataclass
class X0Result:
    x0: np.ndarray
    total: float
    normalized: float
    lattice_points: int


def _j_values(J: JSet, pts: np.ndarray) -> np.ndarray:
    """Phi_alpha(pts) for alpha in J, shape (P, |J|)."""
    d = J.d
    kmax = max(max(a) for a in J.members)
    H = hermite_sweep(kmax, pts.T.ravel()).reshape(kmax + 1, d, -1)
    out = np.ones((pts.shape[0], J.size))
    for k, alpha in enumerate(J.members):
        for i, a in enumerate(alpha):
            out[:, k] *= H[a, i]
    return out


def pick_x0(d: int, N: int, mu: float, J: JSet | None = None, refine: int = 1) -> X0Result:
    """Lattice maximizer of sum_{alpha in J} |Phi_alpha(x)| over the slab x ball."""
    J = jset(d, N, mu) if J is None else J
    if J.size == 0:
        raise EmptyJSetError(f"J is empty for d={d}, N={N}, mu={mu}")
    lam = 2 * N + d
    a, b = slab(lam, mu)
    rad = (lam * mu) ** -0.5
    h = rad / 4 / refine
    x1 = np.arange(a, b + 1e-12, h)
    tr = np.arange(-rad, rad + 1e-12, h)
    grids = np.meshgrid(x1, *([tr] * (d - 1)), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], 1)
    pts = pts[np.sum(pts[:, 1:] ** 2, 1) <= rad * rad + 1e-12]
    vals = np.abs(_j_values(J, pts)).sum(1)
    i = int(np.argmax(vals))
    tot = float(vals[i])
    return X0Result(pts[i], tot, tot / (lam * mu) ** (0.75 * d - 1), pts.shape[0])


@dataclass
class GFunction:
    d: int
    N: int
    mu: float
    J: JSet
    x0: np.ndarray
    signs: np.ndarray
    box: list
    ell: float
    l2norm: float

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        inside = np.ones(x.shape[0], bool)
        for i, (lo, hi) in enumerate(self.box):
            inside &= (x[:, i] >= lo) & (x[:, i] <= hi)
        return inside * (_j_values(self.J, x) @ self.signs)


def _tensor_overlaps(J: JSet, lam: float, mu: float, kmax: int):
    """a* (slab) and a (symmetric interval) matrices up to kmax."""
    a, b = slab(lam, mu)
    Astar = overlap_matrix(kmax, a, b)
    Aint = a_uv_matrix(kmax, ell_of(lam, mu, J.d))
    return Astar, Aint


def build_g(d: int, N: int, mu: float, J: JSet | None = None, x0: X0Result | None = None) -> GFunction:
    J = jset(d, N, mu) if J is None else J
    x0 = pick_x0(d, N, mu, J) if x0 is None else x0
    lam = 2 * N + d
    vals = _j_values(J, x0.x0[None, :])[0]
    signs = np.where(vals >= 0, 1.0, -1.0)
    ell = ell_of(lam, mu, d)
    a, b = slab(lam, mu)
    box = [(a, b)] + [(-ell, ell)] * (d - 1)
    Astar, Aint = _tensor_overlaps(J, lam, mu, N)
    mem = np.array(J.members)
    # ||g||^2 = sum_{alpha, beta in J} c_a c_b A_{alpha beta}
    A = Astar[np.ix_(mem[:, 0], mem[:, 0])]
    for i in range(1, d):
        A = A * Aint[np.ix_(mem[:, i], mem[:, i])]
    l2 = math.sqrt(max(float(signs @ A @ signs), 0.0))
    return GFunction(d, N, mu, J, x0.x0, signs, box, ell, l2)


@dataclass
class Check57:
    d: int
    N: int
    mu: float
    integral: float
    ratio: float
    I: float
    II: float
    II_over_I: float
    diag_A: np.ndarray
    x0: np.ndarray
    flagged: bool
    notes: dict = field(default_factory=dict)


def annulus_gram(spec: EigenspaceSpec, mu: float) -> tuple[np.ndarray, QuadratureGrid]:
    g = grid_annulus(spec.d, spec.lam, mu, rule="gauss", N=spec.N, force=True)
    return projection_gram(spec, g), g


def verify_5_7(d: int, N: int, mu: float, fractions: tuple[float, float] = DESK_J_FRACTIONS,
               max_II_ratio: float = 0.01) -> Check57:
    """int_{A} Pi(x0, y)^2 dy / (mu^{1/2} (lam mu)^{(d-2)/2}) with the I / II split of Pi g(x0)."""
    lam = 2 * N + d
    if not (lam ** (-2 / 3) <= mu <= 0.5):
        raise ValueError("need lam^{-2/3} <= mu <= 1/2")
    spec = EigenspaceSpec(d, N)
    J = jset(d, N, mu, fractions)
    x0 = pick_x0(d, N, mu, J)
    g = build_g(d, N, mu, J, x0)
    G, _ = annulus_gram(spec, mu)
    u = phi_matrix(spec, x0.x0[None, :])[0]
    integral = float(u @ G @ u)
    ratio = integral / (mu ** 0.5 * (lam * mu) ** ((d - 2) / 2))
    # Pi g (x0) = sum_{alpha in J} c_alpha sum_beta A_{alpha beta} Phi_beta(x0)
    Astar, Aint = _tensor_overlaps(J, lam, mu, N)
    betas = np.array(spec.indices())
    mem = np.array(J.members)
    Ab = Astar[np.ix_(mem[:, 0], betas[:, 0])]
    for i in range(1, d):
        Ab = Ab * Aint[np.ix_(mem[:, i], betas[:, i])]
    coeff = g.signs @ Ab                       # sum over alpha, per beta
    is_diag = np.zeros((mem.shape[0], betas.shape[0]), bool)
    index = {tuple(b): k for k, b in enumerate(map(tuple, betas))}
    for r, a in enumerate(map(tuple, mem)):
        is_diag[r, index[a]] = True
    diag_coeff = g.signs @ (Ab * is_diag)
    I = float(diag_coeff @ u)
    II = float((coeff - diag_coeff) @ u)
    diagA = Ab[is_diag]
    return Check57(d, N, mu, integral, ratio, I, II, abs(II) / abs(I), diagA, x0.x0,
                   abs(II) > max_II_ratio * abs(I),
                   {"J_size": J.size, "fractions": fractions, "g_l2": g.l2norm,
                    "x0_sum": x0.total, "x0_normalized": x0.normalized})


# --- reproducing witness -------------------------------------------------------------

@dataclass
class ReproducingWitness:
    spec: EigenspaceSpec
    mu: float
    grid: QuadratureGrid
    U: np.ndarray
    x0: np.ndarray
    f: np.ndarray
    coeff: np.ndarray  # Pi f = sum_k coeff_k Phi_k


def reproducing_witness(d: int, N: int, mu: float, x0=None) -> ReproducingWitness:
    """f = Pi(x0, .) chi_A on a Gauss annulus grid, with the expansion of Pi f."""
    spec = EigenspaceSpec(d, N)
    if x0 is None:
        x0 = pick_x0(d, N, mu, jset(d, N, mu, (0.0, 0.25))).x0
    grid = grid_annulus(d, spec.lam, mu, rule="gauss", N=N, force=True)
    U = phi_matrix(spec, grid.points)
    u0 = phi_matrix(spec, np.asarray(x0, float)[None, :])[0]
    f = U @ u0
    coeff = U.T @ (grid.weights * f)
    return ReproducingWitness(spec, mu, grid, U, np.asarray(x0, float), f, coeff)


def reproducing_lower(d: int, N: int, mu: float, p: float, q: float, witness: ReproducingWitness | None = None) -> float:
    """||chi Pi chi f||_q / ||f||_p for the reproducing witness."""
    W = reproducing_witness(d, N, mu) if witness is None else witness
    w = W.grid.weights
    Tf = W.U @ W.coeff

    def nrm(v, r):
        return float(np.abs(v).max()) if r == INF else float((w @ np.abs(v) ** r) ** (1 / r))
    return nrm(Tf, q) / nrm(W.f, p)


@dataclass
class DerivativeReport:
    ratio_max: float
    ratio_unscaled_max: float
    points: int


def derivative_bound_check(d: int, N: int, mu: float, alpha: tuple, n_points: int = 50,
                           seed: int = 0, witness: ReproducingWitness | None = None) -> DerivativeReport:
    """max |d^alpha h(y0)| / ((lam mu)^{|alpha|/2} ||h||_{L^inf(B(y0, 2 (lam mu)^{-1/2}))}), h = Pi f."""
    W = reproducing_witness(d, N, mu) if witness is None else witness
    spec = W.spec
    lam = spec.lam
    scale = (lam * mu) ** -0.5
    eps = scale / 64
    rng = np.random.default_rng(seed)
    s = math.sqrt(lam)
    rad = s * (1 - rng.uniform(mu / 2, mu, n_points))
    dirs = rng.standard_normal((n_points, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    Y = rad[:, None] * dirs

    def h(pts):
        return phi_matrix(spec, pts) @ W.coeff

    order = sum(alpha)
    # central differences for the multi-index alpha
    offsets = [(np.zeros(d), 1.0)]
    for i, a in enumerate(alpha):
        for _ in range(a):
            e = np.zeros(d)
            e[i] = eps
            offsets = [(o + e, c / (2 * eps)) for o, c in offsets] + [(o - e, -c / (2 * eps)) for o, c in offsets]
    deriv = sum(c * h(Y + o) for o, c in offsets)
    # sup of |h| over the ball B(y0, 2 scale): lattice of the ball
    u = np.linspace(-2 * scale, 2 * scale, 9)
    lat = np.stack(np.meshgrid(*([u] * d), indexing="ij"), -1).reshape(-1, d)
    lat = lat[np.linalg.norm(lat, axis=1) <= 2 * scale + 1e-12]
    sup = np.array([np.abs(h(y + lat)).max() for y in Y])
    r_scaled = np.abs(deriv) / (scale ** -order * sup)
    r_raw = np.abs(deriv) / sup
    return DerivativeReport(float(r_scaled.max()), float(r_raw.max()), n_points)
