"""Discretized operators on quadrature grids and L^p -> L^q norm estimation.

Convention: with grid weights w, ||f||_p^p = sum_j w_j |f_j|^p and
(T f)_i = sum_j K_ij w_j f_j.  Three storages share one interface:

* DenseOperator     K stored explicitly;
* LowRankOperator   K = U C U^H (projections: U holds eigenfunction samples);
* PolarOperator     d = 2 product grids (r_i, theta_k) with a rotation
                    invariant kernel, so K depends on (r_i, r_j, theta_l - theta_k)
                    and matvecs/2->2 norms go through FFTs in the angle.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .hermite import hermite_sweep
from .kernels import EigenspaceSpec, _gl, phi_matrix

INF = math.inf


class NyquistError(ValueError):
    pass


@dataclass
class QuadratureGrid:
    points: np.ndarray
    weights: np.ndarray
    region: str
    d: int
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.weights.size

    def measure(self) -> float:
        return float(self.weights.sum())

    def stats(self) -> dict:
        return {"points": int(self.size), "measure": self.measure(), "region": self.region} | {
            k: v for k, v in self.meta.items() if isinstance(v, (int, float, str))}


def _radial_nodes(r0: float, r1: float, n: int, rule: str):
    if rule == "trapezoid":
        r = np.linspace(r0, r1, n)
        wr = np.full(n, (r1 - r0) / (n - 1))
        wr[0] *= 0.5
        wr[-1] *= 0.5
        return r, wr
    xg, wg = _gl(n)
    return r0 + 0.5 * (r1 - r0) * (xg + 1), 0.5 * (r1 - r0) * wg


def _sphere_nodes(d: int, n_ang: int, rule: str):
    """Directions and weights on S^{d-1}.  d = 2: n_ang uniform angles;
    d = 3: Gauss-Legendre in cos(theta) (n_ang nodes) x 2 n_ang uniform longitudes."""
    if d == 2:
        th = 2 * math.pi * np.arange(n_ang) / n_ang
        return np.stack([np.cos(th), np.sin(th)], 1), np.full(n_ang, 2 * math.pi / n_ang)
    if d == 3:
        z, wz = _gl(n_ang)
        n_phi = 2 * n_ang
        ph = 2 * math.pi * np.arange(n_phi) / n_phi
        s = np.sqrt(1 - z * z)
        dirs = np.stack([np.outer(s, np.cos(ph)), np.outer(s, np.sin(ph)),
                         np.outer(z, np.ones(n_phi))], -1).reshape(-1, 3)
        w = np.outer(wz, np.full(n_phi, 2 * math.pi / n_phi)).ravel()
        return dirs, w
    raise ValueError("polar grids implemented for d in {2, 3}")


def polar_grid(d: int, r0: float, r1: float, n_r: int, n_ang: int, rule: str = "trapezoid",
               region: str = "ball", meta: dict | None = None) -> QuadratureGrid:
    r, wr = _radial_nodes(r0, r1, n_r, rule)
    dirs, wa = _sphere_nodes(d, n_ang, "uniform")
    pts = (r[:, None, None] * dirs[None, :, :]).reshape(-1, d)
    w = (wr[:, None] * r[:, None] ** (d - 1) * wa[None, :]).ravel()
    m = {"n_r": n_r, "n_ang": n_ang, "rule": rule, "r0": r0, "r1": r1}
    m.update(meta or {})
    m["radii"] = r
    m["radial_weights"] = wr * r ** (d - 1)
    m["n_dirs"] = dirs.shape[0]
    return QuadratureGrid(pts, w, region, d, m)


def _nyquist_counts(d, lam, r0, r1, eta_N):
    h = eta_N / math.sqrt(lam)
    n_r = max(2, int(math.ceil((r1 - r0) / h)) + 1)
    if d == 2:
        n_ang = int(math.ceil(2 * math.pi * r1 / h))
        n_ang += n_ang % 2
    else:
        n_ang = int(math.ceil(math.pi * r1 / h))
    return n_r, n_ang


def _check_nyquist(eta_N: float, force: bool):
    if eta_N > 0.25 and not force:
        raise NyquistError(f"Nyquist factor {eta_N} > 1/4 (use force=True)")


def grid_ball(d: int, lam: float, resolution: float = 0.25, rule: str = "trapezoid",
              radius_factor: float = 0.5, N: int | None = None, force: bool = False) -> QuadratureGrid:
    """Polar grid of the ball |x| < radius_factor sqrt(lam).

    rule='trapezoid': spacing <= resolution / sqrt(lam) radially and along the
    outer circle.  rule='gauss': Gauss-Legendre radius and angular rules
    exact for degree-2N trigonometric/spherical polynomials (needs N).
    """
    R = radius_factor * math.sqrt(lam)
    if rule == "trapezoid":
        _check_nyquist(resolution, force)
        n_r, n_ang = _nyquist_counts(d, lam, 0.0, R, resolution)
    else:
        if N is None:
            N = int((lam - d) // 2)
        n_r = int(math.ceil(R * math.sqrt(lam) / (math.pi * resolution * 4))) + N // 2 + 16
        n_ang = 2 * N + 4 if d == 2 else N + 2
    g = polar_grid(d, 0.0, R, n_r, n_ang, rule, "ball", {"lam": lam, "resolution": resolution})
    return g


def grid_annulus(d: int, lam: float, mu: float, resolution: float = 0.25, rule: str = "trapezoid",
                 N: int | None = None, force: bool = False) -> QuadratureGrid:
    """Polar grid of A_{lam, mu} = {x : 1 - |x|/sqrt(lam) in [mu/2, mu]}."""
    if not (lam ** (-2 / 3) - 1e-12 <= mu <= 0.5 + 1e-12) and not force:
        raise ValueError("need lam^{-2/3} <= mu <= 1/2")
    s = math.sqrt(lam)
    r0, r1 = s * (1 - mu), s * (1 - mu / 2)
    if rule == "trapezoid":
        _check_nyquist(resolution, force)
        n_r, n_ang = _nyquist_counts(d, lam, r0, r1, resolution)
    else:
        if N is None:
            N = int((lam - d) // 2)
        n_r = int(math.ceil((r1 - r0) * s / (math.pi * resolution * 4))) + 12
        n_ang = 2 * N + 4 if d == 2 else N + 2
    return polar_grid(d, r0, r1, n_r, n_ang, rule, "annulus", {"lam": lam, "mu": mu, "resolution": resolution})


def grid_global(d: int, lam: float, resolution: float = 0.25, rule: str = "trapezoid",
                N: int | None = None, force: bool = False) -> QuadratureGrid:
    """Ball of radius max(2 sqrt(lam), sqrt(lam) + 8): captures the decaying exterior."""
    R = max(2 * math.sqrt(lam), math.sqrt(lam) + 8)
    return grid_ball(d, lam, resolution, rule, radius_factor=R / math.sqrt(lam), N=N, force=force)


# --- operators ----------------------------------------------------------------

class DiscretizedOperator:
    """Base interface; subclasses implement matvec/rmatvec and kernel blocks."""

    row: QuadratureGrid
    col: QuadratureGrid

    def matvec(self, f):
        raise NotImplementedError

    def rmatvec(self, g):
        """Adjoint for the weighted pairing: (T* g)_j = sum_i conj(K_ij) w_i g_i."""
        raise NotImplementedError

    def kernel_rows(self, rows: slice) -> np.ndarray:
        raise NotImplementedError

    def kernel_cols(self, cols: slice) -> np.ndarray:
        return self.kernel_rows_T(cols)

    def kernel_rows_T(self, cols: slice) -> np.ndarray:
        raise NotImplementedError

    @property
    def shape(self):
        return (self.row.size, self.col.size)

    # exact endpoint norms; subclasses may override with fast paths
    def norm_1q(self, q: float, chunk: int = 2048) -> float:
        wr = self.row.weights
        best = 0.0
        for s in range(0, self.shape[1], chunk):
            Kc = np.abs(self.kernel_rows_T(slice(s, s + chunk)))  # (cols, rows)
            if q == INF:
                v = Kc.max(axis=1)
            else:
                v = (Kc ** q @ wr) ** (1 / q)
            best = max(best, float(v.max()))
        return best

    def norm_pinf(self, p: float, chunk: int = 2048) -> float:
        wc = self.col.weights
        pp = INF if p == 1 else (1.0 if p == INF else p / (p - 1))
        best = 0.0
        for s in range(0, self.shape[0], chunk):
            Kr = np.abs(self.kernel_rows(slice(s, s + chunk)))
            if pp == INF:
                v = Kr.max(axis=1)
            else:
                v = (Kr ** pp @ wc) ** (1 / pp)
            best = max(best, float(v.max()))
        return best

    def norm_22(self, rtol: float = 1e-10, max_iter: int = 5000, seed: int = 0) -> float:
        """Largest singular value of W_r^{1/2} K W_c^{1/2} by power iteration on T*T."""
        rng = np.random.default_rng(seed)
        f = rng.standard_normal(self.shape[1]) + 0j
        f /= _norm(f, 2, self.col.weights)
        prev = 0.0
        for _ in range(max_iter):
            g = self.rmatvec(self.matvec(f))
            val = _norm(g, 2, self.col.weights)
            if val == 0:
                return 0.0
            f = g / val
            if abs(val - prev) <= rtol * val:
                break
            prev = val
        return math.sqrt(val)


def _norm(f, p, w):
    a = np.abs(f)
    if p == INF:
        return float(a.max())
    return float((w @ a ** p) ** (1 / p))


class DenseOperator(DiscretizedOperator):
    def __init__(self, K: np.ndarray, row: QuadratureGrid, col: QuadratureGrid):
        if not np.all(np.isfinite(K)):
            bad = np.argwhere(~np.isfinite(K))[0]
            raise FloatingPointError(f"non-finite kernel value at {tuple(bad)}")
        self.K, self.row, self.col = K, row, col

    def matvec(self, f):
        return self.K @ (self.col.weights * f)

    def rmatvec(self, g):
        return self.K.conj().T @ (self.row.weights * g)

    def kernel_rows(self, rows):
        return self.K[rows]

    def kernel_rows_T(self, cols):
        return self.K[:, cols].T

    def transpose(self) -> "DenseOperator":
        return DenseOperator(self.K.T.copy(), self.col, self.row)

    def norm_22(self, rtol: float = 1e-10, max_iter: int = 5000, seed: int = 0) -> float:
        if max(self.shape) <= 3000:
            S = np.sqrt(self.row.weights)[:, None] * self.K * np.sqrt(self.col.weights)[None, :]
            return float(np.linalg.norm(S, 2))
        return super().norm_22(rtol, max_iter, seed)


def assemble(kernel_fn, row: QuadratureGrid, col: QuadratureGrid, chunk: int = 4096) -> DenseOperator:
    """Dense K_ij = kernel_fn(x_i, y_j); kernel_fn takes broadcastable (.., d) arrays."""
    K = None
    for s in range(0, row.size, chunk):
        xs = row.points[s: s + chunk]
        blk = np.asarray(kernel_fn(xs[:, None, :], col.points[None, :, :]))
        if K is None:
            K = np.empty((row.size, col.size), dtype=blk.dtype)
        K[s: s + chunk] = blk
    return DenseOperator(K, row, col)


class LowRankOperator(DiscretizedOperator):
    """K = U C U^H on a single grid; psd=True when C is positive semidefinite."""

    def __init__(self, U: np.ndarray, grid: QuadratureGrid, C: np.ndarray | None = None, psd: bool | None = None):
        self.U, self.row, self.col = U, grid, grid
        self.C = np.eye(U.shape[1]) if C is None else C
        self.psd = (C is None) if psd is None else psd
        self._G = None

    @property
    def gram(self) -> np.ndarray:
        """G = U^H W U (the eigenspace Gram matrix over the grid)."""
        if self._G is None:
            self._G = gram_matrix(self.U, self.row.weights)
        return self._G

    def matvec(self, f):
        return self.U @ (self.C @ (self.U.conj().T @ (self.row.weights * f)))

    def rmatvec(self, g):
        return self.U @ (self.C.conj().T @ (self.U.conj().T @ (self.row.weights * g)))

    def kernel_rows(self, rows):
        return (self.U[rows] @ self.C) @ self.U.conj().T

    def kernel_rows_T(self, cols):
        return self.kernel_rows(cols).conj() if self.psd else (self.U[cols].conj() @ self.C.T) @ self.U.T

    def diag(self) -> np.ndarray:
        return np.real(np.einsum("ik,kl,il->i", self.U, self.C, self.U.conj()))

    def norm_1q(self, q, chunk: int = 2048):
        if self.psd and q == INF:
            return float(self.diag().max())
        if self.psd and q == 2:
            return self.row_l2().max()
        return super().norm_1q(q, chunk)

    def norm_pinf(self, p, chunk: int = 2048):
        if self.psd and p == 1:
            return float(self.diag().max())
        if self.psd and p == 2:
            return self.row_l2().max()
        return super().norm_pinf(p, chunk)

    def row_l2(self) -> np.ndarray:
        """sqrt(sum_j w_j |K_ij|^2) = sqrt(u_i^H C G C^H u_i)."""
        M = self.C @ self.gram @ self.C.conj().T
        return np.sqrt(np.maximum(np.real(np.einsum("ik,kl,il->i", self.U, M, self.U.conj())), 0))

    def norm_22(self, rtol=1e-10, max_iter=5000, seed=0):
        G = self.gram
        L = np.linalg.cholesky(G + 1e-300 * np.eye(G.shape[0])) if self.psd else None
        if L is not None:
            S = L.conj().T @ self.C @ L
            return float(np.linalg.norm(S, 2))
        return super().norm_22(rtol, max_iter, seed)

    def gram_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.gram)


def gram_matrix(U: np.ndarray, w: np.ndarray, chunk: int = 20000) -> np.ndarray:
    r = U.shape[1]
    G = np.zeros((r, r), dtype=U.dtype)
    for s in range(0, U.shape[0], chunk):
        Uc = U[s: s + chunk]
        G += Uc.conj().T @ (w[s: s + chunk, None] * Uc)
    return G


def projection_operator(spec: EigenspaceSpec, grid: QuadratureGrid) -> LowRankOperator:
    """chi_E Pi_lambda chi_E on the grid, stored as U U^T."""
    return LowRankOperator(phi_matrix(spec, grid.points), grid)


def projection_gram(spec: EigenspaceSpec, grid: QuadratureGrid, chunk: int = 20000) -> np.ndarray:
    """Gram matrix without keeping U (for large d = 3 grids)."""
    r = spec.dim
    G = np.zeros((r, r))
    for s in range(0, grid.size, chunk):
        Uc = phi_matrix(spec, grid.points[s: s + chunk])
        G += Uc.T @ (grid.weights[s: s + chunk, None] * Uc)
    return G


def projection_defect(op: LowRankOperator) -> tuple[float, float]:
    """(||Pi^2 - Pi||_{2->2}, ||Pi||_{2->2}) of the discretized projection U U^T W."""
    g = op.gram_eigenvalues()
    return float(np.max(np.abs(g * (g - 1)))), float(g.max())


# --- radial (continuum) endpoint values for localized projections ---------------

def radial_sup(spec: EigenspaceSpec, G: np.ndarray | None, r0: float, r1: float,
               n: int = 400, refine: int = 2) -> tuple[float, float]:
    """sup over r in [r0, r1] of Pi(r e1, r e1) (G None) or of u(r)^T G u(r).

    Both are rotation invariant, so the sup over a ball/annulus is a sup on
    one ray.  Returns (value, r_argmax); the grid is refined around the max.
    """
    lo, hi = r0, r1
    best = (-1.0, r0)
    for _ in range(refine + 1):
        r = np.linspace(lo, hi, n)
        x = np.zeros((n, spec.d))
        x[:, 0] = r
        U = phi_matrix(spec, x)
        vals = np.sum(U * U, 1) if G is None else np.einsum("ik,kl,il->i", U, G, U)
        i = int(np.argmax(vals))
        if vals[i] > best[0]:
            best = (float(vals[i]), float(r[i]))
        step = (hi - lo) / (n - 1)
        lo, hi = max(r0, r[i] - 2 * step), min(r1, r[i] + 2 * step)
    return best


@dataclass
class LocalizedProjectionNorms:
    n_1inf: float
    n_2inf: float
    n_12: float
    n_22: float
    grid_points: int
    dim: int


def localized_projection_norms(spec: EigenspaceSpec, grid: QuadratureGrid,
                               r0: float, r1: float) -> LocalizedProjectionNorms:
    """Exact endpoint norms of chi_E Pi chi_E for a rotation invariant E = {r0 <= |x| <= r1}."""
    G = projection_gram(spec, grid)
    n1inf, _ = radial_sup(spec, None, r0, r1)
    v2, _ = radial_sup(spec, G, r0, r1)
    lam_max = float(np.linalg.eigvalsh(G).max())
    return LocalizedProjectionNorms(n1inf, math.sqrt(v2), math.sqrt(v2), lam_max, grid.size, spec.dim)


# --- polar operators for d = 2 windowed kernels ----------------------------------

def hankel_apply(w: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Z[a, :] = sum_b w[a + b] B[b, :] for a, b in 0..n-1 (w has length >= 2n - 1 or is zero-padded)."""
    n = B.shape[0]
    wp = np.zeros(2 * n - 1, dtype=complex)
    m = min(w.size, 2 * n - 1)
    wp[:m] = w[:m]
    # correlation: sum_b w[a+b] B[b] = conv(w, B[::-1])[a + n - 1]
    out = fftconvolve(wp[:, None], B[::-1], axes=0)
    return out[n - 1: 2 * n - 1]


def windowed_kernel_axis(d: int, weights: np.ndarray, r: np.ndarray, Y: np.ndarray,
                         chunk_elems: int = 1 << 23) -> np.ndarray:
    """K[i, p] = sum_n weights[n] Pi_{2n+d}(r_i e1, Y_p) for d = 2.

    Since x2 = 0 on the axis, the inner level sum is a Hankel product
    independent of i, leaving one contraction per radius.
    """
    if d != 2:
        raise ValueError("axis evaluation implemented for d = 2")
    n = weights.size
    hx = hermite_sweep(n - 1, r)                       # (n, n_r)
    h0 = hermite_sweep(n - 1, np.array([0.0]))[:, 0]    # h_b(0)
    out = np.empty((r.size, Y.shape[0]), dtype=complex)
    step = max(1, chunk_elems // max(n, 1))
    for s in range(0, Y.shape[0], step):
        Yc = Y[s:s + step]
        hy1 = hermite_sweep(n - 1, Yc[:, 0])             # (n, P)
        hy2 = hermite_sweep(n - 1, Yc[:, 1])
        Z = hankel_apply(weights, h0[:, None] * hy2)    # (n, P)
        out[:, s:s + step] = np.einsum("ai,ap->ip", hx, hy1 * Z)
    return out


class PolarOperator(DiscretizedOperator):
    """Rotation invariant kernel on a d = 2 polar product grid (single grid)."""

    def __init__(self, Kb: np.ndarray, grid: QuadratureGrid):
        n_r, n_ang = grid.meta["n_r"], grid.meta["n_ang"]
        if Kb.shape != (n_r, n_r, n_ang):
            raise ValueError("kernel block shape mismatch")
        if not np.all(np.isfinite(Kb)):
            raise FloatingPointError("non-finite kernel block")
        self.Kb, self.row, self.col = Kb, grid, grid
        self.n_r, self.n_ang = n_r, n_ang
        self.wr = grid.weights.reshape(n_r, n_ang)[:, 0]
        # Khat[i, j, m] = sum_s Kb[i, j, s] exp(+2 pi i s m / n)
        self.Khat = np.fft.ifft(Kb, axis=2) * n_ang

    @classmethod
    def from_weights(cls, spec: EigenspaceSpec, weights: np.ndarray, grid: QuadratureGrid) -> "PolarOperator":
        r = grid.meta["radii"]
        n_ang = grid.meta["n_ang"]
        th = 2 * math.pi * np.arange(n_ang) / n_ang
        Y = (r[:, None, None] * np.stack([np.cos(th), np.sin(th)], -1)[None]).reshape(-1, 2)
        K = windowed_kernel_axis(2, weights, r, Y).reshape(len(r), len(r), n_ang)
        return cls(K, grid)

    def _split(self, f):
        return f.reshape(self.n_r, self.n_ang)

    def matvec(self, f):
        F = np.fft.fft(self._split(f) * self.wr[:, None], axis=1)
        G = np.einsum("ijm,jm->im", self.Khat, F)
        return np.fft.ifft(G, axis=1).ravel()

    def rmatvec(self, g):
        # K*(j,l; i,k) = conj K(i,k; j,l) = conj Kb[i, j, l - k]
        # a convolution in the angle: sum_s conj Kb[i, j, s] (w g)[i, l - s]
        F = np.fft.fft(self._split(g) * self.wr[:, None], axis=1)
        G = np.einsum("ijm,im->jm", self.Khat.conj(), F)
        return np.fft.ifft(G, axis=1).ravel()

    def kernel_rows(self, rows):
        idx = np.arange(self.row.size)[rows]
        i, k = np.divmod(idx, self.n_ang)
        l = np.arange(self.n_ang)
        s = (l[None, :] - k[:, None]) % self.n_ang
        out = self.Kb[i[:, None, None], np.arange(self.n_r)[None, :, None], s[:, None, :]]
        return out.reshape(len(idx), -1)

    def kernel_rows_T(self, cols):
        idx = np.arange(self.col.size)[cols]
        j, l = np.divmod(idx, self.n_ang)
        k = np.arange(self.n_ang)
        s = (l[:, None] - k[None, :]) % self.n_ang
        out = self.Kb[np.arange(self.n_r)[None, :, None], j[:, None, None], s[:, None, :]]
        return out.reshape(len(idx), -1)

    def norm_22(self, *a, **k) -> float:
        sw = np.sqrt(self.wr)
        best = 0.0
        for m in range(self.n_ang):
            A = sw[:, None] * self.Khat[:, :, m] * sw[None, :]
            best = max(best, float(np.linalg.norm(A, 2)))
        return best

    def norm_1q(self, q, chunk: int = 0):
        A = np.abs(self.Kb)
        if q == INF:
            return float(A.max())
        col = np.einsum("i,ijs->j", self.wr, A ** q) ** (1 / q)
        return float(col.max())

    def norm_pinf(self, p, chunk: int = 0):
        A = np.abs(self.Kb)
        if p == 1:
            return float(A.max())
        pp = p / (p - 1)
        row = np.einsum("j,ijs->i", self.wr, A ** pp) ** (1 / pp)
        return float(row.max())


# --- estimation ------------------------------------------------------------------

@dataclass
class NormEstimate:
    p: float
    q: float
    lower: float
    upper: float
    method: str
    iterations: int = 0
    restarts: int = 0
    witness: np.ndarray | None = None
    notes: dict = field(default_factory=dict)

    def summary(self) -> dict:
        w = self.witness
        ws = None
        if w is not None:
            a = np.abs(w)
            ws = {"support": int(np.count_nonzero(a > 1e-12 * a.max())), "argmax": int(np.argmax(a))}
        return {"p": self.p, "q": self.q, "lower": self.lower, "upper": self.upper,
                "method": self.method, "iterations": self.iterations,
                "restarts": self.restarts, "witness_summary": ws}


class UnsupportedExponents(ValueError):
    pass


def exact_supported(p: float, q: float) -> bool:
    return p == 1 or q == INF or (p == 2 and q == 2)


def norm_exact(T: DiscretizedOperator, p: float, q: float) -> float:
    """Exact discretized norm for p = 1, q = inf, or p = q = 2."""
    if p == 1:
        return T.norm_1q(q)
    if q == INF:
        return T.norm_pinf(p)
    if p == 2 and q == 2:
        return T.norm_22()
    raise UnsupportedExponents(f"no exact formula for ({p}, {q}); use a bracket")


def _dual_map(g, r, w):
    """Normalized dual element: <psi, g>_w = ||g||_r with ||psi||_{r'} = 1."""
    a = np.abs(g)
    nrm = _norm(g, r, w)
    if nrm == 0:
        return np.zeros_like(g)
    ph = np.where(a > 0, g / np.where(a > 0, a, 1), 0)
    return (a / nrm) ** (r - 1) * ph


def ascent_lower(T: DiscretizedOperator, p: float, q: float, restarts: int = 8,
                 seed: int = 0, max_iter: int = 200, tol: float = 1e-12,
                 starts: list | None = None) -> NormEstimate:
    """Nonlinear power iteration for max ||Tf||_q / ||f||_p, 1 <= p <= 2 <= q < inf."""
    if q == INF:
        v = norm_exact(T, p, q)
        return NormEstimate(p, q, v, v, "exact-row")
    if not (1 <= p <= 2 <= q):
        raise ValueError("ascent requires 1 <= p <= 2 <= q")
    wc, wr = T.col.weights, T.row.weights
    rng = np.random.default_rng(seed)
    M = T.shape[1]
    cand = list(starts or [])
    # structured starts: delta at the largest diagonal entry / row norm, box around it
    try:
        dg = np.abs(T.diag()) if hasattr(T, "diag") else None
    except Exception:
        dg = None
    if dg is None:
        dg = np.abs(T.rmatvec(T.matvec(np.ones(M))))
    dg = np.where(wc > 0, dg, -np.inf)      # polar grids carry zero weight at r = 0
    i0 = int(np.argmax(dg))
    delta = np.zeros(M)
    delta[i0] = 1.0 / wc[i0]
    cand.append(delta)
    pts = T.col.points
    dist = np.linalg.norm(pts - pts[i0], axis=1)
    lam = T.col.meta.get("lam", 1.0)
    for rad in (0.5, 1.0, 2.0):
        cand.append((dist <= rad / math.sqrt(lam)).astype(float))
    cand.append(np.real(T.matvec(delta)))
    for _ in range(restarts):
        cand.append(rng.standard_normal(M))
    pp = INF if p == 1 else p / (p - 1)
    best = (-1.0, None, 0)
    total_it = 0
    for f in cand:
        f = np.asarray(f, dtype=complex)
        nf = _norm(f, p, wc)
        if nf == 0:
            continue
        f = f / nf
        val = _norm(T.matvec(f), q, wr)
        for it in range(max_iter):
            g = T.matvec(f)
            psi = _dual_map(g, q, wr)
            h = T.rmatvec(psi)
            if p == 1:
                a = np.abs(h)
                j = int(np.argmax(a))
                fn = np.zeros(M, dtype=complex)
                fn[j] = (h[j] / a[j] if a[j] > 0 else 1.0) / wc[j]
            else:
                fn = _dual_map(h, pp, wc)
                fn = fn / _norm(fn, p, wc)
            new = _norm(T.matvec(fn), q, wr)
            total_it += 1
            if new < val * (1 - 1e-9):
                break  # numerical stagnation: keep the previous iterate
            f, conv = fn, abs(new - val) <= tol * new
            val = new
            if conv:
                break
        if val > best[0] * (1 + 1e-12) or (abs(val - best[0]) <= 1e-12 * val and best[1] is not None
                                            and np.count_nonzero(np.abs(f) > 0) < np.count_nonzero(np.abs(best[1]) > 0)):
            best = (val, f, total_it)
    return NormEstimate(p, q, best[0], INF, "ascent", total_it, restarts, best[1])


def riesz_thorin_upper(T: DiscretizedOperator, p: float, q: float, n_dirs: int = 24,
                       cheap_only: bool | None = None, cache: dict | None = None) -> tuple[float, dict]:
    """Min over segments through (1/p, 1/q) with exactly computable endpoints.

    Endpoints live on {a = 1}, {b = 0} and at (1/2, 1/2).  Returns the bound
    and the chosen segment.
    """
    a, b = 1.0 / p, (0.0 if q == INF else 1.0 / q)
    cache = {} if cache is None else cache
    if cheap_only is None:
        cheap_only = not isinstance(T, (DenseOperator, PolarOperator)) and T.shape[0] * T.shape[1] > 4e8

    def val(P):
        key = (round(P[0], 12), round(P[1], 12))
        if key not in cache:
            pa, pb = P
            pp = 1 / pa
            qq = INF if pb <= 1e-15 else 1 / pb
            if abs(pa - 1) < 1e-12:
                pp = 1
            cache[key] = norm_exact(T, pp, qq)
        return cache[key]

    def allowed(P):
        if not cheap_only:
            return True
        return any(abs(P[0] - x) < 1e-12 and abs(P[1] - y) < 1e-12
                   for x, y in [(1, 0), (1, 0.5), (0.5, 0), (0.5, 0.5)])

    X = np.array([a, b])
    on_exact = abs(a - 1) < 1e-12 or b < 1e-12 or (abs(a - 0.5) < 1e-12 and abs(b - 0.5) < 1e-12)
    if on_exact and allowed((a, b)):
        v = val((a, b))
        return v, {"segment": [(a, b), (a, b)], "theta": 0.0}
    segs = []
    # ray from the centre (1/2, 1/2) through X to {a = 1} or {b = 0}
    C = np.array([0.5, 0.5])
    dvec = X - C
    ts = []
    if dvec[0] > 0:
        ts.append(0.5 / dvec[0])
    if dvec[1] < 0:
        ts.append(0.5 / -dvec[1])
    if ts:
        segs.append((C, C + min(ts) * dvec))
    # positive-slope lines: down-left to {b = 0}, up-right to {a = 1}
    for ang in np.linspace(0, math.pi / 2, n_dirs + 2)[1:-1]:
        tn = math.tan(ang)
        P0 = np.array([a - b / tn, 0.0])
        P1 = np.array([1.0, b + (1 - a) * tn])
        if P0[0] >= 0.5 - 1e-12 and P1[1] <= 0.5 + 1e-12:
            segs.append((P0, P1))
    best = (INF, None)
    for P0, P1 in segs:
        if not (allowed(tuple(P0)) and allowed(tuple(P1))):
            continue
        L = float(np.linalg.norm(P1 - P0))
        th = float(np.linalg.norm(X - P0) / L)
        v = val(tuple(P0)) ** (1 - th) * val(tuple(P1)) ** th
        if v < best[0]:
            best = (v, {"segment": [tuple(map(float, P0)), tuple(map(float, P1))], "theta": th})
    if best[1] is None:
        raise RuntimeError("no admissible interpolation segment")
    return best


def bracket(T: DiscretizedOperator, p: float, q: float, restarts: int = 8, seed: int = 0) -> NormEstimate:
    """[lower, upper] for ||T||_{p->q}; exact where a formula exists."""
    if exact_supported(p, q):
        v = norm_exact(T, p, q)
        return NormEstimate(p, q, v, v, "exact")
    low = ascent_lower(T, p, q, restarts=restarts, seed=seed)
    up, seg = riesz_thorin_upper(T, p, q)
    low.upper = up
    low.method = "ascent+riesz-thorin"
    low.notes["segment"] = seg
    if low.lower > up * (1 + 1e-9):
        raise AssertionError(f"bracket inverted: {low.lower} > {up}")
    return low


def tuple_seed(*vals) -> int:
    """Deterministic seed from a tuple (e.g. (lambda, mu, p, q))."""
    h = hashlib.sha256(repr(tuple(float(v) for v in vals)).encode()).digest()
    return int.from_bytes(h[:8], "little")


@dataclass
class WeakTypeResult:
    value: float
    F: np.ndarray
    G: np.ndarray
    evaluations: int


def restricted_weak_type(T: DiscretizedOperator, p: float, q: float, budget: int = 40) -> WeakTypeResult:
    """Greedy lower bound for sup |<T chi_F, chi_G>| / (|F|^{1/p} |G|^{1 - 1/q})."""
    wr, wc = T.row.weights, T.col.weights
    qexp = 1 - (0.0 if q == INF else 1 / q)
    pexp = 1 / p

    def best_prefix(g, w, expo):
        # choose a phase making the leading sum real, then the best superlevel prefix
        s = np.sum(w * g)
        ph = np.exp(-1j * np.angle(s)) if abs(s) > 0 else 1.0
        key = np.real(g * ph)
        order = np.argsort(-key, kind="stable")
        cs = np.cumsum((w * g)[order])
        cw = np.cumsum(w[order])
        vals = np.abs(cs) / cw ** expo
        k = int(np.argmax(vals))
        mask = np.zeros(g.size, bool)
        mask[order[: k + 1]] = True
        return mask, float(vals[k])

    F = np.ones(T.shape[1], bool)
    g = T.matvec(F.astype(float))
    G = np.ones(T.shape[0], bool)
    best = WeakTypeResult(abs(np.sum(wr * g)) / (wc.sum() ** pexp * wr.sum() ** qexp), F.copy(), G.copy(), 1)
    evals = 1
    while evals < budget:
        G, _ = best_prefix(g, wr, qexp)
        h = T.rmatvec(G.astype(float))
        evals += 1
        F, _ = best_prefix(np.conj(h), wc, pexp)
        g = T.matvec(F.astype(float))
        evals += 1
        val = abs(np.sum(wr[G] * g[G])) / (wc[F].sum() ** pexp * wr[G].sum() ** qexp)
        if val > best.value * (1 + 1e-12):
            best = WeakTypeResult(val, F.copy(), G.copy(), evals)
        elif evals > 4:
            # local swap: drop the weakest member of F
            if F.sum() > 1:
                a = np.abs(h) * F
                a[~F] = np.inf
                F2 = F.copy()
                F2[int(np.argmin(a))] = False
                g2 = T.matvec(F2.astype(float))
                evals += 1
                v2 = abs(np.sum(wr[G] * g2[G])) / (wc[F2].sum() ** pexp * wr[G].sum() ** qexp)
                if v2 > best.value * (1 + 1e-12):
                    best = WeakTypeResult(v2, F2.copy(), G.copy(), evals)
                    g = g2
                else:
                    break
    best.evaluations = evals
    return best
