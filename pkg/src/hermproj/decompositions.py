"""Time partitions, Whitney cap pairs on the sphere and certified cube covers.

Windows.  A smooth step S_h(u) that is exactly 0 for u <= -h, exactly 1 for
u >= h and satisfies S_h(u) + S_h(-u) = 1 gives

    eta_circ(t) = S_h(t + pi/2) - S_h(t - pi/2),

whose pi-translates telescope to 1.  With sigma = 1 on (0, T0] and 0 beyond 2,
psi(t) = sigma(t) - sigma(2t) makes sum_j psi(2^j t) = sigma(t) exact.
The step is an erf profile clipped at +-h (the clipped mass is ~1e-17), so
eta_hat decays like a Gaussian and the spectral weights truncate early.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import erf

from .kernels import WindowProfile, discriminant, sum_windows

EDGE = 2.0 ** -7
ERF_SHARPNESS = 5.9          # h / s; 0.5 * erfc(5.9) ~ 1e-17
T0 = math.pi / 2 + EDGE      # psi partition must hold on (0, T0]


def smooth_step(u, h: float):
    """0 for u <= -h, 1 for u >= h, erf-shaped in between; S(u) + S(-u) = 1."""
    u = np.asarray(u, dtype=float)
    s = h / ERF_SHARPNESS
    out = 0.5 * (1 + erf(np.clip(u, -h, h) / s))
    out = np.where(u <= -h, 0.0, np.where(u >= h, 1.0, out))
    return out


@dataclass(frozen=True)
class SmoothPartition:
    edge_halfwidth: float
    sigma_center: float
    sigma_halfwidth: float

    def eta_circ(self, t):
        h = self.edge_halfwidth
        t = np.asarray(t, dtype=float)
        return smooth_step(t + math.pi / 2, h) - smooth_step(t - math.pi / 2, h)

    def sigma(self, t):
        t = np.asarray(t, dtype=float)
        return 1.0 - smooth_step(t - self.sigma_center, self.sigma_halfwidth)

    def psi(self, t):
        t = np.asarray(t, dtype=float)
        return self.sigma(t) - self.sigma(2 * t)

    def psi_j_func(self, j: int) -> Callable:
        def f(t):
            t = np.asarray(t, dtype=float)
            return self.psi(2.0 ** j * t) * self.eta_circ(t)
        return f

    def _edge_transitions(self):
        h = self.edge_halfwidth
        s = h / ERF_SHARPNESS
        return [(-math.pi / 2 - h, -math.pi / 2 + h, s), (math.pi / 2 - h, math.pi / 2 + h, s)]

    def _sigma_transitions(self, scale: float):
        c, h = self.sigma_center, self.sigma_halfwidth
        s = h / ERF_SHARPNESS
        return [((c - h) * scale, (c + h) * scale, s * scale)]

    def psi_j(self, j: int) -> WindowProfile:
        """psi_j(t) = psi(2^j t) eta_circ(t) as a window profile."""
        if j < 0:
            raise ValueError("j must be >= 0")
        lo = 2.0 ** -j * (self.sigma_center - self.sigma_halfwidth) / 2
        hi = min(2.0 ** (1 - j), math.pi / 2 + self.edge_halfwidth)
        tr = self._sigma_transitions(2.0 ** -j) + self._sigma_transitions(2.0 ** -(j + 1))
        if j == 0:
            tr += self._edge_transitions()[1:]
        tr = [(a, b, s) for a, b, s in tr if b > lo and a < hi]
        return WindowProfile(self.psi_j_func(j), (lo, hi), j=j, transitions=tuple(tr),
                             label=f"psi_{j}")

    def psi_j_kappa(self, j: int, kappa: str) -> WindowProfile:
        base = self.psi_j(j)
        return base if kappa == "none" else base.reflect(kappa)

    def eta_circ_profile(self) -> WindowProfile:
        h = self.edge_halfwidth
        return WindowProfile(self.eta_circ, (-math.pi / 2 - h, math.pi / 2 + h), j=0,
                             transitions=tuple(self._edge_transitions()), label="eta_circ")

    def family(self, j_max: int, kappa: str = "none") -> WindowProfile:
        """sum_{j=0}^{j_max} psi_j^kappa as one window."""
        return sum_windows([self.psi_j_kappa(j, kappa) for j in range(j_max + 1)],
                           label=f"sum psi_j^{kappa} (j<={j_max})")

    def family_tail(self, j_min: int, kappa: str = "none") -> WindowProfile:
        """sum_{j >= j_min} psi_j^kappa = sigma(2^{j_min} t) eta_circ(t) on t > 0."""
        def f(t):
            t = np.asarray(t, dtype=float)
            return np.where(t > 0, self.sigma(2.0 ** j_min * t), 0.0) * self.eta_circ(t)
        hi = min(2.0 ** (1 - j_min), math.pi / 2 + self.edge_halfwidth)
        w = WindowProfile(f, (0.0, hi), j=j_min, label=f"tail psi_j (j>={j_min})")
        return w if kappa == "none" else w.reflect(kappa)


@lru_cache(maxsize=1)
def build_partition() -> SmoothPartition:
    """The concrete partition used throughout the package."""
    h = EDGE * (1 - 1e-3)    # keeps supp eta_circ strictly inside (-pi/2 - 2^-7, pi/2 + 2^-7)
    c = 0.5 * (T0 + 2.0)
    return SmoothPartition(edge_halfwidth=h, sigma_center=c, sigma_halfwidth=0.5 * (2.0 - T0))


def finite_difference_bounds(w: WindowProfile, lmax: int = 3, n: int = 20001) -> list[float]:
    """max |eta^{(l)}| 2^{-jl} for l = 0..lmax from sampled finite differences."""
    lo, hi = w.support
    t = np.linspace(lo, hi, n)
    dt = t[1] - t[0]
    f = w(t)
    out = []
    for l in range(lmax + 1):
        out.append(float(np.max(np.abs(f))) * 2.0 ** (-w.j * l))
        f = np.gradient(f, dt)
    return out


# --- Whitney caps --------------------------------------------------------------

# d = 3 cells live on the six faces of the cube, in equiangular coordinates
# (a, b) in [-pi/4, pi/4]^2: the point is normalize(axis + tan(a) e_u + tan(b) e_v)
_FACES = [(np.array(ax, float), np.array(u, float), np.array(v, float)) for ax, u, v in [
    ((1, 0, 0), (0, 1, 0), (0, 0, 1)), ((-1, 0, 0), (0, -1, 0), (0, 0, 1)),
    ((0, 1, 0), (-1, 0, 0), (0, 0, 1)), ((0, -1, 0), (1, 0, 0), (0, 0, 1)),
    ((0, 0, 1), (0, 1, 0), (-1, 0, 0)), ((0, 0, -1), (0, 1, 0), (1, 0, 0))]]
_Q = math.pi / 4


def _face_point(face: int, a, b) -> np.ndarray:
    ax, u, v = _FACES[face]
    a, b = np.asarray(a, float), np.asarray(b, float)
    p = ax + np.tan(a)[..., None] * u + np.tan(b)[..., None] * v
    return p / np.linalg.norm(p, axis=-1, keepdims=True)


def _face_coords(omega: np.ndarray):
    """(face, a, b) for unit vectors omega (N, 3)."""
    k = np.argmax(np.abs(omega), axis=1)
    sgn = np.sign(omega[np.arange(len(omega)), k])
    face = 2 * k + (sgn < 0)
    face = np.where(k == 2, 4 + (sgn < 0), face)
    U = np.stack([_FACES[f][1] for f in range(6)])
    V = np.stack([_FACES[f][2] for f in range(6)])
    AX = np.stack([_FACES[f][0] for f in range(6)])
    den = np.sum(omega * AX[face], 1)
    a = np.arctan(np.sum(omega * U[face], 1) / den)
    b = np.arctan(np.sum(omega * V[face], 1) / den)
    return face, a, b


@dataclass(frozen=True)
class SphericalCap:
    """A cell of a nested equal-angle partition of S^{d-1}.

    d = 2: an arc [theta0, theta1).  d = 3: a cube-sphere cell
    (face, a0, a1, b0, b1) in equiangular face coordinates.
    """

    level: int
    index: tuple
    bounds: tuple

    @property
    def d(self) -> int:
        return 2 if len(self.bounds) == 2 else 3

    def center(self) -> np.ndarray:
        if self.d == 2:
            th = 0.5 * (self.bounds[0] + self.bounds[1])
            return np.array([math.cos(th), math.sin(th)])
        f, a0, a1, b0, b1 = self.bounds
        return _face_point(f, 0.5 * (a0 + a1), 0.5 * (b0 + b1))

    def contains(self, omega) -> np.ndarray:
        omega = np.atleast_2d(np.asarray(omega, float))
        if self.d == 2:
            th = np.mod(np.arctan2(omega[:, 1], omega[:, 0]), 2 * math.pi)
            return (th >= self.bounds[0]) & (th < self.bounds[1])
        f, a0, a1, b0, b1 = self.bounds
        face, a, b = _face_coords(omega / np.linalg.norm(omega, axis=1, keepdims=True))
        # half-open cells; the far edge of a face is closed
        in_a = (a >= a0) & ((a < a1) | (a1 >= _Q))
        in_b = (b >= b0) & ((b < b1) | (b1 >= _Q))
        return (face == f) & in_a & in_b

    def radius(self) -> float:
        """Angular radius about the center (max over boundary samples)."""
        return float(np.max(np.arccos(np.clip(self.boundary(16) @ self.center(), -1, 1))))

    def diameter(self, n: int = 16) -> float:
        s = self.boundary(n)
        return float(np.arccos(np.clip(s @ s.T, -1, 1)).max())

    def boundary(self, n: int = 8) -> np.ndarray:
        """Points on the cell boundary (n per edge)."""
        if self.d == 2:
            return self.sample(2)
        f, a0, a1, b0, b1 = self.bounds
        t = np.linspace(0, 1, n, endpoint=False)
        a = np.concatenate([a0 + (a1 - a0) * t, np.full(n, a1), a1 - (a1 - a0) * t, np.full(n, a0)])
        b = np.concatenate([np.full(n, b0), b0 + (b1 - b0) * t, np.full(n, b1), b1 - (b1 - b0) * t])
        return _face_point(f, a, b)

    def sample(self, n: int) -> np.ndarray:
        if self.d == 2:
            th = np.linspace(self.bounds[0], self.bounds[1], n)
            return np.stack([np.cos(th), np.sin(th)], 1)
        f, a0, a1, b0, b1 = self.bounds
        k = max(2, int(math.sqrt(n)))
        a, b = np.meshgrid(np.linspace(a0, a1, k), np.linspace(b0, b1, k))
        return _face_point(f, a.ravel(), b.ravel())

    def children(self) -> list["SphericalCap"]:
        nu = self.level + 1
        if self.d == 2:
            t0, t1 = self.bounds
            m = 0.5 * (t0 + t1)
            k = self.index[0]
            return [SphericalCap(nu, (2 * k,), (t0, m)), SphericalCap(nu, (2 * k + 1,), (m, t1))]
        f, a0, a1, b0, b1 = self.bounds
        _, i, j = self.index
        am, bm = 0.5 * (a0 + a1), 0.5 * (b0 + b1)
        out = []
        for di, (x0, x1) in enumerate(((a0, am), (am, a1))):
            for dj, (y0, y1) in enumerate(((b0, bm), (bm, b1))):
                out.append(SphericalCap(nu, (f, 2 * i + di, 2 * j + dj), (f, x0, x1, y0, y1)))
        return out


BASE_ARCS = 8  # level-0 cells for d = 2; d = 3 starts from 2 x 2 cells per cube face


def caps_at_level(d: int, nu: int) -> list[SphericalCap]:
    """Nested equal-angle cells of diameter ~ 2^{-nu}."""
    if d == 2:
        m = BASE_ARCS * 2 ** nu
        step = 2 * math.pi / m
        return [SphericalCap(nu, (k,), (k * step, (k + 1) * step)) for k in range(m)]
    if d == 3:
        m = 2 ** (nu + 1)  # cell width pi / 2^{nu+2}
        e = np.linspace(-_Q, _Q, m + 1)
        return [SphericalCap(nu, (f, i, j), (f, e[i], e[i + 1], e[j], e[j + 1]))
                for f in range(6) for i in range(m) for j in range(m)]
    raise ValueError("caps implemented for d in {2, 3}")


def cap_distance(c1: SphericalCap, c2: SphericalCap, n: int = 8) -> float:
    """Geodesic distance between two cells (exact for arcs, boundary samples for d = 3)."""
    if c1.d == 2:
        a0, a1 = c1.bounds
        b0, b1 = c2.bounds
        best = math.inf
        for shift in (-2 * math.pi, 0.0, 2 * math.pi):
            best = min(best, max(0.0, max(a0, b0 + shift) - min(a1, b1 + shift)))
        return best
    s1, s2 = c1.boundary(n), c2.boundary(n)
    return float(np.arccos(np.clip(s1 @ s2.T, -1, 1)).min())


def _adjacent_many(pairs: list[tuple[SphericalCap, SphericalCap]], nu: int) -> np.ndarray:
    """Closures touch.  Non-touching cells at level nu are at least ~ one cell apart."""
    if not pairs:
        return np.zeros(0, bool)
    if pairs[0][0].d == 2:
        return np.array([cap_distance(a, b) <= 1e-12 for a, b in pairs])
    thr = 0.25 * (math.pi / 4) / 2 ** nu
    out = np.empty(len(pairs), bool)
    chunk = 4096
    for s in range(0, len(pairs), chunk):
        blk = pairs[s:s + chunk]
        A = np.stack([a.boundary(4) for a, _ in blk])
        B = np.stack([b.boundary(4) for _, b in blk])
        cos = np.einsum("pid,pjd->pij", A, B).max(axis=(1, 2))
        out[s:s + chunk] = np.arccos(np.clip(cos, -1, 1)) < thr
    return out


@dataclass
class CapPair:
    level: int
    k: SphericalCap
    kp: SphericalCap
    kind: str  # "related" or "base"


def nu_circ(mu: float, C: float = 8.0) -> int:
    """Base level: mu/2 < C 2^{-nu_circ} <= mu."""
    return int(math.ceil(math.log2(C / mu)))


def _check_dyadic(mu: float):
    k = -math.log2(mu)
    if abs(k - round(k)) > 1e-12 or mu <= 0 or mu > 1:
        raise ValueError(f"mu={mu} is not dyadic")


def whitney_pairs(d: int, mu: float, C: float = 8.0, nu_min: int = 0,
                  anchor: np.ndarray | None = None) -> list[CapPair]:
    """Whitney-type pairs partitioning S^{d-1} x S^{d-1}.

    Start from all pairs of cells at level nu_min.  Non-touching pairs are
    kept as 'related'; touching pairs are split into their children pairs
    and examined at the next level.  At nu_circ the touching pairs that
    remain are kept as 'base'.  With ``anchor`` only pairs whose first cell
    contains that direction are generated (a slice of the product).
    """
    _check_dyadic(mu)
    top = max(nu_min, nu_circ(mu, C))
    caps = caps_at_level(d, nu_min)
    first = caps if anchor is None else [a for a in caps if a.contains(anchor)[0]]
    cand = [(a, b) for a in first for b in caps]
    out: list[CapPair] = []
    for nu in range(nu_min, top + 1):
        adj = _adjacent_many(cand, nu)
        for (a, b), touch in zip(cand, adj):
            if not touch:
                out.append(CapPair(nu, a, b, "related"))
            elif nu == top:
                out.append(CapPair(nu, a, b, "base"))
        if nu < top:
            cand = [(ca, cb) for (a, b), touch in zip(cand, adj) if touch
                    for ca in a.children() if anchor is None or ca.contains(anchor)[0]
                    for cb in b.children()]
    return out


def pair_multiplicity(pairs: list[CapPair], omega: np.ndarray, omega2: np.ndarray) -> np.ndarray:
    """Number of pairs whose product cell contains (omega_i, omega2_i)."""
    cnt = np.zeros(len(omega), int)
    for p in pairs:
        cnt += p.k.contains(omega) & p.kp.contains(omega2)
    return cnt


def sector_indicator(cap: SphericalCap, mu: float, scale: float = 1.0) -> Callable:
    """Membership in A_k = {x in A_mu : x/|x| in cap} (A_mu scaled by ``scale``)."""
    def member(x):
        x = np.atleast_2d(np.asarray(x, float)) / scale
        r = np.linalg.norm(x, axis=1)
        shell = (1 - r >= mu / 2) & (1 - r <= mu)
        om = x / np.where(r > 0, r, 1)[:, None]
        return shell & cap.contains(om)
    return member


def annulus_indicator(mu: float, scale: float = 1.0) -> Callable:
    def member(x):
        r = np.linalg.norm(np.atleast_2d(np.asarray(x, float)), axis=1) / scale
        return (1 - r >= mu / 2) & (1 - r <= mu)
    return member


# --- cube covers -----------------------------------------------------------------

@dataclass
class CubePair:
    lo_x: np.ndarray
    lo_y: np.ndarray
    side: float
    label: str  # "large", "small"
    D_center: float


@dataclass
class CubeCover:
    mu: float
    eps0: float
    c: float
    pairs: list = field(default_factory=list)
    dropped: int = 0
    dropped_measure: float = 0.0
    stats: dict = field(default_factory=dict)


def _cubes_for_sector(cap: SphericalCap, mu: float, side: float, d: int, n_probe: int = 3):
    """Axis-aligned cubes of the given side meeting the sector A_k."""
    # bounding box of the sector from boundary samples
    pts = np.concatenate([cap.sample(256) * (1 - mu), cap.sample(256) * (1 - mu / 2)])
    lo = np.floor(pts.min(0) / side) * side
    hi = np.ceil(pts.max(0) / side) * side
    axes = [np.arange(lo[i], hi[i] - 1e-15, side) for i in range(d)]
    corners = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
    member = sector_indicator(cap, mu)
    u = (np.arange(n_probe) + 0.5) / n_probe
    probe = np.stack(np.meshgrid(*([u] * d), indexing="ij"), -1).reshape(-1, d) * side
    keep = [c for c in corners if member(c + probe).any()]
    return keep


def _lattice(d: int) -> np.ndarray:
    u = np.array([0.0, 0.5, 1.0])
    return np.stack(np.meshgrid(*([u] * d), indexing="ij"), -1).reshape(-1, d)


HESS_D_BOUND = 16.0  # ||Hess_{(x,y)} D|| on the unit ball, generous


def _classify_batch(lo_x, lo_y, side, eps0, mu, band):
    """Vectorized certificates for cube pairs (P, d) x (P, d) of a common side."""
    d = lo_x.shape[1]
    lat = _lattice(d) * side
    X = lo_x[:, None, :] + lat[None]             # (P, L, d)
    Y = lo_y[:, None, :] + lat[None]
    xy = np.einsum("pid,pjd->pij", X, Y)
    nx = np.sum(X * X, -1)
    ny = np.sum(Y * Y, -1)
    Dv = 1 + xy ** 2 - nx[:, :, None] - ny[:, None, :]
    # |grad D|^2 = 4 |xy y - x|^2 + 4 |xy x - y|^2
    g2 = 4 * (xy ** 2 * ny[:, None, :] - 2 * xy * xy + nx[:, :, None]) \
        + 4 * (xy ** 2 * nx[:, :, None] - 2 * xy * xy + ny[:, None, :])
    delta = math.sqrt(2 * d) * side / 4
    slack = np.sqrt(np.maximum(g2, 0.0)) * delta + 0.5 * HESS_D_BOUND * delta * delta
    thr = eps0 * mu * mu
    aD = np.abs(Dv)
    large = np.all((aD - slack >= thr / band).reshape(len(lo_x), -1), axis=1)
    small = np.all((aD + slack <= thr * band).reshape(len(lo_x), -1), axis=1)
    L = lat.shape[0]
    return large, small, Dv[:, L // 2, L // 2]


def classify_cube_pair(lo_x, lo_y, side, eps0, mu, band: float = 2.0):
    """Certify |D| >~ eps0 mu^2 ('large') or |D| << eps0 mu^2 ('small') on Q x Q'.

    D is sampled on a 3^d lattice of each cube (corners, edge midpoints and
    center).  Every point of Q x Q' is within delta = sqrt(2d) side / 4 of a
    lattice pair, so |D - D(node)| <= |grad D(node)| delta + HESS delta^2 / 2.
    Returns 'mixed' when neither certificate holds.
    """
    lg, sm, dc = _classify_batch(np.atleast_2d(lo_x), np.atleast_2d(lo_y), side, eps0, mu, band)
    label = "large" if lg[0] else "small" if sm[0] else "mixed"
    return label, float(dc[0])


def cube_cover(pair: CapPair, mu: float, eps0: float = 2.0 ** -6, c: float = 2.0 ** -4,
               max_depth: int = 3, band: float = 2.0, chunk: int = 4096,
               focus: str | None = None) -> CubeCover:
    """Cubes of side c eps0 mu over the two sectors, each pair classified by D.

    Mixed pairs are split into 2^d x 2^d children, at most ``max_depth``
    times and never below side mu / 64; what is left is dropped and its
    measure recorded.  focus='small' only splits mixed pairs whose center
    value already lies in the small band (the rest are dropped).
    """
    d = pair.k.center().size
    side = c * eps0 * mu
    A = np.array(_cubes_for_sector(pair.k, mu, side, d)).reshape(-1, d)
    B = np.array(_cubes_for_sector(pair.kp, mu, side, d)).reshape(-1, d)
    cover = CubeCover(mu, eps0, c)
    counts = {"large": 0, "small": 0, "mixed_split": 0}
    qx = np.repeat(A, len(B), axis=0)
    qy = np.tile(B, (len(A), 1))
    s, depth = side, 0
    while len(qx):
        mixed = np.zeros(len(qx), bool)
        for k in range(0, len(qx), chunk):
            lg, sm, dc = _classify_batch(qx[k:k + chunk], qy[k:k + chunk], s, eps0, mu, band)
            for i in np.nonzero(lg | sm)[0]:
                lab = "large" if lg[i] else "small"
                cover.pairs.append(CubePair(qx[k + i], qy[k + i], s, lab, float(dc[i])))
                counts[lab] += 1
            mix = ~(lg | sm)
            if focus == "small":
                dropped = mix & (np.abs(dc) > band * eps0 * mu * mu)
                cover.dropped += int(dropped.sum())
                cover.dropped_measure += float(dropped.sum()) * s ** (2 * d)
                mix &= ~dropped
            mixed[k:k + chunk] = mix
        mx, my = qx[mixed], qy[mixed]
        if depth >= max_depth or s / 2 < mu / 64:
            cover.dropped += len(mx)
            cover.dropped_measure += len(mx) * s ** (2 * d)
            break
        counts["mixed_split"] += len(mx)
        h = s / 2
        offs = np.stack(np.meshgrid(*([np.array([0.0, h])] * d), indexing="ij"), -1).reshape(-1, d)
        n_o = len(offs)
        # children pairs: every x-child against every y-child
        qx = np.repeat(mx[:, None, :] + offs[None], n_o, axis=1).reshape(-1, d)
        qy = np.tile(my[:, None, :] + offs[None], (1, n_o, 1)).reshape(-1, d)
        s, depth = h, depth + 1
    cover.stats = counts | {"dropped": cover.dropped, "cubes_x": len(A), "cubes_y": len(B)}
    return cover


def _center_D(qx, qy, s):
    cx, cy = qx + s / 2, qy + s / 2
    return discriminant(cx, cy)


def _small_cube_pairs(A, B, side, eps0, mu, band, max_depth, need, chunk=2048):
    """Stream certified D-small cube pairs from A x B, stopping after ``need``.

    Only pairs whose center value already sits in the small band are
    classified or split; work proceeds depth first in blocks of ``chunk``
    so memory stays bounded.
    """
    d = A.shape[1]
    thr = eps0 * mu * mu
    out = []
    offs = np.stack(np.meshgrid(*([np.array([0.0, 1.0])] * d), indexing="ij"), -1).reshape(-1, d)
    n_o = len(offs)

    def visit(qx, qy, s, depth):
        keep = np.abs(_center_D(qx, qy, s)) <= band * thr
        qx, qy = qx[keep], qy[keep]
        for k in range(0, len(qx), chunk):
            bx, by = qx[k:k + chunk], qy[k:k + chunk]
            _, sm, dc = _classify_batch(bx, by, s, eps0, mu, band)
            out.extend(CubePair(bx[i], by[i], s, "small", float(dc[i])) for i in np.nonzero(sm)[0])
            if len(out) >= need:
                return True
            mx, my = bx[~sm], by[~sm]
            if depth < max_depth and len(mx):
                h = s / 2
                step = max(1, chunk // (n_o * n_o))
                for i in range(0, len(mx), step):
                    cx = np.repeat(mx[i:i + step, None, :] + h * offs[None], n_o, axis=1).reshape(-1, d)
                    cy = np.tile(my[i:i + step, None, :] + h * offs[None], (1, n_o, 1)).reshape(-1, d)
                    if visit(cx, cy, h, depth + 1):
                        return True
        return False

    ia, ib = np.meshgrid(np.arange(len(A)), np.arange(len(B)), indexing="ij")
    ia, ib = ia.ravel(), ib.ravel()
    for k in range(0, len(ia), 16 * chunk):
        if visit(A[ia[k:k + 16 * chunk]], B[ib[k:k + 16 * chunk]], side, 0):
            break
    return out


def d_small_samples(d: int, mu: float, n: int = 1000, eps0: float = 0.25, c: float = 0.5,
                    seed: int = 0, anchor: np.ndarray | None = None, max_depth: int = 2,
                    per_cube: int = 8):
    """Point pairs (x, y) in A_mu x A_mu drawn from certified D-small cube pairs.

    Related Whitney pairs whose cell centers are at angle ~ mu carry the
    D-small region (|D| ~ ((1 - |x|^2)(1 - |y|^2) - sin^2 angle)); their
    cube pairs are searched in order until n admissible samples are found.
    """
    rng = np.random.default_rng(seed)
    if anchor is None:
        anchor = np.ones(d) / math.sqrt(d) + 1e-3 * np.arange(d)
        anchor /= np.linalg.norm(anchor)
    pairs = whitney_pairs(d, mu, C=1.0, anchor=anchor)
    near = []
    for pr in pairs:
        ang = math.acos(float(np.clip(pr.k.center() @ pr.kp.center(), -1, 1)))
        if pr.kind == "related" and 0.5 * mu < ang < 3 * mu:
            near.append((abs(ang - 1.5 * mu), pr))
    near.sort(key=lambda t: t[0])
    X, Y = [], []
    shell = annulus_indicator(mu)
    thr = eps0 * mu * mu
    used = 0
    side = c * eps0 * mu

    def draw(found, rounds):
        for _ in range(rounds):
            for i in rng.permutation(len(found)):
                pr, q = found[i]
                x = q.lo_x + rng.random((per_cube, d)) * q.side
                y = q.lo_y + rng.random((per_cube, d)) * q.side
                ok = shell(x) & shell(y) & pr.k.contains(x) & pr.kp.contains(y)
                ok &= np.abs(discriminant(x, y)) <= 2 * thr
                X.extend(x[ok])
                Y.extend(y[ok])
                if len(X) >= n:
                    return

    found = []
    for _, pr in near:
        A = np.array(_cubes_for_sector(pr.k, mu, side, d)).reshape(-1, d)
        B = np.array(_cubes_for_sector(pr.kp, mu, side, d)).reshape(-1, d)
        new = [(pr, q) for q in _small_cube_pairs(A, B, side, eps0, mu, 2.0, max_depth,
                                                  4 * (n - len(X)) // per_cube + 1)]
        used += 1
        draw(new, 1)
        found.extend(new)
        if len(X) >= n:
            break
    # certified pairs are revisited with fresh points until n samples exist
    if found and len(X) < n:
        draw(found, 64)
    return np.array(X[:n]).reshape(-1, d), np.array(Y[:n]).reshape(-1, d), used
