"""Exponent geometry on the square of reciprocal exponents.

Points X = (a, b) = (1/p, 1/q) live in the square [1/2, 1] x [0, 1/2].
The predicted lambda-exponent ``beta`` and mu-exponent ``gamma`` are
piecewise affine over a partition of the square into the regions
R1, R2, R2', R3 (plus the two excluded segments [C, D], [C', D']).

Exact rational arithmetic is used whenever the inputs are ``int`` or
``Fraction``; float inputs go through signed half-plane tests with a
1e-12 tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence

FLOAT_TOL = 1e-12

NAMES = ("A", "C", "D", "E", "F", "G")
BETA_LABELS = ("R1", "R2", "R2'", "R3", "SegCD", "SegC'D'")


class OutsideSquareError(ValueError):
    pass


def _as_num(v):
    if isinstance(v, (Fraction, int)):
        return Fraction(v)
    if isinstance(v, Rational):
        return Fraction(v.numerator, v.denominator)
    return float(v)


@dataclass(frozen=True)
class PqPoint:
    """A point (1/p, 1/q) of the square."""

    a: Fraction | float
    b: Fraction | float

    def __post_init__(self):
        a, b = _as_num(self.a), _as_num(self.b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        tol = 0 if self.exact else FLOAT_TOL
        if not (0.5 - tol <= a <= 1 + tol and -tol <= b <= 0.5 + tol):
            raise OutsideSquareError(f"({a}, {b}) is not in [1/2,1]x[0,1/2]")

    @property
    def exact(self) -> bool:
        return isinstance(self.a, Fraction) and isinstance(self.b, Fraction)

    @classmethod
    def from_pq(cls, p: float, q: float) -> "PqPoint":
        """Build from exponents; ``p`` or ``q`` may be ``inf``."""
        def inv(x):
            if x == float("inf"):
                return Fraction(0)
            if isinstance(x, (int, Fraction)):
                return Fraction(1) / Fraction(x)
            return 1.0 / x
        return cls(inv(p), inv(q))

    @property
    def p(self) -> float:
        return float("inf") if self.a == 0 else 1.0 / float(self.a)

    @property
    def q(self) -> float:
        return float("inf") if self.b == 0 else 1.0 / float(self.b)

    def as_float(self) -> tuple[float, float]:
        return float(self.a), float(self.b)


def _coerce(X) -> PqPoint:
    if isinstance(X, PqPoint):
        return X
    a, b = X
    return PqPoint(a, b)


def delta(X) -> Fraction | float:
    """delta(p, q) = 1/p - 1/q."""
    X = _coerce(X)
    return X.a - X.b


def dual(X) -> PqPoint:
    """X' = (1 - b, 1 - a)."""
    X = _coerce(X)
    return PqPoint(1 - X.b, 1 - X.a)


def named_point(name: str, d: int) -> PqPoint:
    """Coordinates of the named vertices A, C, D, E, F, G and their duals."""
    if d < 2:
        raise ValueError("d must be >= 2")
    primed = name.endswith("'")
    base = name.rstrip("'")
    F_ = Fraction
    if base == "A":
        X = PqPoint(F_(d + 3, 2 * (d + 1)), F_(1, 2))
    elif base == "C":
        X = PqPoint(F_(d * d + 4 * d - 1, 2 * d * (d + 1)), F_(d - 1, 2 * d))
    elif base == "D":
        X = PqPoint(F_(1), F_(d - 1, 2 * d))
    elif base == "E":
        X = PqPoint(F_(d + 2, 2 * d), F_(1, 2))
    elif base == "F":
        X = PqPoint(F_(d * d + 2 * d - 4, 2 * d * (d - 1)), F_(d - 2, 2 * (d - 1)))
    elif base == "G":
        X = PqPoint(F_(2 * d * d + 7 * d - 7, 2 * (2 * d - 1) * (d + 1)),
                    F_(2 * d - 3, 2 * (2 * d - 1)))
    else:
        raise ValueError(f"unknown point {name!r}")
    return dual(X) if primed else X


# --- convex geometry -------------------------------------------------------

def _cross(o, p, q):
    return (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0])


def _tol(pt) -> float:
    return 0 if all(isinstance(v, Fraction) for v in pt) else FLOAT_TOL


def _hull(points: Sequence[tuple]) -> list[tuple]:
    """Counter-clockwise convex hull (monotone chain), duplicates removed."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts
    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def in_hull(pt: tuple, vertices: Sequence[tuple]) -> bool:
    """Closed convex-hull membership."""
    tol = _tol(pt)
    hull = _hull([tuple(v) for v in vertices])
    if len(hull) == 1:
        return abs(pt[0] - hull[0][0]) <= tol and abs(pt[1] - hull[0][1]) <= tol
    if len(hull) == 2:
        return on_segment(pt, hull[0], hull[1])
    n = len(hull)
    for i in range(n):
        if _cross(hull[i], hull[(i + 1) % n], pt) < -tol:
            return False
    return True


def on_segment(pt: tuple, p0: tuple, p1: tuple) -> bool:
    tol = _tol(pt)
    if abs(_cross(p0, p1, pt)) > tol:
        return False
    lo_x, hi_x = min(p0[0], p1[0]), max(p0[0], p1[0])
    lo_y, hi_y = min(p0[1], p1[1]), max(p0[1], p1[1])
    return lo_x - tol <= pt[0] <= hi_x + tol and lo_y - tol <= pt[1] <= hi_y + tol


def _xy(X: PqPoint) -> tuple:
    return (X.a, X.b)


def _pt(name, d):
    return _xy(named_point(name, d))


def _match(pt, ref):
    """Bring exact reference vertices to float when the query is float."""
    if _tol(pt):
        return [(float(x), float(y)) for x, y in ref]
    return ref


def beta_regions(d: int) -> dict[str, list[tuple]]:
    half = Fraction(1, 2)
    A, C, D = _pt("A", d), _pt("C", d), _pt("D", d)
    Ap, Cp, Dp = _pt("A'", d), _pt("C'", d), _pt("D'", d)
    return {
        "R1": [(half, half), A, C, Cp, Ap],
        "R2": [A, (Fraction(1), half), D, C],
        "R2'": [Ap, (half, Fraction(0)), Dp, Cp],
        "R3": [C, D, (Fraction(1), Fraction(0)), Dp, Cp],
    }


def classify(X, d: int) -> str:
    """Label of the beta-partition containing X.

    Points on [C, D] and [C', D'] get the segment labels; other shared
    boundary points go to the first region in the order R1, R2, R2', R3.
    """
    X = _coerce(X)
    pt = _xy(X)
    C, D = _match(pt, [_pt("C", d), _pt("D", d)])
    Cp, Dp = _match(pt, [_pt("C'", d), _pt("D'", d)])
    if on_segment(pt, C, D):
        return "SegCD"
    if on_segment(pt, Cp, Dp):
        return "SegC'D'"
    for label, verts in beta_regions(d).items():
        if in_hull(pt, _match(pt, verts)):
            return label
    return "Outside"


def _beta_branch(label: str, X: PqPoint, d: int):
    a, b = X.a, X.b
    dl = a - b
    if label == "R1":
        return -dl / 2
    if label == "R2":
        return Fraction(d, 2) * (a + b) - Fraction(d + 1, 2) if X.exact else d / 2 * (a + b) - (d + 1) / 2
    if label == "R2'":
        return Fraction(d - 1, 2) - Fraction(d, 2) * (a + b) if X.exact else (d - 1) / 2 - d / 2 * (a + b)
    return Fraction(d, 2) * dl - 1 if X.exact else d / 2 * dl - 1


def beta_max_form(X, d: int):
    """Four-term max formula for beta."""
    X = _coerce(X)
    a, b = X.a, X.b
    dl = a - b
    h = Fraction(d, 2) if X.exact else d / 2
    return max(-dl / 2, -1 + h * dl, -(h + Fraction(1, 2)) + h * (a + b),
               (h - Fraction(1, 2)) - h * (a + b))


def beta(X, d: int, check: bool = True):
    """Predicted lambda-exponent.  Branch form, cross-checked against the max form."""
    X = _coerce(X)
    val = _beta_branch(classify(X, d), X, d)
    if check:
        alt = beta_max_form(X, d)
        if abs(val - alt) > (0 if X.exact else 1e-9):
            raise AssertionError(f"beta branch/max mismatch at {X}: {val} vs {alt}")
    return val


def gamma(X, d: int):
    """Predicted mu-exponent."""
    X = _coerce(X)
    a, b = X.a, X.b
    dl = a - b
    F_ = Fraction if X.exact else (lambda n, m=1: n / m)
    label = classify(X, d)
    if label == "R1":
        return F_(1, 2) - F_(d + 3, 4) * dl
    if label == "R2":
        return d * (a / 2 + b) - F_(3 * d + 1, 4)
    if label == "R2'":
        return F_(3 * d - 1, 4) - d * (a + b / 2)
    return F_(d, 2) * dl - 1


def classify_near_sphere(X, d: int) -> str:
    """Label among L1, L2, L2', L3 (ranges where the annulus bound is known)."""
    X = _coerce(X)
    pt = _xy(X)
    half = Fraction(1, 2)
    A, D, G = _pt("A", d), _pt("D", d), _pt("G", d)
    Ap, Dp, Gp = _pt("A'", d), _pt("D'", d), _pt("G'", d)

    def is_vertex(*vs):
        return any(abs(pt[0] - v[0]) <= _tol(pt) and abs(pt[1] - v[1]) <= _tol(pt)
                   for v in _match(pt, list(vs)))

    regions = [
        ("L1", [(half, half), A, G, Gp, Ap], (G, Gp)),
        ("L2", [A, (Fraction(1), half), D], (D,)),
        ("L2'", [Ap, (half, Fraction(0)), Dp], (Dp,)),
        ("L3", [(Fraction(1), Fraction(0)), D, G, Gp, Dp], (G, D, Gp, Dp)),
    ]
    for label, verts, excluded in regions:
        if in_hull(pt, _match(pt, verts)) and not is_vertex(*excluded):
            return label
    return "Outside"


def in_uniform_region(X, d: int) -> str:
    """'P' when X lies in the uniform-boundedness pentagon, else 'Outside'."""
    X = _coerce(X)
    pt = _xy(X)
    if d == 2:
        return "P"
    half = Fraction(1, 2)
    E, F = _pt("E", d), _pt("F", d)
    Ep, Fp = _pt("E'", d), _pt("F'", d)
    verts = _match(pt, [E, Ep, F, Fp, (half, half)])
    tol = _tol(pt)
    for v in verts[2:4]:
        if abs(pt[0] - v[0]) <= tol and abs(pt[1] - v[1]) <= tol:
            return "Outside"
    return "P" if in_hull(pt, verts) else "Outside"


def boundary_segments(d: int) -> list[tuple[tuple, tuple]]:
    """Interior boundary segments of the beta-partition."""
    half = Fraction(1, 2)
    A, C, D = _pt("A", d), _pt("C", d), _pt("D", d)
    Ap, Cp, Dp = _pt("A'", d), _pt("C'", d), _pt("D'", d)
    return [(A, C), (Ap, Cp), (C, Cp), (C, D), (Cp, Dp)]


def distance_to_boundaries(X, d: int) -> float:
    """Euclidean distance from X to the nearest interior partition boundary."""
    import math
    x, y = _coerce(X).as_float()
    best = math.inf
    for p0, p1 in boundary_segments(d):
        x0, y0 = map(float, p0)
        x1, y1 = map(float, p1)
        dx, dy = x1 - x0, y1 - y0
        L2 = dx * dx + dy * dy
        t = 0.0 if L2 == 0 else min(1.0, max(0.0, ((x - x0) * dx + (y - y0) * dy) / L2))
        best = min(best, math.hypot(x - x0 - t * dx, y - y0 - t * dy))
    return best


def lattice(n: int) -> Iterable[PqPoint]:
    """n x n lattice of exact points covering the square (corners included)."""
    for i in range(n):
        for j in range(n):
            a = Fraction(1, 2) + Fraction(i, 2 * (n - 1)) if n > 1 else Fraction(1, 2)
            b = Fraction(j, 2 * (n - 1)) if n > 1 else Fraction(0)
            yield PqPoint(a, b)
