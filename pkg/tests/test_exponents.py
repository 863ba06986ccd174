import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hermproj.exponents import (OutsideSquareError, PqPoint, beta, beta_max_form, boundary_segments,
                                classify, classify_near_sphere, delta, distance_to_boundaries, dual,
                                gamma, in_uniform_region, lattice, named_point)

half = F(1, 2)


def exact_points():
    a = st.fractions(min_value=half, max_value=1, max_denominator=240)
    b = st.fractions(min_value=0, max_value=half, max_denominator=240)
    return st.builds(PqPoint, a, b)


def test_square_membership():
    with pytest.raises(OutsideSquareError):
        PqPoint(F(1, 4), F(1, 4))
    with pytest.raises(OutsideSquareError):
        PqPoint(1.0, 0.6)
    X = PqPoint.from_pq(2, math.inf)
    assert (X.a, X.b) == (half, 0)


def test_delta_examples():
    assert delta(PqPoint(half, half)) == 0
    assert delta(PqPoint(1, 0)) == 1
    assert delta(named_point("A", 2)) == F(1, 3)


def test_dual_examples():
    assert dual(PqPoint(1, 0)) == PqPoint(1, 0)
    assert dual(PqPoint(half, half)) == PqPoint(half, half)
    assert dual(named_point("A", 2)) == PqPoint(half, F(1, 6))


def test_named_points():
    assert named_point("A", 2) == PqPoint(F(5, 6), half)
    assert named_point("G", 2) == PqPoint(F(5, 6), F(1, 6))
    assert named_point("G'", 2) == named_point("G", 2)
    assert named_point("F", 3) == PqPoint(F(11, 12), F(1, 4))
    assert named_point("D", 3) == PqPoint(1, F(1, 3))
    with pytest.raises(ValueError):
        named_point("Z", 3)


def test_classify_examples():
    assert classify(PqPoint(half, half), 2) == "R1"
    assert classify(PqPoint(1, 0), 2) == "R3"
    assert classify(named_point("D", 3), 3) == "SegCD"
    assert classify(named_point("D'", 3), 3) == "SegC'D'"
    # interior points of R2 and R2'
    assert classify(PqPoint(F(19, 20), F(9, 20)), 2) == "R2"
    assert classify(PqPoint(F(11, 20), F(1, 20)), 2) == "R2'"


def test_beta_examples():
    assert beta(PqPoint(half, half), 2) == 0
    assert beta(PqPoint(1, 0), 2) == 0
    assert beta(named_point("D", 3), 3) == 0
    assert beta(PqPoint.from_pq(2, math.inf), 3) == F(1, 4)


def test_gamma_examples():
    assert gamma(PqPoint(half, half), 2) == half
    assert gamma(named_point("A", 2), 2) == F(1, 12)
    assert gamma(PqPoint(1, 0), 2) == 0


@pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
@given(X=exact_points())
def test_duality_symmetry(d, X):
    assert dual(dual(X)) == X
    assert delta(dual(X)) == delta(X)
    assert beta(dual(X), d) == beta(X, d)
    assert gamma(dual(X), d) == gamma(X, d)


@pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
@given(X=exact_points())
def test_classify_never_outside(d, X):
    assert classify(X, d) != "Outside"


@pytest.mark.parametrize("d", [2, 3, 4])
def test_branch_matches_max_form_random(d):
    rng = np.random.default_rng(d)
    for a, b in zip(rng.uniform(0.5, 1, 10_000), rng.uniform(0, 0.5, 10_000)):
        X = PqPoint(float(a), float(b))
        assert abs(beta(X, d, check=False) - beta_max_form(X, d)) < 1e-12


@pytest.mark.parametrize("d", [2, 3, 4])
def test_continuity_along_boundaries(d):
    # sample just either side of every interior boundary segment
    for p0, p1 in boundary_segments(d):
        (x0, y0), (x1, y1) = map(lambda v: tuple(map(float, v)), (p0, p1))
        nx, ny = y1 - y0, x0 - x1
        nrm = math.hypot(nx, ny)
        if nrm == 0:
            continue
        nx, ny = nx / nrm, ny / nrm
        for t in np.linspace(0.05, 0.95, 19):
            x, y = x0 + t * (x1 - x0), y0 + t * (y1 - y0)
            vals = []
            for s in (-1e-13, 1e-13):
                xs, ys = min(max(x + s * nx, 0.5), 1.0), min(max(y + s * ny, 0.0), 0.5)
                X = PqPoint(xs, ys)
                vals.append((beta(X, d), gamma(X, d)))
            assert abs(vals[0][0] - vals[1][0]) < 1e-12
            assert abs(vals[0][1] - vals[1][1]) < 1e-12


@pytest.mark.parametrize("d", [2, 3, 5])
def test_diagonal_two_regimes(d):
    # p = q' : beta = -delta/2 up to q = 2(d+1)/(d-1), then -1 + (d/2) delta
    qc = F(2 * (d + 1), d - 1)
    for q in [F(2), F(5, 2), qc, qc + 1, F(50)]:
        X = PqPoint(1 - 1 / q, 1 / q)
        dl = delta(X)
        want = -dl / 2 if q <= qc else -1 + F(d, 2) * dl
        assert beta(X, d) == want


def test_interiors_disjoint_sampled():
    from hermproj.exponents import beta_regions, in_hull
    rng = np.random.default_rng(0)
    for d in (2, 3):
        regs = beta_regions(d)
        for a, b in zip(rng.uniform(0.5, 1, 2000), rng.uniform(0, 0.5, 2000)):
            hits = [k for k, v in regs.items() if in_hull((a, b), [tuple(map(float, p)) for p in v])]
            # boundary hits are measure zero; random floats land in one region
            assert len(hits) <= 1 or distance_to_boundaries(PqPoint(a, b), d) < 1e-9


def test_near_sphere_and_uniform_labels():
    assert classify_near_sphere(PqPoint(half, half), 2) == "L1"
    assert classify_near_sphere(PqPoint(1, 0), 3) == "L3"
    assert in_uniform_region(PqPoint(half, half), 3) == "P"
    assert in_uniform_region(PqPoint(1, 0), 3) == "Outside"
    assert in_uniform_region(PqPoint(1, 0), 2) == "P"


def test_lattice_covers_corners():
    pts = list(lattice(5))
    assert len(pts) == 25
    assert PqPoint(half, 0) in pts and PqPoint(1, half) in pts
