import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ledmax.critical import (
    Kind,
    Rectangle,
    bounding_rectangle,
    census,
    classify,
    default_tolerance,
    exterior_sign,
    find_critical_points,
    make_critical_point,
    max_corner_distance,
    newton_solve,
    seed_grid,
    symmetric_eigen2,
    uniqueness_bound,
)
from ledmax.errors import Diverged, MaxIterations, SingularHessian
from ledmax.functional import Configuration, State, eval_gradient, eval_hessian
from ledmax.rng import SplitMix64
from ledmax.symmetry import circle_critical_height

from conftest import random_configuration


# eigenvalues and classification ----------------------------------------------


@settings(max_examples=200, deadline=None)
@given(
    a=st.floats(-1e3, 1e3),
    b=st.floats(-1e3, 1e3),
    c=st.floats(-1e3, 1e3),
)
def test_eigen2_matches_numpy(a, b, c):
    (l1, l2), (v1, v2) = symmetric_eigen2(a, b, c)
    ref = np.linalg.eigvalsh([[a, b], [b, c]])
    size = max(abs(a), abs(b), abs(c), 1e-300)
    assert l1 <= l2
    assert abs(l1 - ref[0]) <= 1e-12 * size
    assert abs(l2 - ref[1]) <= 1e-12 * size
    A = np.array([[a, b], [b, c]])
    for lam, v in ((l1, v1), (l2, v2)):
        assert np.linalg.norm(v) == pytest.approx(1.0)
        assert np.max(np.abs(A @ v - lam * v)) <= 1e-10 * size
    assert abs(v1 @ v2) < 1e-8


def test_eigen2_small_eigenvalue_relative_accuracy():
    # eigenvalues 1e8 and 1e-6 of a rotated diagonal matrix
    t = 0.3
    Q = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
    A = Q @ np.diag([1e-6, 1e8]) @ Q.T
    (l1, l2), _ = symmetric_eigen2(A[0, 0], A[0, 1], A[1, 1])
    assert l2 == pytest.approx(1e8, rel=1e-14)
    assert abs(l1 - 1e-6) < 1e-7


def test_eigen2_isotropic():
    (l1, l2), (v1, v2) = symmetric_eigen2(-2.0, 0.0, -2.0)
    assert l1 == l2 == -2.0
    assert abs(v1 @ v2) == 0.0


def test_classify():
    assert classify((-2.0, -1.0), 1.0) is Kind.MAXIMUM
    assert classify((-1.0, 2.0), 1.0) is Kind.SADDLE
    assert classify((1.0, 2.0), 1.0) is Kind.MINIMUM
    assert classify((-1.0, 1e-12), 1.0) is Kind.DEGENERATE
    assert classify((-1.0, 1e-12 * 5.0), 5.0) is Kind.DEGENERATE
    assert str(Kind.SADDLE) == "Saddle"


# rectangle, sign tests, bound -------------------------------------------------


def test_bounding_rectangle_single_point():
    r = bounding_rectangle(Configuration([[0.3, -0.2]], 3.5))
    assert (r.x_min, r.x_max, r.y_min, r.y_max) == (0.3, 0.3, -0.2, -0.2)
    assert r.diameter == 0.0


def test_bounding_rectangle_circle(circle):
    # points at k = 10 and k = 5 lie exactly on the axes at distance r
    r = bounding_rectangle(circle)
    assert r.x_max == 1.2
    assert r.x_min == pytest.approx(-1.2, abs=1e-15)
    assert r.y_max == pytest.approx(1.2, abs=1e-15)
    assert r.y_min == pytest.approx(-1.2, abs=1e-15)


def test_bounding_rectangle_row_lattice(lattice_rows):
    r = bounding_rectangle(lattice_rows)
    assert r.x_min == pytest.approx(-0.555, abs=1e-15)
    assert r.x_max == pytest.approx(0.555, abs=1e-15)
    assert (r.y_min, r.y_max) == pytest.approx((-0.11, 0.11), abs=1e-15)


def test_exterior_sign_cases():
    cfg = random_configuration(SplitMix64(5), 10)
    r = bounding_rectangle(cfg)
    rep = exterior_sign(cfg, State(r.x_min - 0.1, 0.5 * (r.y_min + r.y_max), 0.7))
    assert rep.cases == ("i",)
    assert rep.assertions[0].component == 0 and rep.assertions[0].expected_sign == 1
    assert rep.all_hold
    rep = exterior_sign(cfg, State(0.5 * (r.x_min + r.x_max), r.y_max + 0.2, 0.7))
    assert rep.cases == ("iv",)
    assert rep.assertions[0].value < 0
    rep = exterior_sign(cfg, State(r.x_max + 1, r.y_min - 1, 0.7))
    assert rep.cases == ("ii", "iii")
    assert len(rep.assertions) == 2 and rep.all_hold


def test_exterior_sign_rejects_inside(circle):
    with pytest.raises(ValueError):
        exterior_sign(circle, State(0.0, 0.0, 1.0))


def test_exterior_sign_random_sweep():
    rng = SplitMix64(99)
    for _ in range(5):
        cfg = random_configuration(rng, 20)
        r = bounding_rectangle(cfg).inflated(1.0)
        checked = 0
        while checked < 100:
            x, y = rng.uniform_in(r.x_min, r.x_max), rng.uniform_in(r.y_min, r.y_max)
            try:
                rep = exterior_sign(cfg, State(x, y, rng.uniform_in(0.1, 2.0)))
            except ValueError:
                continue
            assert rep.all_hold
            checked += 1


def test_uniqueness_bound_single_point():
    assert uniqueness_bound(Configuration([[0.3, -0.2]], 3.5)) == 0.0


def test_uniqueness_bound_two_points():
    cfg = Configuration([[-1.0, 0.0], [1.0, 0.0]], 3.5)
    assert max_corner_distance(cfg) == 2.0
    h0 = uniqueness_bound(cfg)
    assert h0 == pytest.approx(2 * math.sqrt(4.5), rel=1e-15)
    assert h0 == pytest.approx(4.24264, abs=5e-6)
    h = h0 * (1 + 1e-3)
    for x in np.linspace(-1, 1, 101):
        H = eval_hessian(cfg, State(x, 0.0, h))
        assert np.all(np.linalg.eigvalsh(H) < 0)


def test_uniqueness_bound_dominates_circle_height(circle):
    assert uniqueness_bound(circle) >= circle_critical_height(1.2, circle.m)


def test_rectangle_corners_and_inflate():
    r = Rectangle(0.0, 2.0, -1.0, 1.0)
    assert r.corners().shape == (4, 2)
    big = r.inflated(0.5)
    assert big.contains(-0.5, 1.5) and not r.contains(-0.5, 1.5)


# Newton -----------------------------------------------------------------------


@pytest.mark.parametrize("h", [1.2, 2.0, 5.0])
def test_newton_single_point(h):
    cfg = Configuration([[0.3, -0.2]], 3.5)
    p = newton_solve(cfg, h, (0.0, 0.0))
    assert p.state.x == pytest.approx(0.3, abs=1e-12)
    assert p.state.y == pytest.approx(-0.2, abs=1e-12)
    assert p.kind is Kind.MAXIMUM


def test_newton_single_point_seed_outside_basin():
    # at h = 0.5 the seed lies beyond the inflection radius h / sqrt(m + 1),
    # where the gradient decays outward and Newton runs away
    cfg = Configuration([[0.3, -0.2]], 3.5)
    with pytest.raises(Diverged):
        newton_solve(cfg, 0.5, (0.0, 0.0))


def test_newton_circle_high(circle):
    for x0 in [(0.5, 0.4), (-1.0, 0.9), (1.1, -1.1)]:
        p = newton_solve(circle, 3.0, x0)
        # position error is bounded by the residual tolerance over |lambda| ~ 0.06
        assert math.hypot(p.state.x, p.state.y) < 1e-8
        assert p.kind is Kind.MAXIMUM and max(p.eig) < 0


def test_newton_circle_ray(circle):
    p = newton_solve(circle, 0.5, (1.1, 0.0))
    assert p.kind is Kind.MAXIMUM
    assert p.state.x > 0 and abs(p.state.y) < 1e-9
    # restricted oracle: bisection on the x-axis for F1(x, 0) = 0
    lo, hi = 1.1, 1.2
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if eval_gradient(circle, State(mid, 0.0, 0.5))[0] > 0:
            lo = mid
        else:
            hi = mid
    assert p.state.x == pytest.approx(0.5 * (lo + hi), abs=1e-10)
    assert p.state.x == pytest.approx(1.157941, abs=1e-6)


def test_newton_residual_within_tolerance(circle):
    p = newton_solve(circle, 0.7, (0.9, 0.3))
    assert np.max(np.abs(eval_gradient(circle, p.state))) <= default_tolerance(circle)
    assert p.residual <= default_tolerance(circle)


def test_newton_translation_invariance(circle):
    t = np.array([3.7, -1.9])
    p = newton_solve(circle, 0.6, (1.0, 0.2))
    q = newton_solve(circle.translated(t), 0.6, np.array([1.0, 0.2]) + t)
    assert np.max(np.abs(q.state.xy - (p.state.xy + t))) < 1e-9


def test_newton_singular_at_inflection():
    # radial curvature of a single source vanishes at r = h / sqrt(m + 1)
    cfg = Configuration([[0.0, 0.0]], 3.5)
    with pytest.raises(SingularHessian):
        newton_solve(cfg, 1.0, (1.0 / math.sqrt(4.5), 0.0))


def test_newton_iteration_limit(circle):
    with pytest.raises(MaxIterations):
        newton_solve(circle, 0.5, (0.6, 0.3), max_iter=1)


def test_newton_diverges_far_away():
    cfg = Configuration([[0.0, 0.0], [1.0, 0.0]], 3.5)
    with pytest.raises(Diverged):
        newton_solve(cfg, 0.1, (30.0, 30.0))


def test_newton_rejects_bad_seed(circle):
    with pytest.raises(ValueError):
        newton_solve(circle, 0.5, (np.nan, 0.0))


# multistart -------------------------------------------------------------------


def test_seed_grid_shape(circle):
    g = seed_grid(circle, 8)
    assert g.shape == (64, 2)
    assert g[:, 0].min() == pytest.approx(-1.2 - 0.24)


def test_find_single_point():
    cfg = Configuration([[0.3, -0.2]], 3.5)
    pts = find_critical_points(cfg, 0.5, grid_size=6)
    assert len(pts) == 1
    assert pts[0].state.xy == pytest.approx([0.3, -0.2], abs=1e-12)


def test_find_circle_low(circle):
    pts = find_critical_points(circle, 0.5)
    c = census(pts)
    assert c[Kind.MAXIMUM] == 20 and c[Kind.SADDLE] == 20 and c[Kind.MINIMUM] == 1
    maxima = [p for p in pts if p.kind is Kind.MAXIMUM]
    assert all(math.hypot(p.state.x, p.state.y) > 1 for p in maxima)
    fs = [p.f for p in pts]
    assert fs == sorted(fs, reverse=True)
    centre = [p for p in pts if p.kind is Kind.MINIMUM][0]
    assert math.hypot(centre.state.x, centre.state.y) < 1e-9


def test_find_circle_high(circle):
    pts = find_critical_points(circle, 3.0, grid_size=10)
    assert len(pts) == 1
    assert pts[0].kind is Kind.MAXIMUM
    assert math.hypot(pts[0].state.x, pts[0].state.y) < 1e-8


def test_find_rejects_empty_seeds(circle):
    with pytest.raises(ValueError):
        find_critical_points(circle, 1.0, seeds=np.empty((0, 2)))


def test_make_critical_point_kind(circle):
    p = make_critical_point(circle, State(0.0, 0.0, 0.5))
    assert p.kind is Kind.MINIMUM and p.n_positive == 2
