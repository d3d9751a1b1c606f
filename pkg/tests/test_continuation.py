import math

import numpy as np
import pytest

from ledmax.continuation import (
    ContinuationOptions,
    EventKind,
    continue_branch,
    locate_bifurcation,
    switch_branches,
    tangent,
)
from ledmax.critical import Kind, census, find_critical_points, make_critical_point, newton_solve
from ledmax.errors import NoCrossing
from ledmax.functional import Configuration, State, eval_gradient, hessian_scale
from ledmax.symmetry import circle_critical_height, fixed_lines

FOLD_CFG = Configuration([[0.0, 0.0], [1.0, 0.0], [0.1, 0.9]], 3.5)


@pytest.fixture(scope="module")
def circle_branch(circle):
    start = newton_solve(circle, 3.0, (0.1, 0.1))
    return continue_branch(circle, start, 0.5)


@pytest.fixture(scope="module")
def lattice_branch(lattice):
    return continue_branch(lattice, newton_solve(lattice, 1.0, (0.0, 0.0)), 0.03)


@pytest.fixture(scope="module")
def fold_branch():
    start = newton_solve(FOLD_CFG, 0.2, (1.0, 0.0))
    return continue_branch(FOLD_CFG, start, 3.0)


# tangent ----------------------------------------------------------------------


def test_tangent_single_point():
    cfg = Configuration([[0.3, -0.2]], 3.5)
    t = tangent(cfg, State(0.3, -0.2, 1.0))
    np.testing.assert_allclose(t, [0.0, 0.0, -1.0], atol=1e-14)
    t = tangent(cfg, State(0.3, -0.2, 1.0), previous=np.array([0.0, 0.0, 1.0]))
    np.testing.assert_allclose(t, [0.0, 0.0, 1.0], atol=1e-14)


def test_tangent_circle_center(circle):
    t = tangent(circle, State(0.0, 0.0, 2.0))
    np.testing.assert_allclose(t, [0.0, 0.0, -1.0], atol=1e-12)


def test_tangent_is_null_vector(circle):
    p = newton_solve(circle, 0.7, (0.9, 0.3))
    t = tangent(circle, p.state)
    # oracle: directional difference of the gradient along t vanishes
    e = 1e-6
    plus = State.from_vector(p.state.u + e * t)
    minus = State.from_vector(p.state.u - e * t)
    d = (eval_gradient(circle, plus) - eval_gradient(circle, minus)) / (2 * e)
    assert np.linalg.norm(t) == pytest.approx(1.0)
    assert np.max(np.abs(d)) <= 1e-6 * hessian_scale(circle, p.state)


# single source ------------------------------------------------------------------


def test_single_point_branch_is_straight():
    cfg = Configuration([[0.3, -0.2]], 3.5)
    br = continue_branch(cfg, newton_solve(cfg, 3.0, (0.3, -0.2)), 0.01)
    assert br.termination == "h-range exhausted"
    assert not br.events
    assert all(p.kind is Kind.MAXIMUM for p in br.points)
    xy = np.array([p.state.xy for p in br.points])
    assert np.max(np.abs(xy - [0.3, -0.2])) <= 1e-12
    assert br.end.state.h == 0.01


def test_bad_target(circle):
    p = newton_solve(circle, 3.0, (0.0, 0.0))
    with pytest.raises(ValueError):
        continue_branch(circle, p, 3.0)
    with pytest.raises(ValueError):
        continue_branch(circle, p, -1.0)


# circle -----------------------------------------------------------------------


def test_circle_central_event(circle, circle_branch):
    h0 = circle_critical_height(1.2, circle.m)
    assert circle_branch.termination == "h-range exhausted"
    assert len(circle_branch.events) == 1
    ev = circle_branch.events[0]
    assert ev.kind is EventKind.DOUBLE
    assert ev.state.h == pytest.approx(h0, rel=1e-6)
    assert math.hypot(ev.state.x, ev.state.y) <= 1e-9
    assert len(ev.null_dirs) == 2


def test_circle_center_stays_put(circle_branch):
    xy = np.array([p.state.xy for p in circle_branch.points])
    assert np.max(np.abs(xy)) <= 1e-9
    kinds = [p.kind for p in circle_branch.points]
    assert kinds[0] is Kind.MAXIMUM and kinds[-1] is Kind.MINIMUM


def test_circle_switch_gives_twenty_maxima(circle, circle_branch):
    seeds = switch_branches(circle, circle_branch.events[0])
    assert len(seeds) == 40
    lines = fixed_lines(20)
    for k, s in enumerate(seeds):
        # seeds come in +/- pairs along each fixed line
        d = lines[k // 2].direction
        assert abs(d[0] * s.y - d[1] * s.x) <= 1e-9
    ends = [continue_branch(circle, make_critical_point(circle, s), 0.5).end for s in seeds]
    c = census([make_critical_point(circle, p.state) for p in ends])
    assert c[Kind.MAXIMUM] == 20 and c[Kind.SADDLE] == 20


def test_event_independent_of_initial_step(circle):
    start = newton_solve(circle, 3.0, (0.0, 0.0))
    hs = []
    for ds0 in (1e-3, 1e-2, 1e-1):
        br = continue_branch(circle, start, 0.5, ContinuationOptions(ds0=ds0))
        hs.append(br.events[0].state.h)
    assert max(hs) - min(hs) < 1e-8


def test_no_crossing(circle, circle_branch):
    a, b = circle_branch.points[0], circle_branch.points[1]
    with pytest.raises(NoCrossing):
        locate_bifurcation(circle, a, b)


# lattice ----------------------------------------------------------------------


def test_lattice_events(lattice_branch):
    ev = lattice_branch.events
    assert [e.kind for e in ev] == [EventKind.SIMPLE, EventKind.SIMPLE]
    assert ev[0].state.h == pytest.approx(0.2656654, abs=1e-6)
    assert ev[1].state.h == pytest.approx(0.1031367, abs=1e-6)
    np.testing.assert_allclose(np.abs(ev[0].null_dirs[0]), [0.0, 1.0], atol=1e-9)
    np.testing.assert_allclose(np.abs(ev[1].null_dirs[0]), [1.0, 0.0], atol=1e-9)


def test_locate_reproduces_event(lattice, lattice_branch):
    ev = lattice_branch.events[0]
    pts = lattice_branch.points
    k = next(i for i in range(len(pts) - 1) if pts[i].state.h > ev.state.h >= pts[i + 1].state.h)
    again = locate_bifurcation(lattice, pts[k], pts[k + 1])
    assert again.state.h == pytest.approx(ev.state.h, abs=1e-10)


def test_lattice_switch_first(lattice, lattice_branch):
    ev = lattice_branch.events[0]
    seeds = switch_branches(lattice, ev)
    assert len(seeds) == 2
    a, b = seeds
    # seeds differ only along the null direction, and the pair is mirror symmetric in y
    assert a.x == pytest.approx(b.x, abs=1e-12)
    assert a.y == pytest.approx(-b.y, abs=1e-12)
    br = continue_branch(lattice, make_critical_point(lattice, a), 0.5 * ev.state.h)
    xs = np.array([p.state.x for p in br.points])
    assert np.max(np.abs(xs)) <= 1e-9
    assert br.end.kind is Kind.MAXIMUM


def test_lattice_switch_second(lattice, lattice_branch):
    ev = lattice_branch.events[1]
    a, b = switch_branches(lattice, ev)
    assert a.y == pytest.approx(b.y, abs=1e-12)
    assert a.x == pytest.approx(-b.x, abs=1e-12)
    br = continue_branch(lattice, make_critical_point(lattice, a), 0.5 * ev.state.h)
    assert br.end.kind is Kind.SADDLE and make_critical_point(lattice, br.end.state).n_positive == 1
    assert abs(br.end.state.x) == pytest.approx(0.05237, abs=5e-5)


# invariants --------------------------------------------------------------------


def test_points_resolve_with_newton(lattice, lattice_branch):
    for p in lattice_branch.points:
        q = newton_solve(lattice, p.state.h, p.state.xy)
        assert np.max(np.abs(q.state.xy - p.state.xy)) <= 1e-9


def test_h_monotone_without_folds(circle_branch, lattice_branch):
    for br in (circle_branch, lattice_branch):
        hs = np.array([p.state.h for p in br.points])
        assert np.all(np.diff(hs) < 0)


def test_reversal_returns_to_start(lattice):
    start = newton_solve(lattice, 1.0, (0.0, 0.0))
    down = continue_branch(lattice, start, 0.3)
    back = continue_branch(lattice, make_critical_point(lattice, down.end.state), 1.0)
    assert back.end.state.h == 1.0
    assert np.max(np.abs(back.end.state.xy - start.state.xy)) <= 1e-6


def test_reversal_after_switch(lattice, lattice_branch):
    ev = lattice_branch.events[0]
    seed = switch_branches(lattice, ev)[0]
    start = make_critical_point(lattice, seed)
    down = continue_branch(lattice, start, 0.2)
    back = continue_branch(lattice, make_critical_point(lattice, down.end.state), seed.h)
    assert np.max(np.abs(back.end.state.xy - seed.xy)) <= 1e-6


# folds -------------------------------------------------------------------------


def test_fold_detected(fold_branch):
    folds = [e for e in fold_branch.events if e.kind is EventKind.FOLD]
    assert len(folds) == 1
    ev = folds[0]
    hs = np.array([p.state.h for p in fold_branch.points])
    # the fold is the turning point of h along the branch
    assert ev.state.h >= hs.max() - 1e-12
    assert ev.state.h == pytest.approx(hs.max(), rel=1e-3)
    assert abs(ev.eig[1]) <= 1e-9 * hessian_scale(FOLD_CFG, ev.state)
    k = int(np.argmax(hs))
    assert fold_branch.points[0].kind is Kind.MAXIMUM
    assert fold_branch.points[-1].kind is Kind.SADDLE
    assert np.all(np.diff(hs[: k + 1]) > 0)


def test_fold_changes_census(fold_branch):
    # independent check: a maximum and a saddle disappear together across the fold
    h = fold_branch.events[0].state.h
    below = census(find_critical_points(FOLD_CFG, h * 0.99, grid_size=40))
    above = census(find_critical_points(FOLD_CFG, h * 1.01, grid_size=40))
    assert below[Kind.MAXIMUM] - above[Kind.MAXIMUM] == 1
    assert below[Kind.SADDLE] - above[Kind.SADDLE] == 1


def test_fold_cannot_be_switched(fold_branch):
    with pytest.raises(ValueError):
        switch_branches(FOLD_CFG, fold_branch.events[0])
