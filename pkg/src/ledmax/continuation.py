"""Pseudo-arclength continuation of critical points in h.

A branch is a curve u(s) = (x, y, h) in the zero set of F.  Each step takes
an Euler predictor along the unit tangent (the null vector of the 2x3
Jacobian [DF | dF/dh]) and corrects with Newton on the augmented system

    F(x, y; h) = 0,    t . (u - u_pred) = 0.

Accepted points carry the Hessian eigenvalues.  A sign change of either
eigenvalue, or of the tangent's h-component, between consecutive points is
localized and recorded as a :class:`BifurcationEvent`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .critical import (
    CriticalPoint,
    Kind,
    bounding_rectangle,
    classify,
    default_tolerance,
    make_critical_point,
    newton_solve,
    symmetric_eigen2,
    _roundoff_floor,
)
from .errors import (
    BranchSwitchFailed,
    CorrectorFailure,
    Diverged,
    MaxIterations,
    NoCrossing,
    NumericalFailure,
    RankDeficient,
    SingularHessian,
)
from .functional import Configuration, State, evaluate, hessian_scale


class EventKind(str, enum.Enum):
    SIMPLE = "SimpleCrossing"
    DOUBLE = "DoubleDegenerate"
    FOLD = "Fold"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class BranchPoint:
    s: float
    state: State
    f: float
    eig: Tuple[float, float]
    kind: Kind
    residual: float
    tangent: np.ndarray = field(repr=False)

    @property
    def u(self) -> np.ndarray:
        return self.state.u


@dataclass(frozen=True)
class BifurcationEvent:
    s: float
    state: State
    kind: EventKind
    null_dirs: Tuple[np.ndarray, ...]
    eig: Tuple[float, float]
    h_accuracy: float


@dataclass(frozen=True)
class Branch:
    points: Tuple[BranchPoint, ...]
    events: Tuple[BifurcationEvent, ...]
    termination: str

    @property
    def h_span(self) -> Tuple[float, float]:
        hs = [p.state.h for p in self.points]
        return min(hs), max(hs)

    @property
    def end(self) -> BranchPoint:
        return self.points[-1]


@dataclass(frozen=True)
class ContinuationOptions:
    ds0: float = 1e-2
    ds_min: float = 1e-8
    ds_max: float = 1e-1
    grow: float = 1.3
    fast_iters: int = 3
    max_corrector_iter: int = 10
    max_steps: int = 20000
    min_cos: float = 0.9
    tol: Optional[float] = None
    detect: bool = True
    locate_xtol: float = 1e-11


# tangent ---------------------------------------------------------------------


def _jacobian(cfg: Configuration, s: State):
    d = evaluate(cfg, s)
    J = np.array(
        [
            [d.f_xx, d.f_xy, d.dF_dh[0]],
            [d.f_xy, d.f_yy, d.dF_dh[1]],
        ]
    )
    return d, J


def tangent(cfg: Configuration, state: State, previous=None) -> np.ndarray:
    """Unit null vector of [DF | dF/dh] at a critical point.

    Oriented to have a positive dot product with ``previous`` when given,
    otherwise to point toward decreasing h (or +x if the branch is flat).

    Raises
    ------
    RankDeficient
        The 2x3 Jacobian has (numerically) lost rank.
    """
    _, J = _jacobian(cfg, state)
    t = np.cross(J[0], J[1])
    scale = hessian_scale(cfg, state)
    norm = float(np.linalg.norm(t))
    if norm <= 1e-14 * scale * scale:
        raise RankDeficient(f"[DF | dF/dh] rank deficient at {state}")
    t = t / norm
    return _orient(t, previous)


def _orient(t: np.ndarray, previous) -> np.ndarray:
    if previous is not None:
        return -t if float(np.dot(t, previous)) < 0 else t
    if t[2] != 0.0:
        return -t if t[2] > 0 else t
    return -t if t[0] < 0 else t


# corrector -------------------------------------------------------------------


def _correct(
    cfg: Configuration,
    u_pred: np.ndarray,
    t: np.ndarray,
    anchor: np.ndarray,
    sigma: float,
    tol: float,
    max_iter: int,
) -> Tuple[np.ndarray, int, float]:
    """Newton on {F(u) = 0, t . (u - anchor) = sigma} starting at ``u_pred``.

    Returns the corrected point, the iteration count and ``||F||_inf``.
    """
    u = np.array(u_pred, dtype=float)
    for it in range(max_iter + 1):
        if not (math.isfinite(u[2]) and u[2] > 0):
            raise CorrectorFailure("corrector left h > 0")
        s = State.from_vector(u)
        d, J = _jacobian(cfg, s)
        res = float(np.max(np.abs(d.grad)))
        constraint = float(np.dot(t, u - anchor)) - sigma
        if res <= max(tol, _roundoff_floor(cfg, s)) and abs(constraint) <= 1e-12 * (1.0 + np.max(np.abs(u))):
            return u, it, res
        if it == max_iter:
            break
        A = np.vstack([J, t])
        rhs = np.concatenate([d.grad, [constraint]])
        try:
            du = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError as exc:
            raise CorrectorFailure("singular augmented Jacobian") from exc
        if not np.all(np.isfinite(du)):
            raise CorrectorFailure("non-finite corrector step")
        u = u - du
    raise CorrectorFailure(f"corrector did not converge in {max_iter} iterations")


def _make_point(cfg: Configuration, u: np.ndarray, s_arc: float, t: np.ndarray, residual: float) -> BranchPoint:
    st = State.from_vector(u)
    cp = make_critical_point(cfg, st, residual)
    return BranchPoint(s_arc, st, cp.f, cp.eig, cp.kind, residual, t)


def _n_positive_raw(eig) -> int:
    return int(eig[0] > 0) + int(eig[1] > 0)


def _changes(a: BranchPoint, b: BranchPoint) -> Tuple[List[int], bool]:
    idx = [k for k in (0, 1) if (a.eig[k] > 0) != (b.eig[k] > 0)]
    fold = a.tangent[2] != 0 and b.tangent[2] != 0 and (a.tangent[2] > 0) != (b.tangent[2] > 0)
    return idx, fold


# main loop -------------------------------------------------------------------


def continue_branch(
    cfg: Configuration,
    start: CriticalPoint,
    h_target: float,
    opts: Optional[ContinuationOptions] = None,
    direction=None,
) -> Branch:
    """Trace the branch through ``start`` until h reaches ``h_target``.

    The initial direction is the tangent oriented toward ``h_target``
    unless ``direction`` (a 3-vector) is given.  Termination reasons:
    ``"h-range exhausted"``, ``"step underflow"``, ``"divergence"``,
    ``"max steps"``.

    Raises
    ------
    CorrectorFailure
        The start point is not a critical point, or no step at all could be
        taken.
    """
    opts = opts or ContinuationOptions()
    tol = opts.tol if opts.tol is not None else default_tolerance(cfg)
    h_start = start.state.h
    if h_target == h_start or h_target <= 0:
        raise ValueError("h_target must be positive and differ from the start height")
    u0 = start.state.u
    res0 = float(np.max(np.abs(evaluate(cfg, start.state).grad)))
    if res0 > 100 * max(tol, _roundoff_floor(cfg, start.state)):
        raise CorrectorFailure(f"start residual {res0:.3e} too large")

    want = np.array([0.0, 0.0, h_target - h_start])
    if direction is not None:
        t0 = np.asarray(direction, dtype=float)
        t0 = t0 / np.linalg.norm(t0)
        try:
            t0 = tangent(cfg, start.state, t0)
        except RankDeficient:
            pass
    else:
        t0 = tangent(cfg, start.state, want)
        if t0[2] == 0.0:
            t0 = tangent(cfg, start.state)

    rect = bounding_rectangle(cfg)
    box = rect.inflated(10.0 * rect.diameter + 1.0)
    h_cap = 10.0 * max(h_start, h_target)

    points = [_make_point(cfg, u0, 0.0, t0, res0)]
    events: List[BifurcationEvent] = []
    ds = opts.ds0
    termination = "max steps"
    side = math.copysign(1.0, h_target - h_start)

    for _step in range(opts.max_steps):
        prev = points[-1]
        t = prev.tangent
        ds = min(ds, opts.ds_max)
        if ds < opts.ds_min:
            if len(points) == 1:
                raise CorrectorFailure("no continuation step could be taken from the start point")
            termination = "step underflow"
            break
        u_pred = prev.u + ds * t
        try:
            u_new, iters, res = _correct(cfg, u_pred, t, u_pred, 0.0, tol, opts.max_corrector_iter)
            if np.linalg.norm(u_new - prev.u) > max(2.0 * ds, 1e-300) or np.linalg.norm(u_new - prev.u) > opts.ds_max * 1.5:
                raise CorrectorFailure("corrector jumped")
            try:
                t_new = tangent(cfg, State.from_vector(u_new), t)
            except RankDeficient:
                sec = u_new - prev.u
                t_new = sec / np.linalg.norm(sec)
            if float(np.dot(t_new, t)) < opts.min_cos:
                raise CorrectorFailure("tangent turned too sharply")
        except CorrectorFailure:
            ds *= 0.5
            continue

        if not box.contains(u_new[0], u_new[1]) or u_new[2] > h_cap:
            termination = "divergence"
            break

        crossed = (u_new[2] - h_target) * side >= 0
        if not crossed and t[2] * side > 0 and t_new[2] * side < 0 and ds > opts.ds_min:
            # h turned back within the step; do not skip a target below the turn
            if _hermite_peak(prev.u[2], u_new[2], t[2], t_new[2], np.linalg.norm(u_new - prev.u), side) >= h_target * side:
                ds *= 0.5
                continue
        if crossed:
            # finish exactly at the target height
            frac = (h_target - prev.u[2]) / (u_new[2] - prev.u[2])
            guess = prev.u[:2] + frac * (u_new[:2] - prev.u[:2])
            try:
                cp = newton_solve(cfg, h_target, guess, tol=tol)
            except NumericalFailure:
                ds *= 0.5
                continue
            u_fin = cp.state.u
            try:
                t_fin = tangent(cfg, cp.state, t)
            except RankDeficient:
                t_fin = t
            s_fin = prev.s + float(np.linalg.norm(u_fin - prev.u))
            new = _make_point(cfg, u_fin, s_fin, t_fin, cp.residual)
        else:
            new = _make_point(cfg, u_new, prev.s + float(np.linalg.norm(u_new - prev.u)), t_new, res)

        if opts.detect:
            events.extend(_events_between(cfg, prev, new, tol, opts.locate_xtol))
        points.append(new)
        if crossed:
            termination = "h-range exhausted"
            break
        if iters <= opts.fast_iters:
            ds *= opts.grow
    return Branch(tuple(points), tuple(events), termination)


def _hermite_peak(h0: float, h1: float, dh0: float, dh1: float, length: float, side: float) -> float:
    """Largest ``side * h`` on the cubic Hermite interpolant of h over a step."""
    tau = np.linspace(0.0, 1.0, 65)
    t2, t3 = tau * tau, tau * tau * tau
    h = (2 * t3 - 3 * t2 + 1) * h0 + (t3 - 2 * t2 + tau) * length * dh0 + (-2 * t3 + 3 * t2) * h1 + (t3 - t2) * length * dh1
    return float(np.max(side * h))


# localization ----------------------------------------------------------------


def _bracketed_root(fun: Callable[[float], float], lo: float, hi: float, f_lo: float, f_hi: float, xtol: float):
    """Illinois false position.

    Returns ``(root, lo, hi)`` where [lo, hi] still brackets the sign change.
    """
    side = 0
    for _ in range(200):
        if hi - lo <= xtol:
            break
        x = hi - f_hi * (hi - lo) / (f_hi - f_lo) if f_hi != f_lo else 0.5 * (lo + hi)
        if not lo < x < hi:
            x = 0.5 * (lo + hi)
        fx = fun(x)
        if fx == 0.0:
            return x, x, x
        if (fx > 0) == (f_lo > 0):
            lo, f_lo = x, fx
            if side == -1:
                f_hi *= 0.5
            side = -1
        else:
            hi, f_hi = x, fx
            if side == 1:
                f_lo *= 0.5
            side = 1
    root = lo if abs(f_lo) < abs(f_hi) else hi
    return root, lo, hi


class _Path:
    """Corrected points on the secant-parametrized segment between two branch points."""

    def __init__(self, cfg: Configuration, a: BranchPoint, b: BranchPoint, tol: float):
        self.cfg, self.a, self.b, self.tol = cfg, a, b, tol
        chord = b.u - a.u
        self.length = float(np.linalg.norm(chord))
        self.t = chord / self.length
        self.cache = {0.0: a.u, self.length: b.u}

    def point(self, sigma: float) -> np.ndarray:
        if sigma in self.cache:
            return self.cache[sigma]
        u_pred = self.a.u + sigma * self.t
        u, _, _ = _correct(self.cfg, u_pred, self.t, self.a.u, sigma, self.tol, 20)
        self.cache[sigma] = u
        return u

    def eig(self, sigma: float):
        d = evaluate(self.cfg, State.from_vector(self.point(sigma)))
        return symmetric_eigen2(d.f_xx, d.f_xy, d.f_yy)


def locate_bifurcation(
    cfg: Configuration,
    a: BranchPoint,
    b: BranchPoint,
    index: Optional[int] = None,
    tol: Optional[float] = None,
    xtol: float = 1e-11,
) -> BifurcationEvent:
    """Localize the eigenvalue zero between two accepted branch points.

    The segment is parametrized by the chord from ``a`` to ``b``; each trial
    point is corrected back onto the branch with the chord as the arclength
    constraint.  ``index`` selects which sorted eigenvalue to follow (by
    default the first that changes sign).

    Raises
    ------
    NoCrossing
        Neither eigenvalue changes sign across the bracket.
    """
    if tol is None:
        tol = default_tolerance(cfg)
    idx, fold = _changes(a, b)
    if index is None:
        if not idx:
            raise NoCrossing("no eigenvalue sign change in the bracket")
        index = idx[0]
    elif index not in idx:
        raise NoCrossing(f"eigenvalue {index} does not change sign in the bracket")
    path = _Path(cfg, a, b, tol)
    fun = lambda sig: path.eig(sig)[0][index]
    root, lo, hi = _bracketed_root(fun, 0.0, path.length, a.eig[index], b.eig[index], xtol)
    return _event_at(cfg, path, root, lo, hi, index, fold)


def _event_at(cfg, path: _Path, root, lo, hi, index, fold) -> BifurcationEvent:
    u = path.point(root)
    st = State.from_vector(u)
    (lam1, lam2), vecs = path.eig(root)
    scale = hessian_scale(cfg, st)
    # both eigenvalues vanish together at isotropic points
    double = abs(lam1) <= 1e-6 * scale and abs(lam2) <= 1e-6 * scale
    if double:
        kind, null = EventKind.DOUBLE, (vecs[0], vecs[1])
    else:
        kind = EventKind.FOLD if fold else EventKind.SIMPLE
        null = (vecs[index],)
    null = tuple(_canonical_sign(v) for v in null)
    h_acc = abs(path.point(hi)[2] - path.point(lo)[2]) if hi > lo else 0.0
    return BifurcationEvent(path.a.s + root, st, kind, null, (lam1, lam2), h_acc)


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    k = 0 if abs(v[0]) >= abs(v[1]) else 1
    # adding 0.0 turns negative zeros into plain zeros
    return (-v if v[k] < 0 else v) + 0.0


def _events_between(cfg, a: BranchPoint, b: BranchPoint, tol: float, xtol: float) -> List[BifurcationEvent]:
    idx, fold = _changes(a, b)
    if not idx:
        return []
    found = []
    for k in idx:
        try:
            found.append(locate_bifurcation(cfg, a, b, index=k, tol=tol, xtol=xtol))
        except NumericalFailure:
            continue
    if len(found) == 2 and (
        found[0].kind is EventKind.DOUBLE or abs(found[0].state.h - found[1].state.h) <= 1e-9 * found[0].state.h
    ):
        found = found[:1]
    return sorted(found, key=lambda e: e.s)


# branch switching ------------------------------------------------------------


def _deflated_newton(cfg: Configuration, h: float, x0, root, tol: float, max_iter: int = 60) -> np.ndarray:
    """Newton on M(x) F(x) with M = 1/||x - root||^2 + 1, which repels the
    iteration from the known solution ``root``."""
    x = np.array(x0, dtype=float)
    root = np.asarray(root, dtype=float)
    for _ in range(max_iter):
        st = State(x[0], x[1], h)
        d = evaluate(cfg, st)
        if float(np.max(np.abs(d.grad))) <= max(tol, _roundoff_floor(cfg, st)):
            return x
        r = x - root
        r2 = float(r @ r)
        if r2 == 0.0:
            raise Diverged("deflated iterate hit the deflated root")
        mu = 1.0 / r2 + 1.0
        # d mu / dx = -2 r / r2^2 ; Jacobian of mu F is mu DF + F (d mu)^T
        J = mu * d.hess + np.outer(d.grad, -2.0 * r / (r2 * r2))
        try:
            step = np.linalg.solve(J, mu * d.grad)
        except np.linalg.LinAlgError as exc:
            raise SingularHessian("singular deflated Jacobian") from exc
        x = x - step
        if not np.all(np.isfinite(x)):
            raise Diverged("deflated Newton produced a non-finite iterate")
    raise MaxIterations("deflated Newton did not converge")


def switch_branches(
    cfg: Configuration,
    event: BifurcationEvent,
    eps: Optional[float] = None,
    n_fold: Optional[int] = None,
    tol: Optional[float] = None,
) -> List[State]:
    """Seeds on the branches emanating from a bifurcation point.

    All seeds are converged critical points at ``h* (1 - 1e-3)``.

    * SimpleCrossing: ``state* +/- eps * null_dir``, corrected by Newton
      deflated against the continuing trivial solution.
    * DoubleDegenerate at a dihedrally symmetric center: one seed per sign
      and fixed line of D_n (``2n`` in total), each corrected by scalar
      Newton restricted to its line.  The full 2-D Newton cannot be used
      there because the Hessian is nearly singular in the angular
      direction.

    Raises
    ------
    BranchSwitchFailed
        No seed converged off the trivial branch.
    ValueError
        Called on a Fold (folds are traversed, not switched).
    """
    from . import symmetry

    if event.kind is EventKind.FOLD:
        raise ValueError("folds are followed by continuation, not branch switching")
    if tol is None:
        tol = default_tolerance(cfg)
    h_star = event.state.h
    if eps is None:
        eps = 1e-3 * max(cfg.diameter(), h_star)
    h1 = h_star * (1.0 - 1e-3)
    center = event.state.xy
    try:
        trivial = newton_solve(cfg, h1, center, tol=tol).state.xy
    except NumericalFailure:
        trivial = center

    seeds: List[State] = []
    if event.kind is EventKind.SIMPLE:
        for sign in (1.0, -1.0):
            x0 = center + sign * eps * event.null_dirs[0]
            try:
                x = _deflated_newton(cfg, h1, x0, trivial, tol)
                cp = newton_solve(cfg, h1, x, tol=tol)
            except NumericalFailure:
                continue
            if np.linalg.norm(cp.state.xy - trivial) > 1e-3 * eps:
                seeds.append(cp.state)
    else:
        n = n_fold if n_fold is not None else symmetry.detect_dihedral_order(cfg, center)
        if not n:
            raise BranchSwitchFailed("double zero without a detectable dihedral symmetry")
        reach = 10.0 * cfg.diameter() + 1.0
        for line in symmetry.fixed_lines(n):
            for sign in (1.0, -1.0):
                bounds = (0.0, reach) if sign > 0 else (-reach, 0.0)
                try:
                    s = symmetry.restricted_solve(
                        cfg, line, h1, sign * eps, center, deflate=True, tol=tol, s_bounds=bounds
                    )
                except NumericalFailure:
                    continue
                if abs(s) > 1e-3 * eps:
                    xy = center + s * line.direction
                    seeds.append(State(xy[0], xy[1], h1))
    if not seeds:
        raise BranchSwitchFailed("no seed converged off the trivial branch")
    return seeds


__all__ = [
    "BifurcationEvent",
    "Branch",
    "BranchPoint",
    "ContinuationOptions",
    "EventKind",
    "continue_branch",
    "locate_bifurcation",
    "switch_branches",
    "tangent",
]
