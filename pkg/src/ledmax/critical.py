"""Critical points of f at fixed h: Newton solver, classification, multistart
census, and the confining-rectangle / uniqueness-height machinery."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import Diverged, MaxIterations, SingularHessian
from .functional import (
    Configuration,
    State,
    eval_gradient,
    evaluate,
    gradient_scale,
    hessian_scale,
)

DEGENERACY_EPS = 1e-9


class Kind(str, enum.Enum):
    MAXIMUM = "Maximum"
    MINIMUM = "Minimum"
    SADDLE = "Saddle"
    DEGENERATE = "Degenerate"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class CriticalPoint:
    state: State
    f: float
    eig: Tuple[float, float]
    kind: Kind
    residual: float
    scale: float = 1.0

    @property
    def n_positive(self) -> int:
        """Number of eigenvalues above the degeneracy threshold."""
        return sum(lam > DEGENERACY_EPS * self.scale for lam in self.eig)


@dataclass(frozen=True)
class Rectangle:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    def corners(self) -> np.ndarray:
        return np.array(
            [
                [self.x_min, self.y_min],
                [self.x_max, self.y_min],
                [self.x_min, self.y_max],
                [self.x_max, self.y_max],
            ]
        )

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max

    def inflated(self, margin_x: float, margin_y: Optional[float] = None) -> "Rectangle":
        if margin_y is None:
            margin_y = margin_x
        return Rectangle(
            self.x_min - margin_x,
            self.x_max + margin_x,
            self.y_min - margin_y,
            self.y_max + margin_y,
        )


def symmetric_eigen2(a: float, b: float, c: float):
    """Eigen-decomposition of [[a, b], [b, c]] in closed form.

    Returns ``(lam1, lam2), (v1, v2)`` with ``lam1 <= lam2`` and unit
    eigenvectors.  The eigenvalue of larger magnitude is computed first and
    the other one recovered from the determinant, which keeps a small
    eigenvalue accurate when the other is large.  Eigenvectors come from the
    rotation angle 0.5 * atan2(2b, a - c), which is defined for any input.
    """
    size = max(abs(a), abs(b), abs(c))
    if size == 0.0:
        return (0.0, 0.0), (np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    # work on the scaled matrix so that products cannot under- or overflow
    a, b, c = a / size, b / size, c / size
    mean = 0.5 * (a + c)
    rad = math.hypot(0.5 * (a - c), b)
    if rad == 0.0:
        return (mean * size, mean * size), (np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    big = mean + rad if mean >= 0 else mean - rad
    small = (a * c - b * b) / big
    lam1, lam2 = (small, big) if small <= big else (big, small)
    # the larger eigenvalue belongs to the direction at angle theta
    if b == 0.0:
        v2 = np.array([1.0, 0.0]) if a >= c else np.array([0.0, 1.0])
    else:
        theta = 0.5 * math.atan2(2.0 * b, a - c)
        v2 = np.array([math.cos(theta), math.sin(theta)])
    v1 = np.array([-v2[1], v2[0]])
    vecs = (v1, v2)
    return (lam1 * size, lam2 * size), vecs


def classify(eig: Sequence[float], scale: float, eps: float = DEGENERACY_EPS) -> Kind:
    lam1, lam2 = eig
    tol = eps * scale
    if abs(lam1) <= tol or abs(lam2) <= tol:
        return Kind.DEGENERATE
    if lam2 < -tol:
        return Kind.MAXIMUM
    if lam1 > tol:
        return Kind.MINIMUM
    return Kind.SADDLE


def bounding_rectangle(cfg: Configuration) -> Rectangle:
    lo = cfg.points.min(axis=0)
    hi = cfg.points.max(axis=0)
    return Rectangle(float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]))


@dataclass(frozen=True)
class SignAssertion:
    case: str
    component: int
    expected_sign: int
    value: float

    @property
    def holds(self) -> bool:
        return math.copysign(1.0, self.value) == self.expected_sign and self.value != 0.0


@dataclass(frozen=True)
class ExteriorReport:
    state: State
    cases: Tuple[str, ...]
    assertions: Tuple[SignAssertion, ...]

    @property
    def all_hold(self) -> bool:
        return all(a.holds for a in self.assertions)


# case -> (gradient component, sign of F in that case)
_EXTERIOR_CASES = {"i": (0, +1), "ii": (0, -1), "iii": (1, +1), "iv": (1, -1)}


def exterior_sign(cfg: Configuration, s: State) -> ExteriorReport:
    """Check the strict gradient signs that hold outside the confining rectangle.

    Cases: (i) x left of every source, (ii) right of every source,
    (iii) below every source, (iv) above every source.
    """
    held = []
    if s.x < cfg.xs.min():
        held.append("i")
    if s.x > cfg.xs.max():
        held.append("ii")
    if s.y < cfg.ys.min():
        held.append("iii")
    if s.y > cfg.ys.max():
        held.append("iv")
    if not held:
        raise ValueError(f"state ({s.x}, {s.y}) lies inside the bounding rectangle")
    grad = eval_gradient(cfg, s)
    assertions = tuple(
        SignAssertion(case, comp, sign, float(grad[comp]))
        for case in held
        for comp, sign in [_EXTERIOR_CASES[case]]
    )
    return ExteriorReport(s, tuple(held), assertions)


def max_corner_distance(cfg: Configuration) -> float:
    """Largest distance from a corner of the bounding rectangle to a source.

    The distance to a fixed point is convex, so its maximum over the
    rectangle is attained at a corner.
    """
    corners = bounding_rectangle(cfg).corners()
    diff = corners[:, None, :] - cfg.points[None, :, :]
    return float(np.sqrt(np.max(np.sum(diff * diff, axis=-1))))


def uniqueness_bound(cfg: Configuration) -> float:
    """Height above which the Hessian is negative definite on the rectangle.

    Negative definiteness on the rectangle holds once
    rho^2 / (rho^2 + h^2) < 1 / (m + 2) for every source distance rho, i.e.
    h^2 > (m + 1) rho_max^2.  This also implies the trace condition
    rho^2 / (rho^2 + h^2) < 2 / (m + 2).
    """
    return math.sqrt(cfg.m + 1.0) * max_corner_distance(cfg)


def default_tolerance(cfg: Configuration) -> float:
    return 1e-12 * max(1.0, cfg.n * cfg.m)


def _roundoff_floor(cfg: Configuration, s: State) -> float:
    # smallest gradient norm resolvable in double precision at this state
    return 64.0 * np.finfo(float).eps * gradient_scale(cfg, s)


def make_critical_point(cfg: Configuration, s: State, residual: Optional[float] = None) -> CriticalPoint:
    d = evaluate(cfg, s)
    scale = hessian_scale(cfg, s)
    eig, _ = symmetric_eigen2(d.f_xx, d.f_xy, d.f_yy)
    if residual is None:
        residual = float(np.max(np.abs(d.grad)))
    return CriticalPoint(s, d.f, eig, classify(eig, scale), residual, scale)


def newton_solve(
    cfg: Configuration,
    h: float,
    x0,
    tol: Optional[float] = None,
    max_iter: int = 50,
    max_halvings: int = 8,
) -> CriticalPoint:
    """Newton's method for F(x, y; h) = 0 at fixed h.

    Full steps; when a step increases the residual or leaves the search box
    it is halved up to ``max_halvings`` times before giving up.  Convergence is declared when
    ``||F||_inf`` falls below ``tol`` (default ``1e-12 * max(1, n*m)``) or
    below the double-precision roundoff floor of the gradient sum.

    Raises
    ------
    SingularHessian
        ``|det DF|`` below ``1e-14 * scale**2`` before convergence.
    MaxIterations
    Diverged
        The iterate left the bounding rectangle inflated by ten diameters
        plus one meter, or halving could not reduce the residual.
    """
    if tol is None:
        tol = default_tolerance(cfg)
    rect = bounding_rectangle(cfg)
    margin = 10.0 * rect.diameter + 1.0
    box = rect.inflated(margin)
    xy = np.array(x0, dtype=float)
    if xy.shape != (2,) or not np.all(np.isfinite(xy)):
        raise ValueError("x0 must be a finite 2-vector")

    s = State(xy[0], xy[1], h)
    d = evaluate(cfg, s)
    res = float(np.max(np.abs(d.grad)))
    for _ in range(max_iter + 1):
        target = max(tol, _roundoff_floor(cfg, s))
        if res <= target:
            xy, s, res = _polish(cfg, h, xy, s, d, res)
            return make_critical_point(cfg, s, res)
        H = d.hess
        scale = hessian_scale(cfg, s)
        det = H[0, 0] * H[1, 1] - H[0, 1] ** 2
        if abs(det) < 1e-14 * scale * scale:
            raise SingularHessian(f"|det DF| = {abs(det):.3e} at ({s.x}, {s.y}), h={h}")
        step = np.linalg.solve(H, d.grad)
        lam = 1.0
        for _halving in range(max_halvings + 1):
            cand = xy - lam * step
            if not box.contains(cand[0], cand[1]):
                lam *= 0.5
                continue
            s_new = State(cand[0], cand[1], h)
            d_new = evaluate(cfg, s_new)
            res_new = float(np.max(np.abs(d_new.grad)))
            if res_new < res or res_new <= max(tol, _roundoff_floor(cfg, s_new)):
                break
            lam *= 0.5
        else:
            if not box.contains(cand[0], cand[1]):
                raise Diverged(f"iterate ({cand[0]}, {cand[1]}) left the search box")
            raise Diverged(f"residual could not be reduced from {res:.3e}")
        xy, s, d, res = cand, s_new, d_new, res_new
    raise MaxIterations(f"no convergence in {max_iter} iterations (residual {res:.3e})")


def _polish(cfg: Configuration, h: float, xy, s: State, d, res: float, steps: int = 2):
    """Extra Newton steps after convergence, kept while the residual drops.

    On flat landscapes a residual at the tolerance still leaves a position
    error of order tol / |lambda|; quadratic convergence removes it.
    """
    for _ in range(steps):
        if res == 0.0:
            break
        try:
            cand = xy - np.linalg.solve(d.hess, d.grad)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(cand)):
            break
        s_new = State(cand[0], cand[1], h)
        d_new = evaluate(cfg, s_new)
        res_new = float(np.max(np.abs(d_new.grad)))
        if not res_new < res:
            break
        xy, s, d, res = cand, s_new, d_new, res_new
    return xy, s, res


def seed_grid(cfg: Configuration, size: int = 32, inflate: float = 0.1) -> np.ndarray:
    """``size x size`` grid over the bounding rectangle inflated by ``inflate``."""
    rect = bounding_rectangle(cfg)
    pad = inflate * max(rect.width, rect.height)
    xs = np.linspace(rect.x_min - pad, rect.x_max + pad, size)
    ys = np.linspace(rect.y_min - pad, rect.y_max + pad, size)
    return np.array(list(itertools.product(xs, ys)))


def canonical_order(points: Iterable[CriticalPoint]) -> List[CriticalPoint]:
    return sorted(points, key=lambda p: (-p.f, p.state.x, p.state.y))


def deduplicate(points: Iterable[CriticalPoint], radius: float) -> List[CriticalPoint]:
    kept: List[CriticalPoint] = []
    for p in canonical_order(points):
        if all(math.hypot(p.state.x - q.state.x, p.state.y - q.state.y) > radius for q in kept):
            kept.append(p)
    return kept


def find_critical_points(
    cfg: Configuration,
    h: float,
    seeds=None,
    grid_size: int = 32,
    tol: Optional[float] = None,
) -> List[CriticalPoint]:
    """Multistart Newton census of the critical points at height h.

    Failed starts are dropped; survivors closer than ``1e-6 * diameter``
    are merged.  The result is sorted by descending f, then x, then y.
    """
    if seeds is None:
        seeds = seed_grid(cfg, grid_size)
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if seeds.size == 0:
        raise ValueError("seed set is empty")
    found = []
    for x0 in seeds:
        try:
            found.append(newton_solve(cfg, h, x0, tol=tol))
        except (SingularHessian, MaxIterations, Diverged):
            continue
    radius = 1e-6 * max(cfg.diameter(), h)
    return deduplicate(found, radius)


def census(points: Sequence[CriticalPoint]) -> dict:
    """Count critical points by kind."""
    counts = {k: 0 for k in Kind}
    for p in points:
        counts[p.kind] += 1
    return counts


__all__ = [
    "CriticalPoint",
    "ExteriorReport",
    "Kind",
    "Rectangle",
    "bounding_rectangle",
    "census",
    "classify",
    "exterior_sign",
    "find_critical_points",
    "make_critical_point",
    "max_corner_distance",
    "newton_solve",
    "seed_grid",
    "symmetric_eigen2",
    "uniqueness_bound",
]
