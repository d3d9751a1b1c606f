"""Dihedral symmetry of emitter layouts.

The group D_n acts on the plane through the rotation xi = R(2 pi / n) and the
reflection kappa = diag(1, -1).  Its elements are ``kappa^a xi^k``.  When the
emitter set is invariant under a group element g, the gradient is equivariant:
F(g x, h) = g F(x, h).  Consequences used here:

* each reflection ``kappa xi^k`` fixes the line spanned by
  (cos(k pi/n), -sin(k pi/n)), and F restricted to that line is tangent to it,
  so branches born on the line stay on it;
* at the center of a rotationally symmetric layout (n >= 3) the Hessian is a
  multiple of the identity, so both eigenvalues cross zero together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .critical import bounding_rectangle, default_tolerance, symmetric_eigen2, _roundoff_floor
from .errors import Diverged, EquivarianceError, MaxIterations, NoCrossing
from .functional import (
    Configuration,
    State,
    eval_dhessian_dh,
    eval_gradient,
    eval_hessian,
    gradient_scale,
    hessian_scale,
)
from .rng import SplitMix64

KAPPA = np.array([[1.0, 0.0], [0.0, -1.0]])


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class GroupElement:
    """The map ``kappa^reflect o xi_n^k`` of D_n."""

    n: int
    k: int
    reflect: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("group order n must be at least 1")
        object.__setattr__(self, "k", self.k % self.n)

    @property
    def matrix(self) -> np.ndarray:
        r = rotation(2.0 * math.pi * self.k / self.n)
        return KAPPA @ r if self.reflect else r

    def apply(self, v) -> np.ndarray:
        return np.asarray(v, dtype=float) @ self.matrix.T

    def compose(self, other: "GroupElement") -> "GroupElement":
        """``self o other`` using ``xi^k kappa = kappa xi^-k``."""
        if other.n != self.n:
            raise ValueError("elements belong to different groups")
        if other.reflect:
            return GroupElement(self.n, other.k - self.k, not self.reflect)
        return GroupElement(self.n, self.k + other.k, self.reflect)

    __matmul__ = compose

    def inverse(self) -> "GroupElement":
        if self.reflect:
            return self
        return GroupElement(self.n, -self.k, False)

    @property
    def is_identity(self) -> bool:
        return self.k == 0 and not self.reflect


@dataclass(frozen=True)
class FixedLine:
    """Line through the center fixed pointwise by ``kappa o xi_n^k``."""

    n: int
    k: int

    @property
    def direction(self) -> np.ndarray:
        a = self.k * math.pi / self.n
        return np.array([math.cos(a), -math.sin(a)])

    @property
    def reflection(self) -> GroupElement:
        return GroupElement(self.n, self.k, True)

    @property
    def angle(self) -> float:
        return -self.k * math.pi / self.n


def dn_elements(n: int) -> List[GroupElement]:
    """All 2n elements: rotations first, then reflections, each by k."""
    if n < 1:
        raise ValueError("group order n must be at least 1")
    return [GroupElement(n, k, a) for a in (False, True) for k in range(n)]


def z2z2_elements() -> List[GroupElement]:
    """Identity, x-axis reflection, y-axis reflection and the half turn (D_2)."""
    return dn_elements(2)


def fixed_lines(n: int) -> List[FixedLine]:
    if n < 1:
        raise ValueError("group order n must be at least 1")
    return [FixedLine(n, k) for k in range(n)]


def is_closed(elements: Sequence[GroupElement], atol: float = 1e-12) -> bool:
    """Every product of two elements matches some element's matrix."""
    mats = [g.matrix for g in elements]
    for a in mats:
        for b in mats:
            p = a @ b
            if not any(np.max(np.abs(p - c)) <= atol for c in mats):
                return False
    return True


def sample_states(cfg: Configuration, count: int, seed: int = 0, inflate: float = 0.1) -> np.ndarray:
    """SplitMix64 samples of (x, y) over the inflated bounding rectangle."""
    rect = bounding_rectangle(cfg)
    pad = inflate * max(rect.width, rect.height, 1e-3)
    rng = SplitMix64(seed)
    out = np.empty((count, 2))
    for i in range(count):
        out[i, 0] = rng.uniform_in(rect.x_min - pad, rect.x_max + pad)
        out[i, 1] = rng.uniform_in(rect.y_min - pad, rect.y_max + pad)
    return out


def _grad_at(cfg: Configuration, xy, h: float, center) -> np.ndarray:
    return eval_gradient(cfg, State(xy[0] + center[0], xy[1] + center[1], h))


def equivariance_residual(
    cfg: Configuration,
    elements: Sequence[GroupElement],
    h: float,
    samples,
    center=(0.0, 0.0),
) -> float:
    """Max over samples and elements of ``||F(g x, h) - g F(x, h)||_inf``.

    Sample coordinates are absolute; the group acts about ``center``.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise ValueError("samples must be nonempty")
    c = np.asarray(center, dtype=float)
    worst = 0.0
    for xy in samples - c:
        g0 = _grad_at(cfg, xy, h, c)
        for g in elements:
            q = g.matrix
            r = _grad_at(cfg, q @ xy, h, c) - q @ g0
            worst = max(worst, float(np.max(np.abs(r))))
    return worst


@dataclass(frozen=True)
class Certificate:
    residual: float
    scale: float
    rtol: float

    @property
    def relative(self) -> float:
        return self.residual / self.scale if self.scale > 0 else self.residual

    @property
    def ok(self) -> bool:
        return self.residual <= self.rtol * self.scale


def certify(
    cfg: Configuration,
    elements: Sequence[GroupElement],
    h: float,
    samples=None,
    center=(0.0, 0.0),
    rtol: float = 1e-10,
) -> Certificate:
    """Equivariance residual measured against the largest gradient scale seen."""
    if samples is None:
        samples = sample_states(cfg, 16)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    res = equivariance_residual(cfg, elements, h, samples, center)
    scale = max(gradient_scale(cfg, State(x, y, h)) for x, y in samples)
    return Certificate(res, scale, rtol)


def maps_points_to_itself(cfg: Configuration, g: GroupElement, center=(0.0, 0.0), rtol: float = 1e-9) -> bool:
    """Whether g (about ``center``) permutes the emitter set up to ``rtol * size``."""
    c = np.asarray(center, dtype=float)
    rel = cfg.points - c
    size = max(float(np.max(np.abs(rel))), 1e-300)
    tree = cKDTree(rel)
    dist, _ = tree.query(g.apply(rel))
    return bool(np.max(dist) <= rtol * size)


def detect_dihedral_order(cfg: Configuration, center=(0.0, 0.0), rtol: float = 1e-9) -> Optional[int]:
    """Largest n such that the emitter set is D_n invariant about ``center``.

    Only the generators (the 2 pi / n rotation and kappa) are checked.
    Returns None when not even the reflection kappa is a symmetry.
    """
    kappa = GroupElement(1, 0, True)
    if not maps_points_to_itself(cfg, kappa, center, rtol):
        return None
    off = int(np.sum(np.hypot(*(cfg.points - np.asarray(center)).T) > rtol * max(cfg.diameter(), 1e-300)))
    for n in range(max(off, 1), 0, -1):
        if off % n:
            continue
        if maps_points_to_itself(cfg, GroupElement(n, 1), center, rtol):
            return n
    return 1


def circle_critical_height(r: float, m: float) -> float:
    """Height at which the center of an evenly spaced circle of radius r
    changes from maximum to minimum of f: r * sqrt(m / 2).

    At the center every distance equals d = sqrt(r^2 + h^2), and
    sum x_i^2 = n r^2 / 2 for n >= 3 equally spaced points, so
    f_xx(0, h) = -m n d^-(m+2) (1 - (m+2) r^2 / (2 d^2)), which vanishes
    exactly when h^2 = m r^2 / 2.
    """
    if r <= 0 or m <= 0:
        raise ValueError("r and m must be positive")
    return r * math.sqrt(0.5 * m)


def circle_radius(cfg: Configuration, center=(0.0, 0.0), rtol: float = 1e-12) -> float:
    """Common distance of all emitters from ``center``; raises if they differ."""
    rad = np.hypot(*(cfg.points - np.asarray(center, dtype=float)).T)
    r = float(np.mean(rad))
    if r <= 0 or np.max(np.abs(rad - r)) > rtol * r:
        raise ValueError("configuration is not a circle about the given center")
    return r


def center_eigen(cfg: Configuration, h: float, center=(0.0, 0.0)) -> Tuple[float, float]:
    H = eval_hessian(cfg, State(center[0], center[1], h))
    return symmetric_eigen2(H[0, 0], H[0, 1], H[1, 1])[0]


def critical_height_by_bisection(
    cfg: Configuration,
    h_lo: float,
    h_hi: float,
    center=(0.0, 0.0),
    rtol: float = 1e-13,
) -> float:
    """Root in h of the largest Hessian eigenvalue at ``center``, by bisection.

    The bracket must have the eigenvalue positive at ``h_lo`` and negative
    at ``h_hi`` (the center is a minimum low down and a maximum high up).
    """
    lo, hi = float(h_lo), float(h_hi)
    f_lo = center_eigen(cfg, lo, center)[1]
    f_hi = center_eigen(cfg, hi, center)[1]
    if not (f_lo > 0 > f_hi):
        raise NoCrossing(f"no sign change of the top eigenvalue in [{lo}, {hi}]")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if center_eigen(cfg, mid, center)[1] > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def checked_circle_critical_height(cfg: Configuration, center=(0.0, 0.0), rtol: float = 1e-9) -> float:
    """Closed-form critical height, cross-checked against bisection."""
    r = circle_radius(cfg, center)
    h0 = circle_critical_height(r, cfg.m)
    hb = critical_height_by_bisection(cfg, 0.5 * h0, 2.0 * h0, center)
    if abs(hb - h0) > rtol * h0:
        raise AssertionError(f"closed form {h0!r} disagrees with bisection {hb!r}")
    return h0


def cross_derivative_at_center(cfg: Configuration, h: float, center=(0.0, 0.0), rtol: float = 1e-12) -> float:
    """d^2 F1 / dx dh at the center; checked equal to d^2 F2 / dy dh."""
    D = eval_dhessian_dh(cfg, State(center[0], center[1], h))
    a, c = float(D[0, 0]), float(D[1, 1])
    if abs(a - c) > rtol * max(abs(a), abs(c)):
        raise EquivarianceError(f"d2F1/dxdh = {a!r} differs from d2F2/dydh = {c!r}")
    return a


# restricted problem on a fixed line ----------------------------------------


def line_function(cfg: Configuration, line: FixedLine, s: float, h: float, center=(0.0, 0.0)) -> Tuple[float, float]:
    """g(s) = dir . F(c + s dir, h) and dg/ds = dir^T DF dir."""
    d = line.direction
    st = State(center[0] + s * d[0], center[1] + s * d[1], h)
    g = float(d @ eval_gradient(cfg, st))
    dg = float(d @ eval_hessian(cfg, st) @ d)
    return g, dg


def _line_floor(cfg: Configuration, line: FixedLine, s: float, h: float, center) -> float:
    d = line.direction
    return _roundoff_floor(cfg, State(center[0] + s * d[0], center[1] + s * d[1], h))


def restricted_solve(
    cfg: Configuration,
    line: FixedLine,
    h: float,
    s0: float,
    center=(0.0, 0.0),
    deflate: bool = False,
    tol: Optional[float] = None,
    max_iter: int = 50,
    s_bounds: Optional[Tuple[float, float]] = None,
) -> float:
    """Scalar Newton for g(s) = 0 along the line.

    With ``deflate`` the function g(s) / s is solved instead, which removes
    the trivial root s = 0 carried by the symmetric center.
    """
    if tol is None:
        tol = default_tolerance(cfg)
    s = float(s0)
    for _ in range(max_iter):
        g, dg = line_function(cfg, line, s, h, center)
        if abs(g) <= max(tol, _line_floor(cfg, line, s, h, center)) and not (deflate and s == 0.0):
            return s
        if deflate:
            if s == 0.0:
                raise Diverged("deflated iteration reached the trivial root")
            q, dq = g / s, dg / s - g / (s * s)
        else:
            q, dq = g, dg
        if dq == 0.0:
            raise Diverged("zero derivative in restricted Newton")
        s = s - q / dq
        if not math.isfinite(s) or (s_bounds is not None and not s_bounds[0] <= s <= s_bounds[1]):
            raise Diverged(f"restricted iterate s={s} left {s_bounds}")
    raise MaxIterations(f"restricted Newton did not converge in {max_iter} iterations")


@dataclass(frozen=True)
class RestrictedBranch:
    """Signed positions ``s`` along a fixed line versus ``h``."""

    line: FixedLine
    center: Tuple[float, float]
    s: np.ndarray
    h: np.ndarray
    residual: np.ndarray
    termination: str

    def states(self) -> List[State]:
        d = self.line.direction
        return [State(self.center[0] + s * d[0], self.center[1] + s * d[1], h) for s, h in zip(self.s, self.h)]


def restricted_continue(
    cfg: Configuration,
    line: FixedLine,
    s_range: Tuple[float, float],
    h_range: Tuple[float, float],
    center=(0.0, 0.0),
    s0: Optional[float] = None,
    steps: int = 40,
    tol: Optional[float] = None,
    certify_rtol: float = 1e-10,
) -> RestrictedBranch:
    """Continue a nontrivial root of g(s, h) on a fixed line from
    ``h_range[0]`` to ``h_range[1]``.

    The first root is found by deflated Newton from ``s0`` (default: the
    midpoint of ``s_range``); iterates must stay in ``s_range``.  Later
    points use secant prediction and plain scalar Newton with adaptive
    steps in h.  Each point is checked against the full gradient residual.

    Raises
    ------
    EquivarianceError
        The layout is not symmetric under the line's reflection, or a
        branch point has a full residual above tolerance.
    """
    if tol is None:
        tol = default_tolerance(cfg)
    c = (float(center[0]), float(center[1]))
    h_start, h_end = float(h_range[0]), float(h_range[1])
    cert = certify(cfg, [line.reflection], h_start, center=c, rtol=certify_rtol)
    if not cert.ok:
        raise EquivarianceError(f"reflection residual {cert.relative:.3e} (relative) exceeds {certify_rtol}")
    lo, hi = min(s_range), max(s_range)
    if s0 is None:
        s0 = 0.5 * (lo + hi)
    s = restricted_solve(cfg, line, h_start, s0, c, deflate=True, tol=tol, s_bounds=(lo, hi))

    d = line.direction
    ss, hs, rs = [], [], []

    def record(s_val, h_val):
        st = State(c[0] + s_val * d[0], c[1] + s_val * d[1], h_val)
        res = float(np.max(np.abs(eval_gradient(cfg, st))))
        if res > max(tol, _roundoff_floor(cfg, st)):
            raise EquivarianceError(f"full residual {res:.3e} off the line at s={s_val}, h={h_val}")
        ss.append(s_val)
        hs.append(h_val)
        rs.append(res)

    record(s, h_start)
    dh = (h_end - h_start) / steps
    h = h_start
    slope = 0.0
    termination = "h-range exhausted"
    while h != h_end:
        step = dh if abs(dh) < abs(h_end - h) else h_end - h
        if abs(step) < 1e-12 * max(abs(h_start), abs(h_end)):
            termination = "step underflow"
            break
        h_new = h + step
        guess = s + slope * step
        try:
            s_new = restricted_solve(cfg, line, h_new, guess, c, tol=tol, max_iter=12, s_bounds=(lo, hi))
            if abs(s_new) <= 1e-3 * abs(s):
                raise Diverged("fell onto the trivial root")
        except (Diverged, MaxIterations):
            dh *= 0.5
            continue
        slope = (s_new - s) / step
        s, h = s_new, (h_end if step == h_end - h else h_new)
        record(s, h)
        dh *= 1.3
    return RestrictedBranch(line, c, np.array(ss), np.array(hs), np.array(rs), termination)


__all__ = [
    "Certificate",
    "FixedLine",
    "GroupElement",
    "RestrictedBranch",
    "center_eigen",
    "certify",
    "checked_circle_critical_height",
    "circle_critical_height",
    "circle_radius",
    "critical_height_by_bisection",
    "cross_derivative_at_center",
    "detect_dihedral_order",
    "dn_elements",
    "equivariance_residual",
    "fixed_lines",
    "is_closed",
    "line_function",
    "maps_points_to_itself",
    "restricted_continue",
    "restricted_solve",
    "sample_states",
    "z2z2_elements",
]
