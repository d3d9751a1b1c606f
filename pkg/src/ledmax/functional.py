"""Energy-supply functional f = sum_i d_i^(-m) and its closed-form derivatives.

Every function here is a pure function of a :class:`Configuration` (emitter
positions in the plane z = 0 plus the exponent ``m``) and a :class:`State`
(receiver position ``(x, y)`` in the plane z = h).  Nothing is cached: the
distances are recomputed on each call.

Powers of the distance are evaluated as ``exp(-(m/2 + k) * log(d^2))`` so that
each point costs one logarithm and one exponential per power, without square
roots.  Sums run in the configuration's point order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError

M_RANGE = (3.0, 4.0)


@dataclass(frozen=True, eq=False)
class Configuration:
    """Emitter layout and exponent.

    Parameters
    ----------
    points : array_like, shape (n, 2)
        Emitter coordinates in meters.
    m : float
        Exponent of the functional.  Must lie in the open interval (3, 4)
        unless ``allow_any_m`` is set (integer-m fixtures for oracles).
    label : str, optional
    allow_any_m : bool
        Skip the (3, 4) range check; ``m > 0`` is still required.
    """

    points: np.ndarray
    m: float
    label: Optional[str] = None
    allow_any_m: bool = field(default=False, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
            raise ConfigurationError("points must be a non-empty (n, 2) array")
        if not np.all(np.isfinite(pts)):
            raise ConfigurationError("points must be finite")
        m = float(self.m)
        if not math.isfinite(m) or m <= 0:
            raise ConfigurationError(f"exponent m must be positive, got {m}")
        if not self.allow_any_m and not (M_RANGE[0] < m < M_RANGE[1]):
            raise ConfigurationError(
                f"exponent m={m} outside ({M_RANGE[0]}, {M_RANGE[1]}); "
                "pass allow_any_m=True to override"
            )
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "m", m)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def xs(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def ys(self) -> np.ndarray:
        return self.points[:, 1]

    def diameter(self) -> float:
        """Diagonal of the bounding rectangle."""
        span = self.points.max(axis=0) - self.points.min(axis=0)
        return float(np.hypot(*span))

    def translated(self, t) -> "Configuration":
        return self._with_points(self.points + np.asarray(t, dtype=float))

    def transformed(self, matrix) -> "Configuration":
        """Apply a 2x2 linear map to every point."""
        return self._with_points(self.points @ np.asarray(matrix, dtype=float).T)

    def with_m(self, m: float) -> "Configuration":
        return Configuration(self.points, m, self.label, self.allow_any_m)

    def with_point(self, j: int, xy) -> "Configuration":
        pts = self.points.copy()
        pts[j] = xy
        return self._with_points(pts)

    def _with_points(self, pts) -> "Configuration":
        return Configuration(pts, self.m, self.label, self.allow_any_m)


@dataclass(frozen=True)
class State:
    """Receiver position (x, y) at plane separation h > 0, in meters."""

    x: float
    y: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "h"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ConfigurationError(f"state coordinate {name} is not finite")
            object.__setattr__(self, name, v)
        if self.h <= 0:
            raise ConfigurationError(f"h must be positive, got {self.h}")

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def u(self) -> np.ndarray:
        """(x, y, h) as a 3-vector."""
        return np.array([self.x, self.y, self.h])

    @classmethod
    def from_vector(cls, u) -> "State":
        return cls(float(u[0]), float(u[1]), float(u[2]))


@dataclass(frozen=True)
class Derivatives:
    """Value, gradient F = (F1, F2), Hessian DF and parameter sensitivities."""

    f: float
    grad: np.ndarray
    f_xx: float
    f_xy: float
    f_yy: float
    dF_dh: np.ndarray
    dF_dm: np.ndarray

    @property
    def hess(self) -> np.ndarray:
        return np.array([[self.f_xx, self.f_xy], [self.f_xy, self.f_yy]])


@dataclass(frozen=True)
class ThirdTensor:
    """The four independent third derivatives of f in (x, y)."""

    xxx: float
    xxy: float
    xyy: float
    yyy: float

    def as_array(self) -> np.ndarray:
        """Full symmetric tensor T[i, j, k] = d^3 f / dx_i dx_j dx_k."""
        t = np.empty((2, 2, 2))
        t[0, 0, 0] = self.xxx
        t[0, 0, 1] = t[0, 1, 0] = t[1, 0, 0] = self.xxy
        t[0, 1, 1] = t[1, 0, 1] = t[1, 1, 0] = self.xyy
        t[1, 1, 1] = self.yyy
        return t


class _Terms:
    """Per-point offsets and distance powers at one state."""

    __slots__ = ("m", "dx", "dy", "d2", "log_d2", "h")

    def __init__(self, cfg: Configuration, s: State):
        self.m = cfg.m
        self.h = s.h
        self.dx = s.x - cfg.xs
        self.dy = s.y - cfg.ys
        self.d2 = self.dx * self.dx + self.dy * self.dy + s.h * s.h
        self.log_d2 = np.log(self.d2)

    def power(self, k: int) -> np.ndarray:
        """d^-(m + 2k)."""
        return np.exp(-(0.5 * self.m + k) * self.log_d2)


def eval_f(cfg: Configuration, s: State) -> float:
    t = _Terms(cfg, s)
    return float(np.sum(t.power(0)))


def eval_gradient(cfg: Configuration, s: State) -> np.ndarray:
    t = _Terms(cfg, s)
    return _gradient(t, t.power(1))


def _gradient(t: _Terms, p1) -> np.ndarray:
    return np.array([-t.m * np.sum(t.dx * p1), -t.m * np.sum(t.dy * p1)])


def _hessian_entries(t: _Terms, p1, p2):
    m = t.m
    f_xx = -m * np.sum(p1 - (m + 2) * t.dx * t.dx * p2)
    f_yy = -m * np.sum(p1 - (m + 2) * t.dy * t.dy * p2)
    f_xy = m * (m + 2) * np.sum(t.dx * t.dy * p2)
    return float(f_xx), float(f_xy), float(f_yy)


def eval_hessian(cfg: Configuration, s: State) -> np.ndarray:
    t = _Terms(cfg, s)
    a, b, c = _hessian_entries(t, t.power(1), t.power(2))
    return np.array([[a, b], [b, c]])


def eval_dF_dh(cfg: Configuration, s: State) -> np.ndarray:
    t = _Terms(cfg, s)
    return _dF_dh(t, t.power(2))


def _dF_dh(t: _Terms, p2) -> np.ndarray:
    k = t.m * (t.m + 2) * t.h
    return np.array([k * np.sum(t.dx * p2), k * np.sum(t.dy * p2)])


def eval_dF_dsource(cfg: Configuration, s: State, j: int) -> np.ndarray:
    """Sensitivity of F to the j-th emitter position.

    Returns the 2x2 block ``[[dF1/dx_j, dF1/dy_j], [dF2/dx_j, dF2/dy_j]]``,
    which is the negated j-th summand of the Hessian.
    """
    if not -cfg.n <= j < cfg.n:
        raise IndexError(f"source index {j} out of range for n={cfg.n}")
    m = cfg.m
    dx = s.x - cfg.xs[j]
    dy = s.y - cfg.ys[j]
    d2 = dx * dx + dy * dy + s.h * s.h
    log_d2 = math.log(d2)
    p1 = math.exp(-(0.5 * m + 1) * log_d2)
    p2 = math.exp(-(0.5 * m + 2) * log_d2)
    a = -m * p1 * (-1 + (m + 2) * dx * dx / d2)
    c = -m * p1 * (-1 + (m + 2) * dy * dy / d2)
    b = -m * (m + 2) * dx * dy * p2
    return np.array([[a, b], [b, c]])


def eval_dF_dm(cfg: Configuration, s: State) -> np.ndarray:
    t = _Terms(cfg, s)
    return _dF_dm(t, t.power(1))


def _dF_dm(t: _Terms, p1) -> np.ndarray:
    # ln d_i = log(d_i^2) / 2
    w = p1 * (-1 + t.m * 0.5 * t.log_d2)
    return np.array([np.sum(t.dx * w), np.sum(t.dy * w)])


def eval_third(cfg: Configuration, s: State) -> ThirdTensor:
    t = _Terms(cfg, s)
    m = t.m
    p2 = t.power(2)
    ex = t.dx * t.dx / t.d2
    ey = t.dy * t.dy / t.d2
    k = m * (m + 2)
    xxx = k * np.sum(t.dx * p2 * (1 + (-(m + 2) * t.dx * t.dx + 2 * (t.dy * t.dy + t.h * t.h)) / t.d2))
    xxy = k * np.sum(t.dy * p2 * (1 - (m + 4) * ex))
    xyy = k * np.sum(t.dx * p2 * (1 - (m + 4) * ey))
    yyy = k * np.sum(t.dy * p2 * (1 + (-(m + 2) * t.dy * t.dy + 2 * (t.dx * t.dx + t.h * t.h)) / t.d2))
    return ThirdTensor(float(xxx), float(xxy), float(xyy), float(yyy))


def eval_dhessian_dh(cfg: Configuration, s: State) -> np.ndarray:
    """Derivative of the Hessian with respect to h (symmetric 2x2)."""
    t = _Terms(cfg, s)
    m = t.m
    p2 = t.power(2)
    p3 = t.power(3)
    k = m * (m + 2) * t.h
    a = k * np.sum(p2 - (m + 4) * t.dx * t.dx * p3)
    c = k * np.sum(p2 - (m + 4) * t.dy * t.dy * p3)
    b = -k * (m + 4) * np.sum(t.dx * t.dy * p3)
    return np.array([[a, b], [b, c]])


def evaluate(cfg: Configuration, s: State) -> Derivatives:
    """All first- and second-order quantities from a single pass."""
    t = _Terms(cfg, s)
    p0, p1, p2 = t.power(0), t.power(1), t.power(2)
    a, b, c = _hessian_entries(t, p1, p2)
    return Derivatives(
        f=float(np.sum(p0)),
        grad=_gradient(t, p1),
        f_xx=a,
        f_xy=b,
        f_yy=c,
        dF_dh=_dF_dh(t, p2),
        dF_dm=_dF_dm(t, p1),
    )


def hessian_scale(cfg: Configuration, s: State) -> float:
    """Cancellation-free magnitude m * sum_i d_i^-(m+2) of the Hessian entries.

    Used as the reference for degeneracy and singularity thresholds.  At
    symmetric points the Hessian entries themselves can cancel down to
    roundoff, so they cannot serve as their own scale.
    """
    t = _Terms(cfg, s)
    return float(cfg.m * np.sum(t.power(1)))


def gradient_scale(cfg: Configuration, s: State) -> float:
    """m * sum_i |x - x_i| d_i^-(m+2): the size of the terms summed in F."""
    t = _Terms(cfg, s)
    return float(cfg.m * np.sum(np.hypot(t.dx, t.dy) * t.power(1)))


def lambertian_order(semi_angle_deg: float) -> float:
    """Lambertian emission order -ln 2 / ln cos(semi-angle at half illuminance)."""
    if not 0.0 < semi_angle_deg < 90.0:
        raise ValueError(f"semi-angle must be in (0, 90) degrees, got {semi_angle_deg}")
    return -math.log(2.0) / math.log(math.cos(math.radians(semi_angle_deg)))


def lambertian_exponent(semi_angle_deg: float) -> float:
    """Exponent m = m_l + 3 of the functional for an LED of the given semi-angle."""
    return 3.0 + lambertian_order(semi_angle_deg)
