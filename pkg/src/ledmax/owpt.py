"""Line-of-sight optical power received from an LED array.

For an emitter plane and a parallel receiver plane a distance h apart, the
incidence and irradiance angles coincide and cos(angle) = h / d.  The gain of
one link with Lambertian order m_l and receiver area A is

    G = (m_l + 1) A / (2 pi d^2) * (h / d)^(m_l + 1)

inside the receiver field of view and zero outside.  Summed over LEDs this is
``(m_l + 1) A h^(m_l + 1) / (2 pi) * f`` with exponent m = m_l + 3, as long as
no link is cut off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .functional import Configuration, State, eval_f, lambertian_order


@dataclass(frozen=True)
class OwptParams:
    area: float = 2.5e-4
    semi_angle: float = 70.0
    fov: float = 60.0
    led_power: float = 0.1

    def __post_init__(self):
        if self.area <= 0 or self.led_power <= 0:
            raise ValueError("area and led_power must be positive")
        if not 0 < self.semi_angle < 90:
            raise ValueError("semi_angle must be in (0, 90) degrees")
        if not 0 < self.fov <= 90:
            raise ValueError("fov must be in (0, 90] degrees")

    @property
    def order(self) -> float:
        """Lambertian order m_l."""
        return lambertian_order(self.semi_angle)

    @property
    def exponent(self) -> float:
        return self.order + 3.0

    def prefactor(self, h: float) -> float:
        """led_power * (m_l + 1) A h^(m_l + 1) / (2 pi)."""
        ml = self.order
        return self.led_power * (ml + 1) * self.area * h ** (ml + 1) / (2 * math.pi)


def _link_gains(params: OwptParams, leds: np.ndarray, recv, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """Per-LED gains and the mask of links outside the field of view."""
    if h <= 0:
        raise ValueError("h must be positive")
    ml = params.order
    dx = recv[0] - leds[:, 0]
    dy = recv[1] - leds[:, 1]
    d2 = dx * dx + dy * dy + h * h
    cos_in = h / np.sqrt(d2)
    cut = cos_in < math.cos(math.radians(params.fov))
    gain = (ml + 1) * params.area / (2 * math.pi * d2) * cos_in ** (ml + 1)
    return np.where(cut, 0.0, gain), cut


def los_gain(params: OwptParams, led, recv, h: float) -> float:
    g, _ = _link_gains(params, np.atleast_2d(np.asarray(led, dtype=float)), np.asarray(recv, dtype=float), h)
    return float(g[0])


def _geometry(cfg) -> np.ndarray:
    return cfg.points if isinstance(cfg, Configuration) else np.atleast_2d(np.asarray(cfg, dtype=float))


def total_power(params: OwptParams, cfg, recv, h: float, check: bool = True) -> float:
    """Received power in watts, ``led_power * sum_i G_i``.

    When no link is cut off and ``check`` is set, the result is asserted
    equal to ``prefactor(h) * f`` with exponent ``m_l + 3``.
    """
    leds = _geometry(cfg)
    recv = np.asarray(recv, dtype=float)
    g, cut = _link_gains(params, leds, recv, h)
    p = params.led_power * float(np.sum(g))
    if check and not cut.any():
        ref = params.prefactor(h) * _f_value(params, leds, recv, h)
        if abs(p - ref) > 1e-12 * abs(ref):
            raise AssertionError(f"power {p!r} differs from prefactor * f = {ref!r}")
    return p


def _f_value(params: OwptParams, leds: np.ndarray, recv, h: float) -> float:
    cfg = Configuration(leds, params.exponent, allow_any_m=True)
    return eval_f(cfg, State(recv[0], recv[1], h))


@dataclass(frozen=True)
class PowerMap:
    """Received power on a grid; ``values[j, i]`` is at ``(xs[i], ys[j])``.

    ``flagged[j, i]`` marks cells where at least one LED is outside the
    field of view.
    """

    xs: np.ndarray
    ys: np.ndarray
    h: float
    values: np.ndarray
    flagged: np.ndarray

    @property
    def extents(self) -> Tuple[float, float, float, float]:
        return float(self.xs[0]), float(self.xs[-1]), float(self.ys[0]), float(self.ys[-1])

    @property
    def resolution(self) -> Tuple[int, int]:
        return len(self.xs), len(self.ys)

    def local_maxima(self) -> list:
        """Interior cells strictly greater than all 8 neighbours, as (i, j)."""
        v = self.values
        core = v[1:-1, 1:-1]
        mask = np.ones_like(core, dtype=bool)
        for dj in (-1, 0, 1):
            for di in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                mask &= core > v[1 + dj : v.shape[0] - 1 + dj, 1 + di : v.shape[1] - 1 + di]
        js, is_ = np.nonzero(mask)
        return [(int(i) + 1, int(j) + 1) for j, i in zip(js, is_)]

    def argmax(self) -> Tuple[int, int]:
        j, i = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return int(i), int(j)


def power_map(
    params: OwptParams,
    cfg,
    h: float,
    extents: Sequence[float],
    resolution: Sequence[int],
) -> PowerMap:
    """Evaluate total_power on an ``nx x ny`` grid of nodes spanning
    ``extents = (x_min, x_max, y_min, y_max)``, row by row."""
    x_min, x_max, y_min, y_max = map(float, extents)
    nx, ny = (int(resolution[0]), int(resolution[1])) if len(resolution) == 2 else (int(resolution[0]),) * 2
    if nx < 2 or ny < 2:
        raise ValueError("resolution must be at least 2 per axis")
    leds = _geometry(cfg)
    xs = np.linspace(x_min, x_max, nx)
    ys = np.linspace(y_min, y_max, ny)
    ml = params.order
    cos_fov = math.cos(math.radians(params.fov))
    # vectorized over a row of cells at a time
    values = np.empty((ny, nx))
    flagged = np.empty((ny, nx), dtype=bool)
    dx = xs[:, None] - leds[None, :, 0]
    for j, y in enumerate(ys):
        dy = y - leds[None, :, 1]
        d2 = dx * dx + dy * dy + h * h
        cos_in = h / np.sqrt(d2)
        cut = cos_in < cos_fov
        gain = (ml + 1) * params.area / (2 * math.pi * d2) * cos_in ** (ml + 1)
        values[j] = params.led_power * np.sum(np.where(cut, 0.0, gain), axis=1)
        flagged[j] = cut.any(axis=1)
    return PowerMap(xs, ys, float(h), values, flagged)


@dataclass(frozen=True)
class HSweep:
    h: np.ndarray
    watts: np.ndarray

    @property
    def interior_argmax(self) -> Optional[float]:
        """h of the largest sample if it is not at either end of the sweep."""
        k = int(np.argmax(self.watts))
        if 0 < k < len(self.h) - 1:
            return float(self.h[k])
        return None


def h_sweep(
    params: OwptParams,
    cfg,
    recv,
    h_range: Tuple[float, float],
    steps: int = 200,
    geometric: bool = False,
) -> HSweep:
    """Received power at ``recv`` for h on a linear (or geometric) grid."""
    lo, hi = float(h_range[0]), float(h_range[1])
    if not 0 < lo < hi:
        raise ValueError("h_range must satisfy 0 < lo < hi")
    if steps < 2:
        raise ValueError("steps must be at least 2")
    hs = np.geomspace(lo, hi, steps) if geometric else np.linspace(lo, hi, steps)
    watts = np.array([total_power(params, cfg, recv, h, check=False) for h in hs])
    return HSweep(hs, watts)
