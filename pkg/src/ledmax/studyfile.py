"""Study configuration files (JSON) and the layout generators.

The writer is canonical: one point per line, floats in shortest
round-trip form, fixed key order.  Parsing a file and writing it again
reproduces it byte for byte.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .errors import ConfigurationError
from .functional import Configuration, lambertian_exponent
from .rng import SplitMix64

DEFAULT_SEMI_ANGLE = 70.0


@dataclass(frozen=True)
class OwptBlock:
    area_m2: float = 2.5e-4
    fov_deg: float = 60.0
    led_power_w: float = 0.1


@dataclass(frozen=True)
class StudyConfigFile:
    """Emitter points, the exponent (``m`` or a semi-angle), and optional
    power-model parameters and symmetry hint (``{"dn": n}`` or
    ``{"z2z2": true}``)."""

    points: Tuple[Tuple[float, float], ...]
    m: Optional[float] = None
    semi_angle_deg: Optional[float] = None
    owpt: Optional[OwptBlock] = None
    symmetry: Optional[dict] = None
    label: Optional[str] = None

    def __post_init__(self):
        if (self.m is None) == (self.semi_angle_deg is None):
            raise ConfigurationError("exactly one of m and semi_angle_deg must be given")
        pts = tuple((float(x), float(y)) for x, y in self.points)
        if not pts:
            raise ConfigurationError("points must be non-empty")
        object.__setattr__(self, "points", pts)
        if self.symmetry is not None:
            keys = set(self.symmetry)
            if keys not in ({"dn"}, {"z2z2"}):
                raise ConfigurationError(f"unknown symmetry hint {self.symmetry}")

    @property
    def exponent(self) -> float:
        if self.m is not None:
            return float(self.m)
        return lambertian_exponent(self.semi_angle_deg)

    def configuration(self, allow_any_m: bool = False) -> Configuration:
        return Configuration(self.points, self.exponent, self.label, allow_any_m)

    def dumps(self) -> str:
        lines = ["{"]
        if self.label is not None:
            lines.append(f'  "label": {json.dumps(self.label)},')
        lines.append('  "points": [')
        body = [f"    [{_num(x)}, {_num(y)}]" for x, y in self.points]
        lines.append(",\n".join(body))
        lines.append("  ],")
        if self.m is not None:
            exp = f'{{"m": {_num(self.m)}}}'
        else:
            exp = f'{{"semi_angle_deg": {_num(self.semi_angle_deg)}}}'
        tail = [f'  "exponent": {exp}']
        if self.owpt is not None:
            o = self.owpt
            tail.append(
                f'  "owpt": {{"area_m2": {_num(o.area_m2)}, "fov_deg": {_num(o.fov_deg)}, '
                f'"led_power_w": {_num(o.led_power_w)}}}'
            )
        if self.symmetry is not None:
            (key, value), = self.symmetry.items()
            tail.append(f'  "symmetry": {{{json.dumps(key)}: {json.dumps(value)}}}')
        lines.append(",\n".join(tail))
        lines.append("}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "StudyConfigFile":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"invalid JSON: {exc}") from exc
        if not isinstance(doc, dict) or "points" not in doc or "exponent" not in doc:
            raise ConfigurationError("config needs 'points' and 'exponent'")
        exp = doc["exponent"]
        if not isinstance(exp, dict) or set(exp) not in ({"m"}, {"semi_angle_deg"}):
            raise ConfigurationError("exponent must be {'m': v} or {'semi_angle_deg': v}")
        try:
            points = tuple((float(p[0]), float(p[1])) for p in doc["points"] if len(p) == 2)
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigurationError("points must be [x, y] pairs") from exc
        if len(points) != len(doc["points"]):
            raise ConfigurationError("points must be [x, y] pairs")
        owpt = None
        if "owpt" in doc:
            o = doc["owpt"]
            owpt = OwptBlock(float(o["area_m2"]), float(o["fov_deg"]), float(o["led_power_w"]))
        return cls(
            points=points,
            m=exp.get("m"),
            semi_angle_deg=exp.get("semi_angle_deg"),
            owpt=owpt,
            symmetry=doc.get("symmetry"),
            label=doc.get("label"),
        )


def _num(v: float) -> str:
    v = float(v)
    if not math.isfinite(v):
        raise ConfigurationError("non-finite number in config")
    return repr(v)


# generators ------------------------------------------------------------------


def gen_circle(n: int, r: float, semi_angle_deg: float = DEFAULT_SEMI_ANGLE) -> StudyConfigFile:
    """n points evenly spaced on a circle of radius r, starting at (r, 0)."""
    if n < 1 or r <= 0:
        raise ConfigurationError("need n >= 1 and r > 0")
    pts = [(r * math.cos(2 * math.pi * k / n), r * math.sin(2 * math.pi * k / n)) for k in range(n)]
    return StudyConfigFile(
        tuple(pts),
        semi_angle_deg=semi_angle_deg,
        owpt=OwptBlock(),
        symmetry={"dn": n},
        label=f"circle n={n} r={r!r}",
    )


def lattice_points(
    per_row: int = 112,
    dx: float = 0.01,
    cross_gap: float = 0.02,
    array_gap: float = 0.1,
    pair_gap: float = 0.01,
    layout: str = "paired",
) -> List[Tuple[float, float]]:
    """Four straight LED arrays, symmetric under both axis reflections.

    ``layout="paired"``: arrays parallel to the y-axis at
    x = +/-array_gap/2 and +/-(array_gap/2 + pair_gap); along each array the
    LEDs sit at y = +/-(cross_gap/2 + dx*j), j < per_row/2, leaving a gap of
    ``cross_gap`` across the x-axis.

    ``layout="rows"``: arrays parallel to the x-axis at
    y = +/-cross_gap/2 and +/-(cross_gap/2 + array_gap), with LEDs at the
    centered positions x = (j - (per_row-1)/2) * dx.
    """
    if per_row < 1 or dx <= 0 or cross_gap < 0 or array_gap <= 0 or pair_gap <= 0:
        raise ConfigurationError("lattice spacings must be positive")
    pts: List[Tuple[float, float]] = []
    if layout == "paired":
        if per_row % 2:
            raise ConfigurationError("paired layout needs an even per_row")
        half = per_row // 2
        columns = [
            -(array_gap / 2 + pair_gap),
            -array_gap / 2,
            array_gap / 2,
            array_gap / 2 + pair_gap,
        ]
        along = [-(cross_gap / 2 + dx * j) for j in reversed(range(half))]
        along += [cross_gap / 2 + dx * j for j in range(half)]
        for x in columns:
            pts.extend((x, y) for y in along)
    elif layout == "rows":
        rows = [
            -(cross_gap / 2 + array_gap),
            -cross_gap / 2,
            cross_gap / 2,
            cross_gap / 2 + array_gap,
        ]
        xs = [(j - (per_row - 1) / 2) * dx for j in range(per_row)]
        for y in rows:
            pts.extend((x, y) for x in xs)
    else:
        raise ConfigurationError(f"unknown lattice layout {layout!r}")
    return pts


def gen_lattice(
    per_row: int = 112,
    dx: float = 0.01,
    cross_gap: float = 0.02,
    array_gap: float = 0.1,
    pair_gap: float = 0.01,
    layout: str = "paired",
    semi_angle_deg: float = DEFAULT_SEMI_ANGLE,
) -> StudyConfigFile:
    pts = lattice_points(per_row, dx, cross_gap, array_gap, pair_gap, layout)
    return StudyConfigFile(
        tuple(pts),
        semi_angle_deg=semi_angle_deg,
        owpt=OwptBlock(),
        symmetry={"z2z2": True},
        label=f"lattice {layout} per_row={per_row}",
    )


def gen_random(n: int, extent: float, seed: int, semi_angle_deg: float = DEFAULT_SEMI_ANGLE) -> StudyConfigFile:
    """n points uniform on [-extent/2, extent/2]^2 from SplitMix64(seed),
    drawn in the order x0, y0, x1, y1, ..."""
    if n < 1 or extent <= 0:
        raise ConfigurationError("need n >= 1 and extent > 0")
    rng = SplitMix64(seed)
    pts = []
    for _ in range(n):
        x = (rng.uniform() - 0.5) * extent
        y = (rng.uniform() - 0.5) * extent
        pts.append((x, y))
    return StudyConfigFile(
        tuple(pts),
        semi_angle_deg=semi_angle_deg,
        owpt=OwptBlock(),
        label=f"random n={n} extent={extent!r} seed={seed}",
    )
