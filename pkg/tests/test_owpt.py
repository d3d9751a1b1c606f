import math

import numpy as np
import pytest

from ledmax.functional import Configuration, State, eval_f
from ledmax.owpt import OwptParams, h_sweep, los_gain, power_map, total_power

P = OwptParams()


def test_params():
    assert P.order == pytest.approx(0.6460588, abs=1e-7)
    assert P.exponent == pytest.approx(3.6460588, abs=1e-7)
    for bad in (dict(area=0.0), dict(led_power=-1.0), dict(semi_angle=90.0), dict(fov=0.0)):
        with pytest.raises(ValueError):
            OwptParams(**bad)


def test_gain_directly_below():
    h = 1.6
    expected = (P.order + 1) * P.area / (2 * math.pi * h * h)
    assert los_gain(P, (0.0, 0.0), (0.0, 0.0), h) == pytest.approx(expected, rel=1e-14)
    assert los_gain(P, (0.0, 0.0), (0.0, 0.0), h) == pytest.approx(2.55838e-5, abs=5e-10)
    assert total_power(P, [[0.0, 0.0]], (0.0, 0.0), h) == pytest.approx(0.1 * expected, rel=1e-14)


def test_gain_off_axis():
    h, r = 1.0, 0.5
    d = math.hypot(r, h)
    expected = (P.order + 1) * P.area / (2 * math.pi * d * d) * (h / d) ** (P.order + 1)
    assert los_gain(P, (r, 0.0), (0.0, 0.0), h) == pytest.approx(expected, rel=1e-14)


def test_fov_cutoff():
    h = 1.0
    # tan(60 deg) = sqrt(3): just inside and just outside the cone
    inside = los_gain(P, (math.sqrt(3) * 0.999, 0.0), (0.0, 0.0), h)
    outside = los_gain(P, (math.sqrt(3) * 1.001, 0.0), (0.0, 0.0), h)
    assert inside > 0 and outside == 0.0


def test_gain_homogeneity():
    # doubling every length scales the gain by 2^-2
    a = los_gain(P, (0.3, -0.1), (0.05, 0.2), 0.7)
    b = los_gain(P, (0.6, -0.2), (0.1, 0.4), 1.4)
    assert b == pytest.approx(a / 4, rel=1e-13)


def test_power_identity(circle):
    for recv, h in (((0.0, 0.0), 1.5), ((0.4, -0.3), 2.0), ((1.1, 0.2), 3.0)):
        p = total_power(P, circle, recv, h)
        ref = P.prefactor(h) * eval_f(Configuration(circle.points, P.exponent), State(recv[0], recv[1], h))
        assert abs(p - ref) <= 1e-12 * ref


def test_power_map_identity_on_unflagged(circle):
    pm = power_map(P, circle, 0.8, (-1.5, 1.5, -1.5, 1.5), (41, 41))
    assert pm.flagged.any() and not pm.flagged.all()
    cfg = Configuration(circle.points, P.exponent)
    for j, y in enumerate(pm.ys):
        for i, x in enumerate(pm.xs):
            if not pm.flagged[j, i]:
                ref = P.prefactor(0.8) * eval_f(cfg, State(x, y, 0.8))
                assert abs(pm.values[j, i] - ref) <= 1e-12 * ref


def test_power_map_layout(circle):
    pm = power_map(P, circle, 1.0, (-1.0, 1.0, -0.5, 0.5), (5, 3))
    assert pm.values.shape == (3, 5)
    assert pm.resolution == (5, 3) and pm.extents == (-1.0, 1.0, -0.5, 0.5)
    assert pm.values[2, 4] == total_power(P, circle, (1.0, 0.5), 1.0, check=False)
    with pytest.raises(ValueError):
        power_map(P, circle, 1.0, (-1, 1, -1, 1), (1, 5))


def test_circle_map_has_twenty_maxima(circle):
    pm = power_map(P, circle, 0.1, (-1.25, 1.25, -1.25, 1.25), (251, 251))
    peaks = pm.local_maxima()
    assert len(peaks) == 20
    for i, j in peaks:
        assert math.hypot(pm.xs[i], pm.ys[j]) == pytest.approx(1.2, abs=0.02)


def test_lattice_map_unique_center_maximum(lattice):
    pm = power_map(P, lattice, 1.6, (-0.6, 0.6, -0.6, 0.6), (121, 121))
    assert pm.local_maxima() == [(60, 60)]
    assert pm.argmax() == (60, 60)
    assert pm.xs[60] == 0.0 and pm.ys[60] == 0.0


def test_map_symmetry(lattice):
    pm = power_map(P, lattice, 0.3, (-0.3, 0.3, -0.3, 0.3), (31, 31))
    v = pm.values
    assert np.max(np.abs(v - v[::-1, :])) <= 1e-12 * v.max()
    assert np.max(np.abs(v - v[:, ::-1])) <= 1e-12 * v.max()


def test_linear_in_led_power(circle):
    a = power_map(P, circle, 0.5, (-1, 1, -1, 1), (11, 11)).values
    b = power_map(OwptParams(led_power=0.3), circle, 0.5, (-1, 1, -1, 1), (11, 11)).values
    assert np.max(np.abs(b - 3 * a)) <= 1e-12 * b.max()


def test_sweep_single_led_monotone():
    sw = h_sweep(P, [[0.0, 0.0]], (0.0, 0.0), (0.01, 1.0), 50)
    assert sw.interior_argmax is None
    assert np.all(np.diff(sw.watts) < 0)


def test_sweep_lattice_interior_peak(lattice):
    sw = h_sweep(P, lattice, (0.0, 0.0), (0.01, 1.0), 200)
    assert np.all(np.diff(sw.h) > 0)
    assert sw.interior_argmax == pytest.approx(0.085, abs=0.002)
    geo = h_sweep(P, lattice, (0.0, 0.0), (0.01, 1.0), 50, geometric=True)
    assert geo.h[0] == pytest.approx(0.01) and geo.h[-1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        h_sweep(P, lattice, (0.0, 0.0), (1.0, 0.5))
