"""Layer profile, geometry, double well and the stationary Hele-Shaw reference."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sharpflow.interface_profile import (
    Circle,
    ClearanceError,
    FlatStrip,
    ProfileParams,
    check_clearance,
    double_well,
    hele_shaw_circle_check,
    limit_indicator,
    potential_field,
    profile_field,
    profile_grid,
    profile_shape,
    signed_distance,
    surface_tension,
)
from sharpflow.spectral_core import laplacian, to_grid

SQRT2 = math.sqrt(2.0)
CIRCLE = Circle((0.5, 0.5), 0.25)


class TestGeometry:
    @pytest.mark.parametrize("x, d", [((0.5, 0.5), -0.25), ((0.75, 0.5), 0.0), ((1.0, 0.5), 0.25)])
    def test_signed_distance_circle(self, x, d):
        assert signed_distance(CIRCLE, x) == pytest.approx(d, abs=1e-15)

    def test_signed_distance_strip(self):
        assert signed_distance(FlatStrip(0.3, 2), (0.9, 0.5)) == pytest.approx(0.2)

    def test_curvatures(self):
        assert CIRCLE.curvature == 4.0 and FlatStrip().curvature == 0.0

    @pytest.mark.parametrize("geom, eps", [(CIRCLE, 0.07), (Circle((0.3, 0.5), 0.2), 0.03), (FlatStrip(0.1), 0.03)])
    def test_clearance_violation(self, geom, eps):
        with pytest.raises(ClearanceError, match="clearance"):
            check_clearance(geom, eps)

    def test_clearance_ok(self):
        check_clearance(CIRCLE, 0.0625)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            Circle((0.5, 0.5), -0.1)
        with pytest.raises(ValueError):
            FlatStrip(0.5, 3)


class TestDoubleWell:
    @pytest.mark.parametrize("u", [-1.0, 1.0])
    def test_wells(self, u):
        F, f, _, _ = double_well(u)
        assert F == 0.0 and f == 0.0

    def test_origin(self):
        F, f, fp, fpp = double_well(0.0)
        assert (F, f, fp, fpp) == (0.25, 0.0, -1.0, 0.0)

    def test_u2(self):
        F, f, _, _ = double_well(2.0)
        assert F == pytest.approx(2.25) and f == pytest.approx(6.0)

    @settings(max_examples=50)
    @given(st.floats(-3, 3))
    def test_derivatives(self, u):
        h = 1e-6
        F, f, fp, fpp = double_well(u)
        assert f == pytest.approx((double_well(u + h)[0] - double_well(u - h)[0]) / (2 * h), abs=1e-6)
        assert fp == pytest.approx((double_well(u + h)[1] - double_well(u - h)[1]) / (2 * h), abs=1e-6)
        assert fpp == pytest.approx((double_well(u + h)[2] - double_well(u - h)[2]) / (2 * h), abs=1e-6)


class TestSurfaceTension:
    @pytest.mark.parametrize("formula, value", [
        ("paper", 2 * SQRT2 / 15), ("classical", 2 * SQRT2 / 3), ("matched", -SQRT2 / 3),
    ])
    def test_closed_forms(self, formula, value):
        assert surface_tension(formula) == pytest.approx(value, rel=1e-12)

    def test_unknown(self):
        with pytest.raises(ValueError):
            surface_tension("nope")


class TestProfile:
    def test_centre_value(self):
        assert profile_shape(0.0) == 0.0

    def test_standing_wave_ode(self):
        # theta'' = theta^3 - theta for theta(z) = tanh(z / sqrt 2)
        z = np.linspace(-4, 4, 41)
        h = 1e-4
        d2 = (profile_shape(z + h) - 2 * profile_shape(z) + profile_shape(z - h)) / h**2
        th = profile_shape(z)
        np.testing.assert_allclose(d2, th**3 - th, atol=1e-6)

    def test_strip_identity(self):
        eps = 0.02
        u = profile_field(FlatStrip(0.5), ProfileParams(eps), 256)
        res = -eps * to_grid(laplacian(u)) + double_well(to_grid(u))[1] / eps
        assert np.max(np.abs(res)) <= 1e-6

    @settings(max_examples=30)
    @given(st.floats(0.0, 0.4))
    def test_strip_odd(self, s):
        geom, p = FlatStrip(0.5), ProfileParams(0.02)
        plus = profile_shape(signed_distance(geom, np.array([0.5 + s, 0.3])) / p.eps)
        minus = profile_shape(signed_distance(geom, np.array([0.5 - s, 0.3])) / p.eps)
        assert plus == pytest.approx(-minus, abs=1e-12)

    def test_projection_error(self):
        eps = 0.01
        g = profile_grid(CIRCLE, ProfileParams(eps), 512)
        u = profile_field(CIRCLE, ProfileParams(eps), 256)
        assert np.max(np.abs(to_grid(u, 512) - g)) <= 1e-6

    def test_mass(self):
        for eps in (0.04, 0.02, 0.01):
            u = profile_field(CIRCLE, ProfileParams(eps), 128)
            assert abs(u.mean - (1 - 2 * math.pi * 0.25**2)) <= 5 * eps

    def test_thin_interface_area(self):
        areas = [np.mean(np.abs(profile_grid(CIRCLE, ProfileParams(e), 512)) < 0.9) for e in (0.04, 0.02, 0.01)]
        ratios = [b / a for a, b in zip(areas, areas[1:])]
        assert all(0.4 <= r <= 0.6 for r in ratios)


class TestPotential:
    def test_circle(self):
        w = potential_field(CIRCLE, ProfileParams(0.02), 16)
        assert w.mean == pytest.approx(0.754247233265651, rel=1e-12)
        assert np.all(w.coeffs.ravel()[1:] == 0.0)

    def test_strip_zero(self):
        assert np.all(potential_field(FlatStrip(), ProfileParams(0.02), 8).coeffs == 0.0)

    @pytest.mark.parametrize("R, factor", [(0.25, 4.0), (0.5, 2.0)])
    def test_hele_shaw(self, R, factor):
        v, V = hele_shaw_circle_check(Circle((0.5, 0.5), R), 0.3)
        assert v == pytest.approx(factor * 0.3) and V == 0.0

    def test_hele_shaw_area_preserved(self):
        # zero normal velocity leaves pi R^2 unchanged
        _, V = hele_shaw_circle_check(Circle((0.4, 0.6), 0.1), 1.0)
        assert V == 0.0

    def test_hele_shaw_requires_circle(self):
        with pytest.raises(TypeError):
            hele_shaw_circle_check(FlatStrip(), 1.0)


class TestLimitIndicator:
    def test_values(self):
        ind = limit_indicator(CIRCLE, 64)
        assert ind[31, 31] == -1.0 and ind[0, 0] == 1.0

    def test_l3_distance_shrinks(self):
        m = 512
        d = []
        for eps in (0.04, 0.02, 0.01):
            g = profile_grid(CIRCLE, ProfileParams(eps), m)
            d.append(np.mean(np.abs(g - limit_indicator(CIRCLE, m)) ** 3) ** (1 / 3))
        assert d[0] > d[1] > d[2]
        consts = [v / e ** (1 / 3) for v, e in zip(d, (0.04, 0.02, 0.01))]
        assert max(consts) / min(consts) < 1.5
