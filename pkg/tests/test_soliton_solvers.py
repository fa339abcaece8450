import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ancientflow.errors import ParameterError
from ancientflow.geometry_core import SQRT2, Grid1D, RadialProfile, surface_containment
from ancientflow.soliton_solvers import (
    BOWL_STIFFNESS_LIMIT,
    bowl_far_field,
    bowl_series,
    d1_fourth_order,
    shrinker_barrier,
    shrinker_lower_bound,
    shrinker_residual,
    solve_bowl,
    solve_shrinker,
    weighted_flux_difference,
)


@pytest.fixture(scope="module")
def bowl():
    return solve_bowl(1.0, 20.0, 1e-3)


@pytest.fixture(scope="module")
def shrinker10():
    return solve_shrinker(10.0, 1e-2)


class TestBowl:
    def test_tip_curvature_is_half_the_speed(self, bowl):
        assert bowl.f_rr[0] == pytest.approx(0.5, abs=1e-10)
        assert bowl.f[0] == 0.0

    def test_residual_and_richardson(self, bowl):
        assert bowl.residual < 1e-8
        assert bowl.richardson < 1e-8

    def test_slope_asymptotics(self, bowl):
        # f_r = r - 1/r + O(r^-3) for unit speed, so r / f_r = 1 + r^-2 + O(r^-4)
        ratio = bowl.r[-1] / bowl.f_r[-1]
        assert ratio == pytest.approx(1.0 + 1.0 / 400.0, abs=5e-5)

    def test_r_over_slope_decreases(self, bowl):
        q = bowl.r[1:] / bowl.f_r[1:]
        assert np.all(np.diff(q) < 0)

    def test_far_field_offset_bounded(self, bowl):
        far = bowl.r >= 1.0
        assert np.max(np.abs(bowl.f[far] - bowl_far_field(1.0, bowl.r[far]))) <= 2.0

    def test_scaling(self, bowl):
        # f_c(r) = f_1(c r) / c
        b2 = solve_bowl(2.0, 10.0, 1e-3, richardson=False)
        ref = 0.5 * np.interp(2.0 * b2.r, bowl.r, bowl.f)
        assert np.max(np.abs(b2.f - ref)) < 1e-9

    def test_height_and_inverse(self, bowl):
        r = np.array([0.5, 3.0, 17.25])
        np.testing.assert_allclose(bowl.radius_of_height(bowl.height(r)), r, atol=1e-10)

    def test_series_coefficients(self):
        # g = alpha r + beta r^3 solves g' = (1 + g^2)(c - g/r) to order r^3
        c, r = 1.7, 1e-2
        f, g = bowl_series(c, r)
        dg = 0.5 * c + 3 * c**3 * r**2 / 32.0
        rhs = (1 + g * g) * (c - g / r)
        assert abs(dg - rhs) < 1e-8
        assert f == pytest.approx(0.25 * c * r**2 + c**3 * r**4 / 128.0)

    @pytest.mark.parametrize(
        "args",
        [(0.0, 10.0, 1e-3), (-1.0, 10.0, 1e-3), (1.0, 0.0, 1e-3), (1.0, 10.0, 0.2), (1.0, 100.0, 0.03)],
    )
    def test_invalid_parameters(self, args):
        with pytest.raises(ParameterError):
            solve_bowl(*args)

    def test_stiffness_limit_boundary(self):
        assert BOWL_STIFFNESS_LIMIT == 2.5
        solve_bowl(1.0, 50.0, 0.05, richardson=False)
        with pytest.raises(ParameterError):
            solve_bowl(1.0, 50.0, 0.051)


class TestFourthOrderDifference:
    def test_exact_on_quartics(self):
        x = np.linspace(0.0, 1.0, 11)
        g = x**4 - 2 * x**3 + x
        np.testing.assert_allclose(d1_fourth_order(g, x[1] - x[0]), 4 * x**3 - 6 * x**2 + 1, atol=1e-11)

    def test_odd_start(self):
        x = np.linspace(0.0, 1.0, 11)
        np.testing.assert_allclose(d1_fourth_order(x**3 + x, 0.1, odd_at_start=True)[:2], [1.0, 1.03], atol=1e-12)


class TestShrinker:
    def test_exact_shrinkers_have_zero_residual(self):
        g = Grid1D(-1.0, 1.0, 81)
        assert shrinker_residual(RadialProfile(g, np.full(81, SQRT2))) < 1e-14
        s = Grid1D(-1.5, 1.5, 1501)
        sphere = RadialProfile(s, np.sqrt(4 - s.nodes**2))
        assert shrinker_residual(sphere) < 1e-4

    def test_unit_cylinder_residual(self):
        g = Grid1D(-1.0, 1.0, 11)
        assert shrinker_residual(RadialProfile(g, np.ones(11))) == pytest.approx(0.5, abs=1e-14)

    def test_profile_shape(self, shrinker10):
        p = shrinker10
        assert p.u[-1] == 0.0
        assert np.all(p.u[:-1] > 0)
        assert p.ygrid.hi == 10.0

    def test_residual(self, shrinker10):
        assert shrinker_residual(shrinker10) < 1e-6

    def test_bottom_radius_exceeds_cylinder(self, shrinker10):
        # the base circle lies outside the cylinder of radius sqrt(2)
        assert shrinker10.u[0] == pytest.approx(1.42646, abs=1e-4)
        assert shrinker10.u[0] > SQRT2

    def test_upper_bound_at_height_two(self, shrinker10):
        u2, _ = shrinker10.evaluate(2.0)
        assert u2[0] <= SQRT2 - 10.0**-2

    def test_lower_bound(self, shrinker10):
        y = shrinker10.y
        assert np.all(shrinker10.u >= shrinker_lower_bound(10.0, y) - 1e-9)

    @pytest.mark.parametrize("L1, L2", [(0.5, 5.0), (1.0, 9.0)])
    def test_flux_balance_vanishes(self, shrinker10, L1, L2):
        assert abs(weighted_flux_difference(shrinker10, L1, L2)) < 1e-8

    def test_flux_balance_detects_non_shrinkers(self):
        g = Grid1D(0.0, 3.0, 301)
        assert abs(weighted_flux_difference(RadialProfile(g, np.ones(301)), 0.5, 2.5)) > 1e-2

    def test_flux_order(self, shrinker10):
        with pytest.raises(ParameterError):
            weighted_flux_difference(shrinker10, 2.0, 1.0)

    @pytest.mark.parametrize("args", [(3.0, 1e-3), (10.0, 0.05), (10.0, 0.0)])
    def test_invalid(self, args):
        with pytest.raises(ParameterError):
            solve_shrinker(*args)

    def test_barrier_geometry(self, shrinker10):
        b = shrinker_barrier(shrinker10, -1.0, 0.1)
        assert b.grid.hi == pytest.approx(10.0)
        assert b.grid.lo == pytest.approx(0.0)
        assert b.r[0] == 0.0

    def test_barrier_needs_negative_time(self, shrinker10):
        with pytest.raises(ParameterError):
            shrinker_barrier(shrinker10, 0.0, 0.1)

    @settings(max_examples=10, deadline=None)
    @given(st.floats(-4.0, -0.25), st.floats(-4.0, -0.25))
    def test_barriers_shrink_in_time(self, shrinker10, t1, t2):
        early, late = sorted((t1, t2))
        b_early = shrinker_barrier(shrinker10, early, 0.1)
        b_late = shrinker_barrier(shrinker10, late, 0.1)
        assert surface_containment(b_late, b_early).margin >= -1e-9
