import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erf

from ancientflow.dynamics_checks import (
    MZParams,
    MZState,
    harnack_checks,
    mz_classify,
    mz_ensemble,
    mz_simulate,
    psi,
    psi_closed_form,
    psi_integral,
    psi_t,
    psi_zz,
    rrz_profile,
    rzz_decay,
    sandwich_check,
    validate_psi,
)
from ancientflow.errors import DomainError, ParameterError, PreconditionError
from ancientflow.geometry_core import SQRT2, Grid1D, RadialProfile
from ancientflow.mcf_solver import FlowState, StepParams, Trajectory, evolve
from ancientflow.soliton_solvers import solve_bowl


class TestModeSystem:
    def test_uncoupled_rates(self):
        run = mz_simulate(MZParams(0.0), MZState(0.0, 1.0, 1.0, 1.0), 1.0)
        last = run[-1]
        assert len(run) == 101
        assert last.U_plus == pytest.approx(math.e, rel=1e-9)
        assert last.U_zero == 1.0
        assert last.U_minus == pytest.approx(1 / math.e, rel=1e-9)

    @pytest.mark.parametrize(
        "init, label",
        [((1.0, 1.0, 1.0), "plus_dominant"), ((1.0, 1e-6, 1e-6), "plus_dominant"), ((0.0, 1.0, 1.0), "zero_dominant"), ((0.0, 0.0, 1.0), "undecided")],
    )
    def test_classification_without_coupling(self, init, label):
        run = mz_simulate(MZParams(0.0), MZState(0.0, *init), 20.0)
        assert mz_classify(run).label == label

    def test_classify_accepts_state_lists(self):
        run = mz_simulate(MZParams(0.0), MZState(0.0, 1.0, 1.0, 1.0), 20.0)
        assert mz_classify(run.states) == mz_classify(run)

    def test_classify_needs_samples(self):
        run = mz_simulate(MZParams(0.0), MZState(0.0, 1.0, 1.0, 1.0), 0.5)
        with pytest.raises(PreconditionError):
            mz_classify(run)

    def test_seeded_runs_are_reproducible(self):
        a = mz_simulate(MZParams(0.1, seed=3), MZState(0.0, 0.5, 0.5, 0.5), 5.0)
        b = mz_simulate(MZParams(0.1, seed=3), MZState(0.0, 0.5, 0.5, 0.5), 5.0)
        np.testing.assert_array_equal(a.U, b.U)

    def test_ensemble_matches_single_runs(self):
        runs = mz_ensemble(0.1, runs=3, span=2.0, seed=11, record=1)
        single = mz_simulate(MZParams(0.1, seed=runs[1].seed), MZState(-100.0, *runs[1].U[0]), -98.0)
        np.testing.assert_allclose(runs[1].U, single.U, rtol=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.0, 0.5))
    def test_energies_stay_nonnegative(self, seed, coupling):
        run = mz_simulate(MZParams(coupling, seed), MZState(0.0, 0.3, 0.3, 0.3), 3.0)
        assert np.all(run.U >= 0.0)

    @pytest.mark.parametrize(
        "kw",
        [{"dt": 0.02}, {"dt": 0.0}, {"tau_end": -1.0}],
    )
    def test_invalid(self, kw):
        args = {"tau_end": 1.0, "dt": 0.01} | kw
        with pytest.raises(ParameterError):
            mz_simulate(MZParams(0.0), MZState(0.0, 1.0, 1.0, 1.0), **args)

    def test_negative_energy_rejected(self):
        with pytest.raises(ParameterError):
            mz_simulate(MZParams(0.0), MZState(0.0, -1.0, 1.0, 1.0), 1.0)

    def test_callable_coupling(self):
        assert MZParams(lambda tau: 2 * tau).eps(3.0) == 6.0
        assert MZParams(0.1).eps(0.0) == pytest.approx(0.1)


class TestPsi:
    def test_value(self):
        assert psi(1.0, 1.0) == pytest.approx(0.5204998778, abs=1e-10)

    def test_closed_form_matches_quadrature(self):
        assert validate_psi(6, 6) < 1e-10
        assert psi_integral(0.3, 2.0) == pytest.approx(erf(0.3 / (2 * math.sqrt(2))), abs=1e-12)

    @pytest.mark.parametrize("z, t, limit", [(1e-8, 1.0, 0.0), (50.0, 1.0, 1.0), (1.0, 1e-4, 1.0), (1.0, 1e14, 0.0)])
    def test_limits(self, z, t, limit):
        assert psi(z, t) == pytest.approx(limit, abs=1e-7)

    @pytest.mark.parametrize("z, t", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])
    def test_domain(self, z, t):
        with pytest.raises(DomainError):
            psi_closed_form(z, t)

    def test_heat_equation_by_fourth_order_differences(self):
        def d1_4(f, x, h):
            return (-f(x + 2 * h) + 8 * f(x + h) - 8 * f(x - h) + f(x - 2 * h)) / (12 * h)

        def d2_4(f, x, h):
            return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h)

        err = 0.0
        for z in np.geomspace(0.1, 10.0, 7):
            for t in np.geomspace(0.1, 10.0, 7):
                ft = d1_4(lambda s: psi_closed_form(z, s), t, 1e-3 * t)
                fzz = d2_4(lambda y: psi_closed_form(y, t), z, 1e-3 * min(math.sqrt(t), z))
                err = max(err, abs(ft - fzz))
                assert psi_t(z, t) == pytest.approx(fzz, abs=1e-6)
        assert err < 1e-7

    @given(st.floats(1e-2, 20.0), st.floats(1e-1, 100.0))
    def test_concave_and_bounded(self, z, t):
        assert 0.0 < psi(z, t) <= 1.0
        assert psi_zz(z, t) <= 0.0


class TestRadialChecks:
    def test_rrz_on_parabola(self):
        # r = sqrt(2 z) has r r_z = 1 identically
        g = Grid1D(0.0, 400.0, 40001)
        rep = rrz_profile(RadialProfile(g, np.sqrt(2 * g.nodes)))
        assert rep.status == "ok" and rep.bound_holds
        assert rep.limit == pytest.approx(1.0, abs=1e-6)
        assert rep.neck_max == pytest.approx(1.0, abs=1e-6)

    def test_rrz_on_cylinder(self):
        rep = rrz_profile(RadialProfile(Grid1D(-1.0, 1.0, 21), np.full(21, SQRT2)))
        assert rep.neck_max == 0.0 and rep.limit == 0.0

    def test_rrz_without_neck(self):
        g = Grid1D(0.0, 2.0, 201)
        rep = rrz_profile(RadialProfile(g, 1.0 + g.nodes))
        assert rep.status == "no-neck" and not rep.bound_holds

    def test_rzz_decay_on_parabola(self):
        # -r_zz = r^-3, so r^(5/2) (-r_zz) = r^(-1/2) <= 10^(-1/2) for r >= 10
        g = Grid1D(0.0, 400.0, 40001)
        res = rzz_decay(RadialProfile(g, np.sqrt(2 * g.nodes)))
        assert res.C2 == pytest.approx(1 / math.sqrt(10), abs=1e-4)
        assert res.C2 <= 0.32

    def test_rzz_decay_empty_window(self):
        assert rzz_decay(RadialProfile(Grid1D(0, 1, 11), np.ones(11))).C2 == 0.0

    def test_sandwich(self):
        lower, upper = sandwich_check(np.array([1.0, 1.0]), 0.5, np.array([1.0, 1.0]), 1.0, 1.0)
        assert lower == pytest.approx(0.0)
        assert upper == pytest.approx(2 * 0.5 + 8 * 0.5**0.25 + 1.0 - 1.0)
        with pytest.raises(ParameterError):
            sandwich_check(np.array([0.0]), 0.5, np.array([1.0]), 1.0, 1.0)


@pytest.fixture(scope="module")
def report():
    b = solve_bowl(1.0, 5.0, 0.01, richardson=False)
    p = StepParams(1e-3, boundary="fixed-value", boundary_value=lambda t: b.f[-1] + t)
    tr = evolve(FlowState(0.0, b.profile), p, 0.05, probes=())
    return harnack_checks(tr)


class TestHarnack:
    # the coarse bowl (h = 0.01) carries a translation speed error of a few 1e-6
    def test_bowl_speed(self, report):
        assert report.H_ref == pytest.approx(1.0, abs=1e-5)
        assert abs(report.f_t_min - 1.0) < 1e-5 and abs(report.f_t_max - 1.0) < 1e-5
        assert report.lower_bound_margin > -1e-5

    def test_bowl_time_derivatives_vanish(self, report):
        assert max(abs(report.f_tt_min), abs(report.f_tt_max)) < 1e-3
        assert max(abs(report.f_tr_min), abs(report.f_tr_max)) < 1e-4

    def test_preconditions(self):
        g = RadialProfile(Grid1D(0, 1, 5), np.ones(5))
        states = tuple(FlowState(t, g) for t in (0.0, 1.0, 2.0))
        with pytest.raises(PreconditionError):
            harnack_checks(Trajectory(states, {}))
        with pytest.raises(PreconditionError):
            harnack_checks(Trajectory(states[:2], {}))
