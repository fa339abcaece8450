import numpy as np
import pytest

from ancientflow.errors import GraphError, ParameterError
from ancientflow.geometry_core import SQRT2, CylinderGraph, GraphProfile, Grid1D, RadialProfile, surface_containment
from ancientflow.mcf_solver import (
    FlowState,
    StepParams,
    Trajectory,
    check_graph,
    evolve,
    extinction_profile,
    graph_speed,
    step_graph,
    step_radius,
    step_radius_with_events,
    step_rescaled,
)
from ancientflow.soliton_solvers import solve_bowl


def sphere(radius, n):
    g = Grid1D(-radius, radius, n)
    return RadialProfile(g, np.sqrt(np.clip(radius**2 - g.nodes**2, 0.0, None)))


class TestStepParams:
    @pytest.mark.parametrize(
        "kw", [{"dt": 0.0}, {"dt": np.inf}, {"dt": 1e-3, "scheme": "leapfrog"}, {"dt": 1e-3, "boundary": "open"}]
    )
    def test_invalid(self, kw):
        with pytest.raises(ParameterError):
            StepParams(**kw)

    @pytest.mark.parametrize("stepper, payload", [
        (step_radius, RadialProfile(Grid1D(-1, 1, 21), np.ones(21))),
        (step_graph, GraphProfile(Grid1D(0, 1, 21), np.zeros(21))),
    ])
    def test_explicit_stability_bound(self, stepper, payload):
        h = payload.grid.h
        stepper(FlowState(0.0, payload), StepParams(0.25 * h * h, scheme="explicit"))
        with pytest.raises(ParameterError):
            stepper(FlowState(0.0, payload), StepParams(0.3 * h * h, scheme="explicit"))


class TestGraphForm:
    def test_tip_rule(self):
        g = Grid1D(0.0, 1.0, 101)
        speed = graph_speed(GraphProfile(g, 1.5 * g.nodes**2))
        # f_rr(0) = 3 and f_t(0) = 2 f_rr(0)
        assert speed[0] == pytest.approx(6.0, abs=1e-9)

    @pytest.mark.parametrize("scheme", ["semi-implicit", "explicit"])
    def test_bowl_translates(self, scheme):
        b = solve_bowl(1.0, 10.0, 0.01, richardson=False)
        dt = 2.5e-5 if scheme == "explicit" else 1e-3
        p = StepParams(dt, scheme=scheme, boundary="fixed-value", boundary_value=b.f[-1] + dt)
        new = step_graph(FlowState(0.0, b.profile), p)
        assert new.t == pytest.approx(dt)
        assert np.max(np.abs(new.payload.f - b.f - dt)) < 1e-8

    def test_reflection_rejected(self):
        g = GraphProfile(Grid1D(0, 1, 11), np.zeros(11))
        with pytest.raises(ParameterError):
            step_graph(FlowState(0.0, g), StepParams(1e-3, boundary="reflection"))

    def test_wrong_payload(self):
        with pytest.raises(ParameterError):
            step_graph(FlowState(0.0, RadialProfile(Grid1D(0, 1, 11), np.ones(11))), StepParams(1e-3))


class TestRadiusForm:
    def test_wide_cylinder_one_step(self):
        g = Grid1D(-1.0, 1.0, 21)
        new = step_radius(FlowState(0.0, RadialProfile(g, np.full(21, 10.0))), StepParams(1.0))
        np.testing.assert_allclose(new.payload.r, np.sqrt(98.0), rtol=1e-12)

    @pytest.mark.parametrize("scheme, dt", [("semi-implicit", 1e-3), ("explicit", 2e-4)])
    def test_cylinder_follows_exact_law(self, scheme, dt):
        g = Grid1D(-1.0, 1.0, 41)
        s0 = FlowState(-1.0, RadialProfile(g, np.full(41, SQRT2)))
        tr = evolve(s0, StepParams(dt, scheme=scheme, boundary="reflection"), -0.5, probes=("H_max", "min_radius"))
        t = tr.times
        np.testing.assert_allclose(tr.diagnostics["min_radius"], np.sqrt(-2 * t), rtol=1e-10)
        np.testing.assert_allclose(tr.diagnostics["H_max"], 1 / np.sqrt(-2 * t), rtol=1e-10)

    def test_cylinder_extinction(self):
        g = Grid1D(-1.0, 1.0, 41)
        tr = evolve(FlowState(-1.0, RadialProfile(g, np.full(41, SQRT2))), StepParams(1e-3, boundary="reflection"), 0.5)
        assert tr.status == "extinct"
        assert len(tr.events) == 41
        np.testing.assert_allclose(extinction_profile(tr).T, 0.0, atol=1e-12)

    def test_events_report_crossings(self):
        g = Grid1D(-1.0, 1.0, 11)
        _, events = step_radius_with_events(FlowState(0.0, RadialProfile(g, np.full(11, 0.1))), StepParams(0.01))
        assert len(events) == 11
        node, z, t = events[0]
        assert (node, z) == (0, -1.0)
        assert t == pytest.approx(0.005)

    def test_fixed_value_end(self):
        g = Grid1D(0.0, 1.0, 21)
        p = StepParams(1e-3, boundary="fixed-value", boundary_value=lambda t: 2.0 + t)
        new = step_radius(FlowState(0.0, RadialProfile(g, np.full(21, 2.0))), p)
        assert new.payload.r[0] == pytest.approx(2.001)

    def test_sphere_shrinks_inside_cylinder(self):
        # avoidance: a sphere starting inside a cylinder stays inside
        inner = evolve(FlowState(0.0, sphere(1.0, 201)), StepParams(1e-4), 0.2, keep_every=100)
        cyl = RadialProfile(Grid1D(-2.0, 2.0, 201), np.full(201, 1.1))
        outer = evolve(FlowState(0.0, cyl), StepParams(1e-4, boundary="reflection"), 0.2, keep_every=100)
        assert len(inner) == len(outer) == 21
        margins = [surface_containment(a.payload, b.payload).margin for a, b in zip(inner.states, outer.states)]
        assert min(margins) > 0
        # r^2 = 1 - 4 t for the round sphere
        assert inner.states[-1].payload.r.max() == pytest.approx(np.sqrt(0.2), abs=5e-3)


class TestRescaledForm:
    zgrid = Grid1D(-6.0, 6.0, 241)

    def run(self, fn, tau=1.0):
        g = CylinderGraph.from_function(fn, 8, self.zgrid)
        return g, evolve(FlowState(0.0, g), StepParams(1e-3), tau, probes=("max_abs_u",))

    def test_cylinder_is_fixed(self):
        _, tr = self.run(lambda T, Z: 0 * Z, tau=0.1)
        assert np.max(np.abs(tr.states[-1].payload.u)) == 0.0

    @pytest.mark.parametrize(
        "fn, rate",
        [(lambda T, Z: 1e-4 + 0 * Z, 1.0), (lambda T, Z: 1e-4 * np.cos(T) + 0 * Z, 0.5)],
        ids=["constant", "cos"],
    )
    def test_unstable_modes_grow_at_their_rate(self, fn, rate):
        g, tr = self.run(fn)
        k = self.zgrid.n // 2
        growth = tr.states[-1].payload.u[0, k] / g.u[0, k]
        assert growth == pytest.approx(np.exp(rate), rel=1e-3)

    def test_neutral_mode_is_stationary(self):
        g, tr = self.run(lambda T, Z: 1e-4 * (Z**2 - 2))
        k = self.zgrid.n // 2
        assert tr.states[-1].payload.u[0, k] == pytest.approx(g.u[0, k], rel=1e-3)

    def test_diagnostics_follow_states(self):
        _, tr = self.run(lambda T, Z: 1e-4 + 0 * Z, tau=0.05)
        assert len(tr.diagnostics["max_abs_u"]) == len(tr.states) == 51

    def test_graph_condition(self):
        g = CylinderGraph.from_function(lambda T, Z: 0.6 * Z, 8, Grid1D(-1, 1, 21))
        with pytest.raises(GraphError):
            check_graph(g)
        with pytest.raises(GraphError):
            step_rescaled(FlowState(0.0, g), StepParams(1e-3))


class TestEvolve:
    def test_hits_final_time(self):
        g = Grid1D(-1.0, 1.0, 21)
        tr = evolve(FlowState(0.0, RadialProfile(g, np.full(21, 5.0))), StepParams(0.03), 1.0, keep_every=7)
        assert tr.times[0] == 0.0 and tr.times[-1] == pytest.approx(1.0)
        assert tr.params.dt == pytest.approx(1.0 / 34)

    def test_unknown_probe(self):
        g = Grid1D(-1.0, 1.0, 21)
        with pytest.raises(ParameterError):
            evolve(FlowState(0.0, RadialProfile(g, np.ones(21))), StepParams(0.01), 1.0, probes=("volume",))

    def test_probe_payload_mismatch(self):
        g = Grid1D(-1.0, 1.0, 21)
        with pytest.raises(ParameterError):
            evolve(FlowState(0.0, RadialProfile(g, np.ones(21))), StepParams(0.01), 0.1, probes=("U_plus",))

    def test_time_must_advance(self):
        g = Grid1D(-1.0, 1.0, 21)
        with pytest.raises(ParameterError):
            evolve(FlowState(0.0, RadialProfile(g, np.ones(21))), StepParams(0.01), 0.0)

    def test_trajectory_validation(self):
        g = RadialProfile(Grid1D(-1.0, 1.0, 5), np.ones(5))
        with pytest.raises(ParameterError):
            Trajectory((FlowState(1.0, g), FlowState(0.0, g)), {})
        with pytest.raises(ParameterError):
            Trajectory((FlowState(0.0, g),), {"H_max": np.zeros(2)})
