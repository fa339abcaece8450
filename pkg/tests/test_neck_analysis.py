import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from ancientflow.errors import DomainError, ParameterError, PreconditionError
from ancientflow.mcf_solver import FlowState, Trajectory
from ancientflow.geometry_core import Grid1D
from ancientflow.neck_analysis import (
    DICTIONARY,
    K_nu_evolution_residual,
    ModeTerm,
    NeckPatch,
    RotationField,
    best_rotation,
    bowl_neck_patch,
    compare_rotation_fields,
    fit_neck,
    neck_improvement_experiment,
    parse_mode_mix,
    symmetry_defect,
    translation_trajectory,
    worst_over_dictionary,
)
from ancientflow.soliton_solvers import solve_bowl

rotations = st.builds(
    lambda v: Rotation.from_rotvec(v).as_matrix(),
    st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3),
)
vectors = st.lists(st.floats(-5.0, 5.0), min_size=3, max_size=3).map(np.array)


def cylinder_patch(L=20.0, **kw):
    return NeckPatch.from_function(lambda TH, Z, T: 0 * Z, L=L, ntheta=16, nz=41, nt=9, **kw)


def tilted_patch():
    return NeckPatch.from_function(lambda TH, Z, T: 0.01 * np.cos(TH) * Z, L=20.0, ntheta=16, nz=41, nt=9)


@pytest.fixture(scope="module")
def bowl():
    return solve_bowl(1.0, 400.0, 2.5 / 400.0, richardson=False)


class TestRotationField:
    @settings(max_examples=30, deadline=None)
    @given(rotations, vectors, vectors)
    def test_killing_field_has_skew_jacobian(self, S, q, x):
        K = RotationField(S, q)
        A = K.A
        np.testing.assert_allclose(A, -A.T, atol=1e-14)
        # K is affine with Jacobian A
        np.testing.assert_allclose(K(x + 1.0) - K(x), A @ np.ones(3), atol=1e-12)
        np.testing.assert_allclose(K(x), np.cross(K.omega, x - q), atol=1e-12)
        # the axis is fixed and has unit speed of rotation
        assert np.linalg.norm(K(q + 3.0 * K.axis)) < 1e-12
        assert np.linalg.norm(K.omega) == pytest.approx(1.0)

    def test_about_and_negation(self):
        K = RotationField.about([0, 0, 1], [1, 0, 0])
        np.testing.assert_allclose(K(np.array([2.0, 0.0, 0.0])), [0.0, -1.0, 0.0], atol=1e-15)
        np.testing.assert_allclose(K.negated()(np.array([2.0, 0.0, 0.0])), [0.0, 1.0, 0.0], atol=1e-15)

    def test_requires_orthogonal_frame(self):
        with pytest.raises(ParameterError):
            RotationField(2 * np.eye(3))


class TestNeckPatch:
    def test_validation(self):
        z = Grid1D(-1, 1, 5)
        with pytest.raises(DomainError):
            NeckPatch(4, z, [0.5], np.zeros((1, 4, 5)))
        with pytest.raises(ParameterError):
            NeckPatch(4, z, [-2.0, -3.0], np.zeros((2, 4, 5)))
        with pytest.raises(ParameterError):
            NeckPatch(4, z, [-1.0], np.zeros((1, 4, 4)))

    def test_cylinder_geometry(self):
        p = cylinder_patch()
        xbar, H = p.center
        assert H == pytest.approx(1 / np.sqrt(2), abs=1e-12)
        np.testing.assert_allclose(xbar, [np.sqrt(2), 0.0, 0.0], atol=1e-12)
        assert p.is_valid

    def test_fit_cylinder(self):
        f = fit_neck(cylinder_patch())
        assert f.status == "neck"
        assert f.eps_measured == 0.0
        assert f.radius == pytest.approx(np.sqrt(2), abs=1e-10)
        assert abs(abs(f.axis[2]) - 1.0) < 1e-10

    def test_invalid_patch_is_not_a_neck(self):
        p = NeckPatch.from_function(lambda TH, Z, T: 0.5 + 0 * Z, L=10.0, ntheta=8, nz=21, nt=5)
        assert not p.is_valid
        assert fit_neck(p).status == "not-a-neck"


class TestSymmetry:
    def test_cylinder_is_exactly_symmetric(self):
        p = cylinder_patch()
        assert symmetry_defect(p, RotationField.identity()) < 1e-14
        K, d = best_rotation(p)
        assert d < 1e-12
        assert abs(abs(K.axis[2]) - 1.0) < 1e-12

    def test_tilted_patch(self):
        p = tilted_patch()
        assert symmetry_defect(p, RotationField.identity()) == pytest.approx(0.0353553, abs=1e-6)
        K, d = best_rotation(p)
        assert d == pytest.approx(6.918e-4, rel=1e-3)

    def test_far_axis_rejected(self):
        with pytest.raises(PreconditionError):
            symmetry_defect(cylinder_patch(), RotationField.about([0, 0, 1], [30.0, 0.0, 0.0]))

    @settings(max_examples=10, deadline=None)
    @given(rotations, vectors)
    def test_defect_is_invariant_under_rigid_motions(self, Q, c):
        p, K = tilted_patch(), RotationField.about([0.01, 0.0, 1.0])
        assert symmetry_defect(p.moved(Q, c), K.moved(Q, c)) == pytest.approx(symmetry_defect(p, K), rel=1e-9)

    @settings(max_examples=5, deadline=None)
    @given(rotations, vectors)
    def test_best_rotation_is_equivariant(self, Q, c):
        p = tilted_patch()
        K, d = best_rotation(p)
        K2, d2 = best_rotation(p.moved(Q, c))
        assert d2 == pytest.approx(d, rel=1e-6)
        assert compare_rotation_fields(K.moved(Q, c), K2, p.moved(Q, c)) < 1e-5

    def test_sign_and_spin_do_not_matter(self):
        p = tilted_patch()
        K, _ = best_rotation(p)
        spin = RotationField(K.S @ Rotation.from_rotvec([0, 0, 0.7]).as_matrix(), K.q)
        assert symmetry_defect(p, K.negated()) == pytest.approx(symmetry_defect(p, K), rel=1e-12)
        assert symmetry_defect(p, spin) == pytest.approx(symmetry_defect(p, K), rel=1e-12)
        assert compare_rotation_fields(K, K.negated(), p) < 1e-12
        assert compare_rotation_fields(K, spin, p) < 1e-12


class TestCompareRotationFields:
    def test_identical_and_shifted(self):
        p = cylinder_patch()
        K = RotationField.identity()
        assert compare_rotation_fields(K, K, p) == 0.0
        shifted = RotationField.about([0, 0, 1], [0.1, 0.0, 0.0])
        # K1 - K2 is the constant e3 x (0.1, 0, 0)
        assert compare_rotation_fields(K, shifted, p) == pytest.approx(0.1 / np.sqrt(2), rel=1e-9)

    def test_coverage(self):
        val, cover = compare_rotation_fields(RotationField.identity(), RotationField.identity(), cylinder_patch(), True)
        assert val == 0.0
        assert cover == pytest.approx(10.0 / (200.0 * np.sqrt(2)))


class TestBowlPatches:
    @pytest.mark.parametrize(
        "rc, L, eps, status",
        [
            (20.0, 10.0, 0.12966, "neck"),
            (20.0, 20.0, 0.27630, "not-a-neck"),
            (40.0, 10.0, 0.063545, "neck"),
            (40.0, 20.0, 0.13072, "neck"),
            (80.0, 10.0, 0.031498, "neck"),
        ],
    )
    def test_frozen_fits(self, bowl, rc, L, eps, status):
        f = fit_neck(bowl_neck_patch(bowl, rc, L))
        assert f.eps_measured == pytest.approx(eps, rel=1e-3)
        assert f.status == status

    def test_eps_halves_when_the_radius_doubles(self, bowl):
        e = [fit_neck(bowl_neck_patch(bowl, rc, 10.0)).eps_measured for rc in (20.0, 40.0, 80.0)]
        assert e[0] / e[1] == pytest.approx(2.0, rel=0.05)
        assert e[1] / e[2] == pytest.approx(2.0, rel=0.05)

    def test_patch_outside_the_solved_bowl(self):
        small = solve_bowl(1.0, 30.0, 0.01, richardson=False)
        with pytest.raises(DomainError):
            bowl_neck_patch(small, 29.0, 20.0)


class TestModeMix:
    @pytest.mark.parametrize(
        "mix, labels",
        [("m2", ["m2"]), ("m1a+m3", ["m1a", "m3"]), ("m2s", ["m2s"]), ("M1AS", ["m1as"]), ("0", []), ("", []), (None, [])],
    )
    def test_parse(self, mix, labels):
        assert [t.label for t in parse_mode_mix(mix)] == labels

    @pytest.mark.parametrize("mix", ["x2", "m", "ma", "m2+q"])
    def test_parse_errors(self, mix):
        with pytest.raises(ParameterError):
            parse_mode_mix(mix)

    def test_term_validation(self):
        with pytest.raises(ParameterError):
            ModeTerm(-1)
        with pytest.raises(ParameterError):
            ModeTerm(1, profile="cubic")

    def test_dictionary(self):
        assert [t.label for t in DICTIONARY] == ["m1", "m1a", "m2", "m2a", "m3", "m3a", "m4", "m4a"]


class TestNeckImprovement:
    def test_m2_improves(self):
        r = neck_improvement_experiment(20.0, 1e-3, "m2")
        assert r.factor == pytest.approx(0.30456, rel=1e-3)
        assert r.factor <= 0.5
        assert r.vhat_residual < 1e-6

    def test_m1_is_a_rotation(self):
        r = neck_improvement_experiment(20.0, 1e-3, "m1")
        assert r.factor <= 0.1
        assert r.decay["m1"] == pytest.approx(1.0, abs=1e-12)

    def test_no_data(self):
        r = neck_improvement_experiment(20.0, 1e-3, "0")
        assert r.factor == 0.0 and r.rotation is None

    def test_decay_is_monotone_in_m(self):
        _, _, results = worst_over_dictionary(10.0, 1e-3)
        decays = [results[f"m{m}"].decay[f"m{m}"] for m in range(1, 5)]
        assert all(a > b for a, b in zip(decays, decays[1:]))

    @pytest.mark.parametrize("kw", [{"L": 8.0}, {"eps": 0.02}, {"eps": -1e-3}, {"nt": 10}])
    def test_invalid(self, kw):
        args = {"L": 10.0, "eps": 1e-3} | kw
        with pytest.raises(ParameterError):
            neck_improvement_experiment(args.pop("L"), args.pop("eps"), "m2", **args)


class TestKnuResidual:
    def test_bowl_translation(self, bowl):
        z = Grid1D(50.0, 60.0, 201)
        traj = translation_trajectory(bowl.radius_of_height, z, np.linspace(0.0, 0.02, 5))
        K = RotationField.about([1.0, 0.0, 0.0], [0.0, 0.0, 55.0])
        assert K_nu_evolution_residual(traj, K) < 1e-3

    def test_needs_radius_form(self):
        from ancientflow.geometry_core import GraphProfile

        g = GraphProfile(Grid1D(0, 1, 11), np.zeros(11))
        traj = Trajectory(tuple(FlowState(t, g) for t in (0.0, 1.0, 2.0)), {})
        with pytest.raises(ParameterError):
            K_nu_evolution_residual(traj, RotationField.identity())
