import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import expm_taylor, ivp_transport, latitude_transport, ramp_transport, rotation

from ltransport import models
from ltransport.bundle_model import polyline_path, quadratic_arc_path, segment_path
from ltransport.convergence import convergence_order
from ltransport.errors import DomainError, NumericError
from ltransport.transport import (
    axiom_residuals,
    coefficients_from_transport,
    default_steps,
    expansion_check,
    propagate,
    transport_from_frame_map,
    transport_matrix,
    transport_vector,
)

EXP_MINUS_J = np.array([[0.5403023058681398, 0.8414709848078965],
                        [-0.8414709848078965, 0.5403023058681398]])
LATITUDE_E_THETA = np.array([0.8575532158463934, -0.6113048076648572])
LATITUDE_E_PHI = np.array([0.43284868477032346, 0.8575532158463934])

unit = st.floats(0.0, 1.0, allow_nan=False)


def test_frozen_values_agree_with_oracles():
    assert np.allclose(expm_taylor(-models.ROTATION_GENERATOR), EXP_MINUS_J, atol=1e-15)
    assert np.allclose(latitude_transport(1.0, 1.0, [1.0, 0.0]), LATITUDE_E_THETA, atol=1e-15)
    assert np.allclose(latitude_transport(1.0, 1.0, [0.0, 1.0]), LATITUDE_E_PHI, atol=1e-15)


class TestClosedForms:
    def test_rotation_model_over_unit_length(self, rotation_model):
        H = transport_matrix(rotation_model, segment_path([0.0, 0.0], [1.0, 0.0]), 0.0, 1.0)
        assert np.linalg.norm(H.value - EXP_MINUS_J) <= 1e-10
        assert H.integrator_steps == 1000

    @pytest.mark.parametrize("theta", [0.3, 1.0, 2.5])
    def test_rotation_model_by_angle(self, rotation_model, theta):
        path = segment_path([0.0, 0.0], [1.0, 0.0], (0.0, theta))
        H = propagate(rotation_model, path, 0.0, theta)
        assert np.linalg.norm(H - rotation(-theta)) <= 1e-10

    def test_quarter_turn_of_a_vector(self, rotation_model):
        path = segment_path([0.0, 0.0], [1.0, 0.0], (0.0, np.pi / 2))
        v = transport_vector(rotation_model, path, 0.0, np.pi / 2, [1.0, 0.0])
        assert np.allclose(v, [0.0, -1.0], atol=1e-10)

    def test_ramp(self, ramp):
        path = segment_path([0.0], [1.0])
        H = propagate(ramp, path, 0.0, 1.0)
        assert abs(H[0, 0] - np.exp(-0.5)) <= 1e-10
        assert np.allclose(propagate(ramp, path, 0.3, 0.9), ramp_transport(1.0, 0.3, 0.9), atol=1e-10)

    def test_sphere_latitude_circle(self, sphere):
        path = segment_path([1.0, 0.0], [1.0, 1.0])
        H = propagate(sphere, path, 0.0, 1.0)
        assert np.allclose(H[:, 0], LATITUDE_E_THETA, atol=1e-9)
        assert np.allclose(H[:, 1], LATITUDE_E_PHI, atol=1e-9)

    def test_sphere_meridian_scales_the_azimuthal_component(self, sphere):
        # Along a meridian, v_phi * sin(theta) is constant and v_theta is unchanged.
        path = segment_path([0.8, 0.5], [1.6, 0.5])
        H = propagate(sphere, path, 0.0, 1.0)
        assert np.allclose(H, np.diag([1.0, np.sin(0.8) / np.sin(1.6)]), atol=1e-9)

    def test_sphere_curved_path_against_adaptive_solver(self, sphere):
        from oracles import sphere_gamma_matrix

        path = quadratic_arc_path([1.0, 0.0], [1.6, 0.4], [1.2, 1.3])
        ref = ivp_transport(lambda u: sphere_gamma_matrix(path.point(u)[0], path.velocity(u)), 0.0, 1.0, 2)
        assert np.linalg.norm(propagate(sphere, path, 0.0, 1.0) - ref) <= 1e-9

    def test_torsion_plane_depends_only_on_the_height_change(self, torsion_plane):
        from oracles import torsion_plane_transport

        x, y = np.array([0.1, 0.2]), np.array([0.9, 0.7])
        expected = torsion_plane_transport(0.25, x, y)
        for path in (segment_path(x, y), quadratic_arc_path(x, [0.0, 1.0], y),
                     polyline_path([x, [x[0], y[1]], y])):
            assert np.linalg.norm(propagate(torsion_plane, path, *path.domain) - expected) <= 1e-10

    def test_torsion_plane_value(self, torsion_plane):
        H = propagate(torsion_plane, segment_path([0.0, 0.0], [0.0, 1.0]), 0.0, 1.0)
        assert abs(H[0, 0] - 0.7788007830714049) <= 1e-10

    def test_backwards_transport_is_the_inverse(self, sphere):
        path = quadratic_arc_path([1.0, 0.0], [1.6, 0.4], [1.2, 1.3])
        forward = propagate(sphere, path, 0.2, 0.9)
        backward = propagate(sphere, path, 0.9, 0.2)
        assert np.linalg.norm(forward @ backward - np.eye(2)) <= 1e-10


class TestFrameMaps:
    def test_diag_exp(self):
        fm = models.diag_exp_frame()
        H = transport_from_frame_map(fm, segment_path([0.0, 0.0], [1.0, 1.0]), 0.0, 1.0)
        assert np.allclose(H.value, np.diag([np.exp(-1.0), np.exp(-2.0)]), atol=1e-14)

    def test_rotation_frame_equals_constant_model(self, rotation_model):
        path = segment_path([0.0, 0.0], [1.0, 0.0])
        H = transport_from_frame_map(models.rotation_frame(), path, 0.2, 0.9)
        assert np.linalg.norm(H.value - propagate(rotation_model, path, 0.2, 0.9)) <= 1e-9

    @pytest.mark.parametrize("name", sorted(models.FRAMES))
    def test_ode_reproduces_the_frame_map(self, name):
        fm = models.FRAMES[name]()
        provider = models.make_frame_map_transport(fm)
        path = quadratic_arc_path([0.0, 0.0], [0.5, 1.0], [1.0, 0.2])
        direct = transport_from_frame_map(fm, path, 0.1, 0.8).value
        assert np.linalg.norm(direct - propagate(provider, path, 0.1, 0.8)) <= 1e-9

    def test_identity_at_coincident_parameters(self):
        H = transport_from_frame_map(models.shear_frame(), segment_path([0.0, 0.0], [1.0, 1.0]), 0.5, 0.5)
        assert np.array_equal(H.value, np.eye(2))

    def test_singular_frame(self):
        from ltransport.bundle_model import FrameMap

        fm = FrameMap(lambda path, s: np.array([[1.0, s], [1.0, s]]))
        with pytest.raises(NumericError):
            transport_from_frame_map(fm, segment_path([0.0], [1.0]), 0.0, 1.0)


class TestCoefficients:
    def test_recovered_from_transport(self, rotation_model, sphere):
        line = segment_path([0.0, 0.0], [1.0, 0.0])
        assert np.allclose(coefficients_from_transport(rotation_model, line, 0.5),
                           models.ROTATION_GENERATOR, atol=1e-8)
        arc = quadratic_arc_path([1.0, 0.0], [1.6, 0.4], [1.2, 1.3])
        assert np.allclose(coefficients_from_transport(sphere, arc, 0.4), sphere.coeff(arc, 0.4), atol=1e-7)

    def test_ramp_coefficient(self, ramp):
        path = segment_path([0.0], [1.0])
        assert np.allclose(coefficients_from_transport(ramp, path, 0.6), [[0.6]], atol=1e-8)


class TestExpansion:
    def test_third_order_on_rotation_model(self, rotation_model):
        path = segment_path([0.0, 0.0], [1.0, 0.0])
        eps = [1e-2 / 2**k for k in range(5)]
        fit = convergence_order([(e, expansion_check(rotation_model, path, 0.3, e)) for e in eps])
        assert fit.order_within(3.0, 0.3)

    def test_third_order_on_ramp_away_from_origin(self, ramp):
        path = segment_path([0.0], [1.0])
        eps = [1e-2 / 2**k for k in range(5)]
        fit = convergence_order([(e, expansion_check(ramp, path, 0.5, e)) for e in eps])
        assert fit.order_within(3.0, 0.3)

    def test_ramp_at_origin_is_small(self, ramp):
        assert expansion_check(ramp, segment_path([0.0], [1.0]), 0.0, 1e-2) <= 1e-5

    def test_sign_convention_is_pinned(self, rotation_model):
        # With the opposite sign the residual would be first order in eps.
        path = segment_path([0.0, 0.0], [1.0, 0.0])
        assert expansion_check(rotation_model, path, 0.0, 1e-2) <= 1e-6


class TestIntegrator:
    def test_fourth_order_in_step_count(self, rotation_model):
        path = segment_path([0.0, 0.0], [1.0, 0.0], (0.0, 4.0))
        exact = rotation(-4.0)
        samples = [(1.0 / n, np.linalg.norm(propagate(rotation_model, path, 0.0, 4.0, n) - exact))
                   for n in (10, 20, 40, 80)]
        assert convergence_order(samples).order_within(4.0, 0.3)

    def test_default_steps(self):
        assert default_steps(0.0, 1.0) == 1000
        assert default_steps(0.5, 0.25) == 250
        assert default_steps(0.0, 1e-9) == 1

    def test_identity_without_integration(self, sphere):
        path = segment_path([1.0, 0.0], [1.0, 1.0])
        H = transport_matrix(sphere, path, 0.4, 0.4)
        assert np.array_equal(H.value, np.eye(2)) and H.integrator_steps == 0

    def test_outside_the_path_domain(self, rotation_model):
        with pytest.raises(DomainError):
            propagate(rotation_model, segment_path([0.0, 0.0], [1.0, 0.0]), 0.0, 1.5)

    def test_non_finite_coefficient(self):
        ramp = models.make_scalar_ramp(np.nan)
        with pytest.raises(NumericError):
            propagate(ramp, segment_path([0.0], [1.0]), 0.0, 1.0)


@pytest.mark.parametrize("name", sorted(models.zoo()))
def test_axioms_on_the_zoo(name):
    provider = models.zoo()[name]
    x = np.full(provider.base_dim, 1.0)
    path = segment_path(x, x + 0.4)
    res = axiom_residuals(provider, path, 0.9, 0.1, 0.6)
    assert max(res.values()) <= 1e-8


class TestAxiomProperties:
    @settings(max_examples=25, deadline=None)
    @given(r=unit, s=unit, t=unit)
    def test_cocycle_and_inverse_on_sphere(self, r, s, t):
        provider = models.make_sphere_levi_civita()
        path = quadratic_arc_path([1.0, 0.0], [1.6, 0.4], [1.2, 1.3])
        res = axiom_residuals(provider, path, r, s, t)
        assert res["cocycle"] <= 1e-8 and res["inverse"] <= 1e-8 and res["identity"] == 0.0

    @settings(max_examples=25, deadline=None)
    @given(s=unit, t=unit, a=st.floats(-3, 3), b=st.floats(-3, 3),
           u=st.tuples(st.floats(-5, 5), st.floats(-5, 5)), v=st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
    def test_linearity(self, s, t, a, b, u, v):
        provider = models.make_constant_torsion_plane()
        path = segment_path([0.0, 0.0], [0.7, 1.0])
        u, v = np.array(u), np.array(v)
        lhs = transport_vector(provider, path, s, t, a * u + b * v, steps=50)
        rhs = a * transport_vector(provider, path, s, t, u, steps=50) + b * transport_vector(provider, path, s, t, v, steps=50)
        assert np.linalg.norm(lhs - rhs) <= 1e-12 * (1.0 + np.linalg.norm(lhs))

    @settings(max_examples=25, deadline=None)
    @given(s=unit, t=unit)
    def test_transport_preserves_the_sphere_metric(self, s, t):
        provider = models.make_sphere_levi_civita()
        path = quadratic_arc_path([1.0, 0.0], [1.6, 0.4], [1.2, 1.3])
        H = propagate(provider, path, s, t)

        def g(u):
            return np.diag([1.0, np.sin(path.point(u)[0]) ** 2])

        assert np.linalg.norm(H.T @ g(t) @ H - g(s)) <= 1e-9
