import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import expm_taylor

from ltransport import models
from ltransport.bundle_model import Path, polyline_path, segment_path
from ltransport.errors import ArgumentError, NotFlatError
from ltransport.flatness import (
    canonical_route,
    construct_flat_frame,
    flat_frame_residual,
    flatness_verdict,
    frame_transport,
    grid_nodes,
    path_independence_defect,
    reparametrization_defect,
    route_catalogue,
)

M1_NOT_FLAT_DEFECT = 0.412734569819174
UNIT_BOX = ((0.0, 1.0), (0.0, 1.0))
SPHERE_BOX = ((np.pi / 2 - 0.5, np.pi / 2 + 0.5), (0.5, 1.5))


def quarter_circle():
    return Path(
        (0.0, np.pi / 2),
        point=lambda s: np.array([np.cos(s), np.sin(s)]),
        velocity=lambda s: np.array([-np.sin(s), np.cos(s)]),
        acceleration=lambda s: np.array([-np.cos(s), -np.sin(s)]),
        name="circle",
    )


def test_frozen_defect_matches_oracle():
    G = models.ROTATION_GENERATOR
    assert np.linalg.norm(expm_taylor(-G) - expm_taylor(-np.sqrt(0.5) * G)) == pytest.approx(M1_NOT_FLAT_DEFECT, abs=1e-13)


class TestPathIndependence:
    def test_flat_segment_and_arc(self, flat):
        chord = segment_path([1.0, 0.0], [0.0, 1.0])
        assert path_independence_defect(flat, chord, quarter_circle()) <= 1e-10

    def test_sphere_meridian_then_parallel_differs(self, sphere):
        x, y = [1.0, 0.0], [1.5, 1.0]
        first_meridian = polyline_path([x, [1.5, 0.0], y])
        first_parallel = polyline_path([x, [1.0, 1.0], y])
        assert path_independence_defect(sphere, first_meridian, first_parallel) >= 1e-3

    def test_torsion_plane_routes_agree(self, torsion_plane):
        x, y = [0.1, 0.2], [0.9, 0.7]
        routes = route_catalogue(x, y)
        assert len(routes) == 3
        for other in routes[1:]:
            assert path_independence_defect(torsion_plane, routes[0], other) <= 1e-9

    def test_rotation_model_depends_on_length(self, rotation_model):
        a = segment_path([0.0, 0.0], [0.5, 0.5], (0.0, 1.0))
        b = segment_path([0.0, 0.0], [0.5, 0.5], (0.0, np.sqrt(0.5)))
        assert path_independence_defect(rotation_model, a, b) == pytest.approx(M1_NOT_FLAT_DEFECT, abs=1e-10)

    def test_endpoint_mismatch(self, flat):
        with pytest.raises(ArgumentError, match="endpoints"):
            path_independence_defect(flat, segment_path([0.0, 0.0], [1.0, 0.0]),
                                     segment_path([0.0, 0.0], [1.0, 1e-6]))


@settings(max_examples=15, deadline=None)
@given(a=st.floats(-0.9, 0.9), scale=st.floats(0.5, 3.0))
def test_connection_transport_ignores_reparametrization(a, scale):
    provider = models.make_sphere_levi_civita()
    path = segment_path([1.0, 0.0], [1.4, 1.2])

    def phi(u):
        v = u / scale
        return v + a * np.sin(np.pi * v) / np.pi

    def dphi(u):
        return (1.0 + a * np.cos(np.pi * u / scale)) / scale

    assert reparametrization_defect(provider, path, phi, dphi, (0.0, scale)) <= 1e-8


class TestRoutes:
    def test_catalogue_endpoints(self):
        for route in route_catalogue([0.0, 1.0], [2.0, -1.0]):
            assert np.allclose(route.start, [0.0, 1.0]) and np.allclose(route.end, [2.0, -1.0])

    def test_shared_coordinate_leaves_only_the_segment(self):
        assert [r.name for r in route_catalogue([0.0, 1.0], [2.0, 1.0])] == ["segment"]

    def test_one_dimensional(self):
        routes = route_catalogue([0.0], [1.0])
        assert [r.domain for r in routes] == [(0.0, 1.0), (0.0, 2.0)]

    def test_coincident_endpoints(self):
        with pytest.raises(ArgumentError):
            route_catalogue([0.5, 0.5], [0.5, 0.5])

    def test_canonical_route(self):
        route = canonical_route([0.0, 0.0, 0.0], [1.0, 0.0, 2.0])
        assert route.domain == (0.0, 3.0) and route.breaks == (1.0,)
        assert canonical_route([1.0, 2.0], [1.0, 2.0]) is None

    def test_grid(self):
        nodes = grid_nodes(UNIT_BOX, 3)
        assert len(nodes) == 9 and np.array_equal(nodes[4], [0.5, 0.5])
        with pytest.raises(ArgumentError):
            grid_nodes(UNIT_BOX, 1)
        with pytest.raises(ArgumentError):
            grid_nodes(((1.0, 0.0),), 3)


class TestFlatFrame:
    def test_torsion_plane(self, torsion_plane):
        frame = construct_flat_frame(torsion_plane, UNIT_BOX, (0.0, 0.0), np.eye(2))
        assert flat_frame_residual(torsion_plane, frame, grid_nodes(UNIT_BOX, 3)) <= 1e-7

    def test_frame_is_transported_seed(self, torsion_plane):
        frame = construct_flat_frame(torsion_plane, UNIT_BOX, (0.0, 0.0), np.eye(2))
        assert np.allclose(frame([0.3, 0.8]), np.diag([np.exp(-0.2), 1.0]), atol=1e-12)

    def test_any_route_in_the_flat_frame_is_trivial(self, torsion_plane):
        frame = construct_flat_frame(torsion_plane, UNIT_BOX, (0.5, 0.5), [[1.0, 1.0], [0.0, 2.0]])
        for route in route_catalogue([0.1, 0.9], [0.8, 0.2]):
            assert np.linalg.norm(frame_transport(torsion_plane, frame, route) - np.eye(2)) <= 1e-7

    def test_shear_frame_model(self):
        provider = models.zoo()["frame:shear"]
        frame = construct_flat_frame(provider, UNIT_BOX, (0.0, 0.0), np.eye(2))
        assert flat_frame_residual(provider, frame, grid_nodes(UNIT_BOX, 3)) <= 1e-7

    def test_rotation_model_is_not_path_flat(self, rotation_model):
        with pytest.raises(NotFlatError) as info:
            construct_flat_frame(rotation_model, UNIT_BOX, (0.0, 0.0), np.eye(2))
        assert info.value.defect == pytest.approx(M1_NOT_FLAT_DEFECT, abs=1e-9)
        assert info.value.routes == ("canonical", "segment")

    def test_sphere_is_not_flat(self, sphere):
        with pytest.raises(NotFlatError):
            construct_flat_frame(sphere, SPHERE_BOX, (SPHERE_BOX[0][0], 0.5), np.eye(2))

    @pytest.mark.parametrize("basis,base", [(np.zeros((2, 2)), (0.0, 0.0)), (np.eye(3), (0.0, 0.0)),
                                            (np.eye(2), (2.0, 0.0))])
    def test_bad_arguments(self, flat, basis, base):
        with pytest.raises(ArgumentError):
            construct_flat_frame(flat, UNIT_BOX, base, basis)


class TestVerdict:
    @pytest.mark.parametrize("model", ["flat", "torsion_plane", "frame:shear"])
    def test_flat_models(self, model):
        rep = flatness_verdict(models.zoo()[model], UNIT_BOX)
        assert rep.flat_by_curvature and rep.flat_by_paths and not rep.discrepancy_flag

    def test_sphere(self, sphere):
        rep = flatness_verdict(sphere, SPHERE_BOX)
        assert not rep.flat_by_curvature and not rep.flat_by_paths
        assert rep.consistent and rep.equivalence_expected
        assert rep.curvature_sup > 1.0

    @pytest.mark.parametrize("model", ["constant", "frame:rotation", "frame:diag_exp"])
    def test_path_functional_discrepancy_is_flagged(self, model):
        rep = flatness_verdict(models.zoo()[model], UNIT_BOX)
        assert rep.discrepancy_flag and not rep.equivalence_expected
        assert rep.flat_by_curvature and not rep.flat_by_paths

    def test_one_dimensional_ramp(self, ramp):
        rep = flatness_verdict(ramp, ((0.0, 1.0),))
        assert rep.curvature_sup == 0.0 and not rep.flat_by_paths

    def test_threads_do_not_change_the_verdict(self, sphere):
        a = flatness_verdict(sphere, SPHERE_BOX, workers=1).as_dict()
        b = flatness_verdict(sphere, SPHERE_BOX, workers=4).as_dict()
        assert a == b

    def test_custom_tolerance(self, sphere):
        rep = flatness_verdict(sphere, SPHERE_BOX, tolerances={"curvature": 10.0, "paths": 10.0})
        assert rep.flat_by_curvature and rep.flat_by_paths and rep.tolerances["paths"] == 10.0
