import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltransport import models
from ltransport.bundle_model import Section, quadratic_arc_path, segment_path
from ltransport.convergence import convergence_order
from ltransport.derivation import derive_section, derive_section_limit, transported_section


def line():
    return segment_path([0.0, 0.0], [1.0, 0.0])


def arc():
    return quadratic_arc_path([1.0, 0.0], [1.6, 0.4], [1.2, 1.3])


def test_flat_model_differentiates_components(flat):
    assert np.allclose(derive_section(flat, line(), lambda s: np.array([s, 1.0]), 0.4), [1.0, 0.0])


def test_constant_section_on_rotation_model(rotation_model):
    assert np.allclose(derive_section(rotation_model, line(), lambda s: np.array([1.0, 0.0]), 0.4), [0.0, 1.0])


def test_analytic_partials_are_used(ramp):
    sec = Section(lambda s: np.array([s**2]), partials=lambda s: (np.array([2 * s]),), along=segment_path([0.0], [1.0]))
    assert np.allclose(derive_section(ramp, sec.along, sec, 0.5), [1.0 + 0.5 * 0.25])


@pytest.mark.parametrize("model", ["sphere", "torsion_plane", "constant", "frame:shear"])
def test_transported_sections_are_annihilated(model):
    provider = models.zoo()[model]
    path = arc() if model == "sphere" else quadratic_arc_path([0.1, 0.2], [0.5, 1.0], [0.9, 0.4])
    sec = transported_section(provider, path, 0.1, [0.7, -0.3])
    for s in (0.3, 0.55, 0.8):
        assert np.linalg.norm(derive_section(provider, path, sec, s)) <= 1e-7


def test_limit_converges_at_second_order(sphere):
    path = arc()
    sec = lambda s: np.array([np.cos(s), s**2])  # noqa: E731
    exact = derive_section(sphere, path, sec, 0.5)
    samples = [(e, np.linalg.norm(derive_section_limit(sphere, path, sec, 0.5, e) - exact))
               for e in (4e-2, 2e-2, 1e-2, 5e-3)]
    assert convergence_order(samples).order_within(2.0, 0.3)


def test_limit_matches_component_form(sphere):
    path = arc()
    sec = lambda s: np.array([np.cos(s), s**2])  # noqa: E731
    exact = derive_section(sphere, path, sec, 0.5)
    assert np.linalg.norm(derive_section_limit(sphere, path, sec, 0.5, 1e-3) - exact) <= 1e-6


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-3, 3), b=st.floats(-3, 3), f=st.floats(-2, 2), s=st.floats(0.05, 0.95))
def test_derivation_is_linear_and_leibniz(a, b, f, s):
    provider = models.make_sphere_levi_civita()
    path = arc()
    s1 = lambda u: np.array([np.sin(u), 1.0])  # noqa: E731
    s2 = lambda u: np.array([u, u**3])  # noqa: E731
    combo = derive_section(provider, path, lambda u: a * s1(u) + b * s2(u), s)
    parts = a * derive_section(provider, path, s1, s) + b * derive_section(provider, path, s2, s)
    assert np.linalg.norm(combo - parts) <= 1e-8 * (1 + np.linalg.norm(combo))
    scaled = derive_section(provider, path, lambda u: np.exp(f * u) * s1(u), s)
    leibniz = f * np.exp(f * s) * s1(s) + np.exp(f * s) * derive_section(provider, path, s1, s)
    assert np.linalg.norm(scaled - leibniz) <= 1e-7 * (1 + np.linalg.norm(scaled))
