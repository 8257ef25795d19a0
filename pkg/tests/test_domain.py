import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levilab.domain import (
    CATALOG_IDS,
    DegenerateBoundaryError,
    DomainSpec,
    PartialSampleError,
    ProjectionError,
    collar_points,
    get_domain,
    normal_data,
    project_to_boundary,
    sample_boundary,
    taylor_normal_check,
    unit_normal,
)
from levilab.expr import parse_field_expression
from levilab.fields import to_real


@pytest.mark.parametrize("name", CATALOG_IDS)
def test_samples_lie_on_boundary(name):
    spec = get_domain(name)
    B = sample_boundary(spec, 300, seed=1)
    assert len(B) == 300
    assert np.abs(spec.rho(B.points)).max() <= 1e-12
    assert np.allclose(np.linalg.norm(B.normals, axis=1), 1.0)


def test_landmarks_come_first():
    B = sample_boundary(get_domain("egg2"), 20)
    assert np.allclose(B.points[0], [1, 0, 0, 0])
    assert np.allclose(B.points[8], [0, 0, 1, 0])


def test_sampling_is_seeded():
    spec = get_domain("skewed-egg2")
    a = sample_boundary(spec, 100, seed=3).points
    b = sample_boundary(spec, 100, seed=3).points
    c = sample_boundary(spec, 100, seed=4).points
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_ball_normal_is_position():
    spec = get_domain("ball2")
    z = np.array([0.6, 0.8j])
    assert np.allclose(unit_normal(spec, to_real(z)), z)


def test_real_normal_points_outward():
    spec = get_domain("egg2")
    _, _, nu = normal_data(spec, np.array([[0.0, 0.0, 1.0, 0.0]]))
    assert np.allclose(nu[0], [0, 0, 1, 0])


def test_projection_of_egg_axis_point():
    cp = project_to_boundary(get_domain("egg2"), np.array([0.0, 0.0, 0.9, 0.0]))
    assert cp.side == "interior"
    assert cp.distance == pytest.approx(0.1, abs=1e-10)
    assert np.allclose(cp.foot.point, [0, 0, 1, 0], atol=1e-10)


def test_projection_from_outside():
    cp = project_to_boundary(get_domain("ball2"), np.array([0.0, 1.1, 0.0, 0.0]))
    assert cp.side == "exterior"
    assert cp.distance == pytest.approx(0.1)


def test_ball_center_is_ambiguous():
    with pytest.raises(ProjectionError):
        project_to_boundary(get_domain("ball2"), np.zeros(4))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 2 * np.pi), st.floats(0.01, 0.2))
def test_projection_recovers_foot(theta, d):
    spec = get_domain("ball2")
    foot = np.array([np.cos(theta), np.sin(theta), 0.0, 0.0])
    cp = project_to_boundary(spec, (1 - d) * foot)
    assert cp.distance == pytest.approx(d, abs=1e-9)
    assert np.allclose(cp.foot.point, foot, atol=1e-8)


def test_collar_depths_and_sides():
    spec = get_domain("egg2")
    B = sample_boundary(spec, 50)
    inner = collar_points(spec, B, side="interior")
    outer = collar_points(spec, B, side="exterior")
    assert np.all(spec.rho(inner.points) < 0)
    assert np.all(spec.rho(outer.points) > 0)
    assert inner.depths.max() == pytest.approx(spec.collar)


def test_empty_boundary_reports_deficit():
    rho = parse_field_expression("-1 + 0*abs2(z1)")
    spec = DomainSpec("flat", rho, 1, 1.0)
    with pytest.raises(PartialSampleError) as info:
        sample_boundary(spec, 10)
    assert info.value.deficit == 10


def test_anchor_must_be_inside():
    with pytest.raises(ValueError):
        DomainSpec("outside", parse_field_expression("1 - abs2(z1)"), 1, 1.0)


def test_unknown_domain():
    with pytest.raises(KeyError):
        get_domain("ball9")


def test_degenerate_gradient():
    rho = parse_field_expression("abs2(z1)^2 - 0.5")
    spec = DomainSpec("flat-center", rho, 1, 1.0)
    with pytest.raises(DegenerateBoundaryError):
        unit_normal(spec, np.zeros(2))


@pytest.mark.parametrize("name", CATALOG_IDS)
def test_taylor_residual_is_quadratic(name):
    spec = get_domain(name)
    B = sample_boundary(spec, 12, seed=2)
    for i in range(len(B)):
        fit = taylor_normal_check(spec, spec.rho, B[i], [1e-3, 2e-3, 4e-3, 8e-3])
        assert fit.exact or fit.slope >= 1.9
