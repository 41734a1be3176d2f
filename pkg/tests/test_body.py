"""Tests for convex bodies, their gauges and duality maps."""
import math

import numpy as np
import pytest
import voluptuous as vol

from packrigid.geometry.body import (
    BodyError,
    Disc,
    EllipseBody,
    ExpFamilyBody,
    GaugeBlendBody,
    NonSmoothPointError,
    PNormBody,
    ProfileBody,
    RetargetError,
    body_distance,
    body_from_descriptor,
    body_from_profile,
    dual_map_inverse_check,
    hausdorff_distance,
    radial_profile,
    retarget_supports,
)
from packrigid.geometry.profile import (
    BodyProfile,
    PolygonProfile,
    check_curvature,
    ProfileError,
    SplineProfile,
    uniform_angles,
    unit_vectors,
)

from .conftest import exp_family_body


def _smooth_profile_body():
    t = uniform_angles(256)
    return body_from_profile(SplineProfile(1.0 + 0.02 * np.cos(2.0 * t + 0.4)))


BODIES = {
    "disc": Disc,
    "ellipse": lambda: EllipseBody([[2.0, 0.3], [0.1, 1.0]]),
    "pnorm": lambda: PNormBody(3.0),
    "expfamily": exp_family_body,
    "profile": _smooth_profile_body,
    "blend": lambda: GaugeBlendBody(Disc(), PNormBody(3.0), 0.4),
}


@pytest.fixture(name="points")
def points_fixture():
    rng = np.random.default_rng(5)
    angles = rng.uniform(0.0, 2.0 * math.pi, 1000)
    lengths = rng.uniform(0.5, 2.0, 1000)
    return unit_vectors(angles) * lengths[:, None]


@pytest.mark.parametrize("name", sorted(BODIES))
def test_duality_identity(name, points):
    """phi(x) . x = ||x||^2 for every body."""
    body = BODIES[name]()
    gauge = body.norm(points)
    phi = body.duality_map(points)
    lhs = np.einsum("ij,ij->i", phi, points)
    assert np.all(np.abs(lhs - gauge**2) <= 1e-8 * (1.0 + gauge**2))


@pytest.mark.parametrize("name", sorted(BODIES))
def test_gauge_is_homogeneous_and_symmetric(name, points):
    body = BODIES[name]()
    gauge = body.norm(points)
    assert np.all(gauge > 0.0)
    assert np.allclose(body.norm(3.5 * points), 3.5 * gauge, rtol=1e-10)
    assert np.allclose(body.norm(-points), gauge, rtol=1e-10)


@pytest.mark.parametrize("alpha", [-2.0, -1.0, 0.5, 3.0])
@pytest.mark.parametrize("name", sorted(BODIES))
def test_duality_map_is_homogeneous(name, alpha, points):
    body = BODIES[name]()
    phi = body.duality_map(points[:200])
    scaled = body.duality_map(alpha * points[:200])
    assert np.allclose(scaled, alpha * phi, rtol=1e-8, atol=1e-10)


@pytest.mark.parametrize("name", sorted(BODIES))
def test_duality_map_is_the_gradient(name, points):
    """phi matches a central difference of half the squared gauge."""
    body = BODIES[name]()
    sample = points[:50]
    h = 1e-6
    grad = np.zeros_like(sample)
    for i in range(2):
        step = np.zeros(2)
        step[i] = h
        grad[:, i] = (
            body.norm(sample + step) ** 2 - body.norm(sample - step) ** 2
        ) / (4.0 * h)
    phi = body.duality_map(sample)
    scale = 1.0 + np.linalg.norm(sample, axis=1)
    assert np.all(np.linalg.norm(grad - phi, axis=1) <= 1e-5 * scale)


def test_closed_form_dual_norms(points):
    pnorm = PNormBody(3.0)
    expected = np.sum(np.abs(points) ** 1.5, axis=1) ** (1.0 / 1.5)
    assert np.allclose(pnorm.dual_norm(points), expected)
    assert np.allclose(Disc().dual_norm(points), np.linalg.norm(points, axis=1))


def test_sampled_dual_norm_matches_closed_form(points):
    sampled = ProfileBody(SplineProfile(np.ones(256)))
    expected = np.linalg.norm(points[:100], axis=1)
    assert np.allclose(sampled.dual_norm(points[:100]), expected)
    ellipse = EllipseBody([[2.0, 0.0], [0.0, 1.0]])
    via_profile = ProfileBody(BodyProfile(ellipse))
    assert np.allclose(
        via_profile.dual_norm(points[:100]), ellipse.dual_norm(points[:100]), rtol=1e-7
    )


def test_dual_map_is_inverted_by_the_dual_body(points):
    assert dual_map_inverse_check(EllipseBody([[2.0, 0.3], [0.1, 1.0]]), points) < 1e-12
    assert dual_map_inverse_check(PNormBody(3.0), points) < 1e-9


def test_sampled_dual_inverts_the_exp_family_duality_map():
    directions = unit_vectors(uniform_angles(200) + 0.01)
    assert dual_map_inverse_check(exp_family_body(), directions) <= 1e-5


def test_exp_family_boundary_is_the_level_set():
    body = exp_family_body()
    boundary = body.boundary(200)
    assert np.allclose(body.potential(boundary), 1.0, atol=1e-9)
    assert np.allclose(body.norm(boundary), 1.0)


@pytest.mark.parametrize(
    "directions,w",
    [
        ([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], math.log(6.0)),
        ([[1.0, 0.0], [0.0, 1.0]], 5.0),
        ([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]], 5.0),
    ],
    ids=["weight", "two-directions", "collinear"],
)
def test_exp_family_rejects_bad_parameters(directions, w):
    with pytest.raises(BodyError):
        ExpFamilyBody(directions, w)


def test_pnorm_flags():
    assert PNormBody(2.0).euclidean
    assert PNormBody(2.0).positive_curvature
    assert not PNormBody(3.0).euclidean
    assert not PNormBody(3.0).positive_curvature
    with pytest.raises(BodyError):
        PNormBody(1.0)


def test_square_body_has_kinks():
    square = ProfileBody(PolygonProfile(((1.0, 0.0), (0.0, 1.0))))
    assert not square.smooth
    assert square.norm(np.array([3.0, 1.0])) == pytest.approx(3.0)
    assert np.allclose(square.duality_map(np.array([3.0, 1.0])), [3.0, 0.0])
    with pytest.raises(NonSmoothPointError):
        square.duality_map(np.array([1.0, 1.0]))


def test_radial_profile_of_the_euclidean_pnorm():
    profile = radial_profile(PNormBody(2.0))
    assert np.allclose(profile.samples(), 1.0)
    with pytest.raises(ProfileError):
        radial_profile(PNormBody(2.0), samples=63)


def test_exp_family_profile_round_trip():
    body = exp_family_body()
    rebuilt = body_from_profile(radial_profile(body))
    assert body_distance(body, rebuilt) <= 1e-6
    directions = unit_vectors(uniform_angles(90) + 0.02)
    assert np.allclose(
        rebuilt.duality_map(directions), body.duality_map(directions), atol=1e-4
    )


def test_random_exp_family_bodies_have_positive_curvature():
    rng = np.random.default_rng(13)
    for _ in range(20):
        j = int(rng.integers(3, 6))
        while True:
            angles = np.sort(rng.uniform(0.0, math.pi, size=j))
            if np.min(np.diff(np.append(angles, angles[0] + math.pi))) > 0.2:
                break
        w = math.log(2 * j) + rng.uniform(0.2, 3.0)
        body = exp_family_body(angles, w)
        assert check_curvature(BodyProfile(body), count=512) > 0.0


def test_body_from_profile_checks_periodicity():
    with pytest.raises(ProfileError):
        body_from_profile(PolygonProfile(((1.0, 0.0), (0.0, 1.0))))
    square = body_from_profile(PolygonProfile(((1.0, 0.0), (0.0, 1.0))), strict=False)
    assert square.norm(np.array([0.0, 2.0])) == pytest.approx(2.0)


def test_body_distances():
    disc = Disc()
    ellipse = EllipseBody([[2.0, 0.0], [0.0, 1.0]])
    assert body_distance(disc, disc) == 0.0
    assert body_distance(disc, ellipse) == pytest.approx(0.5)
    assert hausdorff_distance(disc, ellipse) == pytest.approx(1.0)


def test_descriptors_rebuild_the_body(points):
    for name, factory in BODIES.items():
        body = factory()
        rebuilt = body_from_descriptor(body.descriptor())
        assert type(rebuilt) is type(body), name
        assert np.allclose(rebuilt.norm(points), body.norm(points)), name


@pytest.mark.parametrize(
    "data",
    [
        {"kind": "hexagon"},
        {"kind": "pnorm", "p": 0.5},
        {"kind": "expfamily", "directions": [[1, 0], [0, 1], [1, 1]], "w": 1.0},
        {"kind": "profile", "profile": {"n": 4, "samples": [1.0] * 64}},
        {"kind": "ellipse", "matrix": [[1, 0], [2, 0]]},
    ],
    ids=["kind", "p", "weight", "sample-count", "singular"],
)
def test_invalid_descriptors(data):
    with pytest.raises(vol.Invalid):
        body_from_descriptor(data)


def _rotated(vectors, angle):
    c, s = math.cos(angle), math.sin(angle)
    return vectors @ np.array([[c, s], [-s, c]])


@pytest.mark.parametrize("base", [Disc(), PNormBody(2.0)], ids=["disc", "pnorm2"])
def test_retarget_moves_supports(base):
    angles = np.array([0.3, 1.3, 2.3, 0.3 + math.pi + 0.5])
    contacts = unit_vectors(angles) / base.norm(unit_vectors(angles))[:, None]
    targets = _rotated(base.duality_map(contacts), 0.005)
    bent = retarget_supports(base, contacts, targets, eps=1e-2)

    assert isinstance(bent, ProfileBody)
    assert np.allclose(bent.norm(contacts), 1.0, atol=1e-12)
    phi = bent.duality_map(contacts)
    cross = phi[:, 0] * targets[:, 1] - phi[:, 1] * targets[:, 0]
    assert np.all(np.abs(cross) <= 1e-8 * np.linalg.norm(targets, axis=1))
    assert np.all(np.einsum("ij,ij->i", phi, targets) > 0.0)
    assert body_distance(base, bent) <= 1e-2


def test_retarget_without_change_keeps_the_body():
    disc = Disc()
    contacts = unit_vectors(np.array([0.2, 1.4]))
    assert retarget_supports(disc, contacts, disc.duality_map(contacts), 1e-2) is disc


def test_retarget_rejects_backward_targets():
    disc = Disc()
    contacts = unit_vectors(np.array([0.2, 1.4]))
    with pytest.raises(RetargetError):
        retarget_supports(disc, contacts, -contacts, 1e-2)
    with pytest.raises(RetargetError):
        retarget_supports(disc, contacts, contacts[:1], 1e-2)


def test_retarget_respects_eps():
    disc = Disc()
    contacts = unit_vectors(np.array([0.3, 1.3, 2.3]))
    targets = _rotated(contacts, 0.005)
    with pytest.raises(RetargetError):
        retarget_supports(disc, contacts, targets, eps=1e-7)
