"""Angles, floor points, and the alignment fit.

The alignment tests recover randomly drawn 2x3 transforms from generated
correspondences, which is the independent oracle: if the fit is right, it
must reproduce the matrix that produced the data.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from floornav.errors import DegenerateConfiguration, InvalidSlicing, TooFewPoints
from floornav.geometry import (
    Direction,
    FloorPoint,
    FloorTransform,
    MapPoint3,
    circular_error_deg,
    estimate_floor_transform,
    normalize_deg,
    signed_delta_deg,
    slice_directions,
    transform_residuals,
    transform_rms,
)

angles = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


def random_transform(rng) -> FloorTransform:
    while True:
        m = rng.uniform(-5.0, 5.0, size=(2, 3))
        if np.linalg.matrix_rank(m) == 2:
            return FloorTransform(m)


def correspondences_for(transform, points3d):
    return [(p, transform.apply(p)) for p in points3d]


def test_normalize_examples():
    assert normalize_deg(0.0) == 0.0
    assert normalize_deg(360.0) == 0.0
    assert normalize_deg(-90.0) == 270.0
    assert normalize_deg(540.0) == 180.0


@given(angles)
def test_normalize_range(a):
    assert 0.0 <= normalize_deg(a) < 360.0


@given(angles, angles)
def test_signed_delta_range(a, b):
    d = signed_delta_deg(a, b)
    assert -180.0 < d <= 180.0


@given(angles, angles)
def test_signed_delta_antisymmetric_off_boundary(a, b):
    d = signed_delta_deg(a, b)
    if abs(d) < 179.999:  # both directions are the same rotation at exactly 180
        assert signed_delta_deg(b, a) == pytest.approx(-d, abs=1e-6)


def test_signed_delta_turn_example():
    # facing 90, target due +x (bearing 0): turn right 90
    assert signed_delta_deg(0.0, 90.0) == -90.0
    assert signed_delta_deg(90.0, 90.0) == 0.0


@given(angles, angles)
def test_circular_error_bounds_and_symmetry(a, b):
    e = circular_error_deg(a, b)
    assert 0.0 <= e <= 180.0
    assert e == pytest.approx(circular_error_deg(b, a), abs=1e-6)


def test_direction_rotation_wraps():
    d = Direction(350.0).rotated(20.0)
    assert d.degrees == pytest.approx(10.0)
    assert Direction(10.0).error_to(Direction(350.0)) == pytest.approx(20.0)


def test_floor_point_distance():
    assert FloorPoint(0.0, 0.0).distance_to(FloorPoint(3.0, 4.0)) == pytest.approx(5.0)


def test_point_rejects_nan():
    with pytest.raises(ValueError):
        FloorPoint(float("nan"), 0.0)
    with pytest.raises(ValueError):
        MapPoint3(0.0, float("inf"), 0.0)


# --- alignment fit -----------------------------------------------------------


def test_transform_exact_recovery_single():
    rng = np.random.default_rng(3)
    truth = random_transform(rng)
    pts = [MapPoint3(*rng.uniform(-10, 10, 3)) for _ in range(6)]
    fitted = estimate_floor_transform(correspondences_for(truth, pts))
    np.testing.assert_allclose(fitted.matrix, truth.matrix, atol=1e-9)


def test_transform_recovery_many_sizes():
    rng = np.random.default_rng(11)
    for h in range(3, 11):
        truth = random_transform(rng)
        pts = [MapPoint3(*rng.uniform(-10, 10, 3)) for _ in range(h)]
        pairs = correspondences_for(truth, pts)
        fitted = estimate_floor_transform(pairs)
        np.testing.assert_allclose(fitted.matrix, truth.matrix, atol=1e-8)
        assert transform_rms(fitted, pairs) < 1e-8


def test_transform_ignores_reconstruction_y():
    """Only (x, z) and the constant column matter; y is not an input."""
    rng = np.random.default_rng(5)
    truth = random_transform(rng)
    pts = [MapPoint3(*rng.uniform(-10, 10, 3)) for _ in range(5)]
    pairs = correspondences_for(truth, pts)
    lifted = [(MapPoint3(p.x, p.y + 100.0, p.z), f) for p, f in pairs]
    fitted = estimate_floor_transform(lifted)
    np.testing.assert_allclose(fitted.matrix, truth.matrix, atol=1e-9)


def test_transform_too_few_points():
    rng = np.random.default_rng(0)
    truth = random_transform(rng)
    pts = [MapPoint3(*rng.uniform(-10, 10, 3)) for _ in range(2)]
    with pytest.raises(TooFewPoints):
        estimate_floor_transform(correspondences_for(truth, pts))


def test_transform_collinear_is_degenerate():
    pairs = [
        (MapPoint3(t, 0.0, 2.0 * t), FloorPoint(t, t)) for t in (0.0, 1.0, 2.0, 3.0)
    ]
    with pytest.raises(DegenerateConfiguration):
        estimate_floor_transform(pairs)


def test_transform_repeated_point_is_degenerate():
    p = MapPoint3(1.0, 0.0, 1.0)
    with pytest.raises(DegenerateConfiguration):
        estimate_floor_transform([(p, FloorPoint(0, 0))] * 4)


def test_residuals_measure_perturbation():
    rng = np.random.default_rng(9)
    truth = random_transform(rng)
    pts = [MapPoint3(*rng.uniform(-10, 10, 3)) for _ in range(8)]
    pairs = correspondences_for(truth, pts)
    nudged = [(p, FloorPoint(f.x + 1.0, f.y)) for p, f in pairs[:1]] + pairs[1:]
    r = transform_residuals(truth, nudged)
    assert r[0] == pytest.approx(1.0)
    np.testing.assert_allclose(r[1:], 0.0, atol=1e-12)


def test_heading_to_floor_identity_convention():
    ident = FloorTransform(np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]))
    assert ident.heading_to_floor(0.0).degrees == pytest.approx(0.0)
    assert ident.heading_to_floor(90.0).degrees == pytest.approx(90.0)


def test_heading_to_floor_follows_rotation():
    c, s = math.cos(math.radians(30)), math.sin(math.radians(30))
    rot = FloorTransform(np.array([[c, 7.0, -s], [s, -2.0, c]]))
    assert rot.heading_to_floor(0.0).degrees == pytest.approx(30.0)
    assert rot.heading_to_floor(45.0).degrees == pytest.approx(75.0)


# --- panorama slicing --------------------------------------------------------


def test_slice_directions_cover_circle():
    dirs = slice_directions(Direction(10.0), 18, 20.0)
    assert len(dirs) == 18
    assert dirs[0].degrees == pytest.approx(30.0)
    assert dirs[-1].degrees == pytest.approx(10.0)  # t = m lands back on base
    degs = sorted(d.degrees for d in dirs)
    assert np.allclose(np.diff(degs), 20.0)


def test_slice_directions_validates_coverage():
    with pytest.raises(InvalidSlicing):
        slice_directions(Direction(0.0), 17, 20.0)
    with pytest.raises(InvalidSlicing):
        slice_directions(Direction(0.0), 0, 360.0)
