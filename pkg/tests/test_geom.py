import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from funnel.geom import (
    CameraIntrinsics,
    InputDomainError,
    Pose,
    Ray,
    UnitQuat,
    Vec3,
    look_rotation,
    project,
    unproject,
)

from oracles import pinhole_project

CAM = Pose.identity()
INTR = CameraIntrinsics(vertical_fov=math.pi / 2, width_px=640, height_px=360)


def test_project_on_axis_point_maps_to_center():
    assert project(Vec3(0, 0, -1), CAM, INTR) == (320.0, 180.0, 1.0)


def test_project_point_behind_camera_absent():
    assert project(Vec3(0, 0, 1), CAM, INTR) is None


def test_project_matches_pinhole_oracle():
    # expected value computed with the independent pinhole formula
    expected = pinhole_project((0.5, 0, -1), (0, 0, 0), (1, 0, 0, 0), math.pi / 2, 640, 360)
    assert expected == (410.0, 180.0, 1.0)
    got = project(Vec3(0.5, 0, -1), CAM, INTR)
    assert got == pytest.approx(expected, abs=1e-9)


def test_project_oracle_agreement_random_points(rng):
    q = UnitQuat.from_axis_angle(Vec3(0.3, 1.0, 0.2), 0.8)
    cam = Pose(Vec3(1.0, 2.0, 3.0), q)
    intr = CameraIntrinsics(vertical_fov=1.1, width_px=512, height_px=384)
    quat = (q.w, q.x, q.y, q.z)
    for _ in range(300):
        p = rng.uniform(-8, 8, 3)
        got = project(Vec3(*p), cam, intr)
        want = pinhole_project(tuple(p), (1.0, 2.0, 3.0), quat, 1.1, 512, 384)
        if want is None or not (intr.near <= want[2] <= intr.far):
            assert got is None
        else:
            assert got == pytest.approx(want, abs=1e-9)


def test_unproject_center_pixel_looks_forward():
    ray = unproject(320, 180, CAM, INTR)
    assert ray.origin == Vec3(0, 0, 0)
    assert ray.direction.as_tuple() == pytest.approx((0, 0, -1), abs=1e-12)


def test_unproject_corner_pixel_upper_left_octant():
    d = unproject(0, 0, CAM, INTR).direction
    assert d.x < 0 and d.y > 0 and d.z < 0


def test_unproject_out_of_bounds_rejected():
    with pytest.raises(InputDomainError):
        unproject(640, 0, CAM, INTR)
    with pytest.raises(InputDomainError):
        unproject(0, -1, CAM, INTR)


def test_project_unproject_round_trip_1000_pixels(rng):
    q = UnitQuat.from_axis_angle(Vec3(0.1, 1.0, -0.4), -1.2)
    cam = Pose(Vec3(-2.0, 1.5, 4.0), q)
    intr = CameraIntrinsics(vertical_fov=1.3, width_px=640, height_px=360)
    fwd = cam.orientation.forward()
    for _ in range(1000):
        x = float(rng.integers(0, 640))
        y = float(rng.integers(0, 360))
        ray = unproject(x, y, cam, intr)
        depth = rng.uniform(intr.near * 1.5, intr.far * 0.5)
        t = depth / ray.direction.dot(fwd)
        back = project(ray.at(t), cam, intr)
        assert back is not None
        assert back[0] == pytest.approx(x, abs=0.5)
        assert back[1] == pytest.approx(y, abs=0.5)


def test_round_trip_point_distance():
    # unproject(project(p)) passes within 1e-4 m of p at p's depth
    q = UnitQuat.from_axis_angle(Vec3(0, 1, 0), 0.7)
    cam = Pose(Vec3(0.5, 1.0, 2.0), q)
    intr = CameraIntrinsics(vertical_fov=1.0, width_px=800, height_px=450)
    rng = np.random.default_rng(7)
    checked = 0
    while checked < 200:
        p = Vec3(*rng.uniform(-6, 6, 3))
        pr = project(p, cam, intr)
        if pr is None:
            continue
        x, y, depth = pr
        ray = unproject(min(x, 799.999), min(y, 449.999), cam, intr)
        # walk to the same camera depth and compare
        fwd = cam.orientation.forward()
        t = depth / ray.direction.dot(fwd)
        delta = (ray.at(t) - p).norm()
        assert delta < 1e-4
        checked += 1


@given(
    st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1),
    st.floats(-math.pi, math.pi),
)
@settings(max_examples=200, deadline=None)
def test_quaternion_rotation_preserves_length(ax, ay, az, ang):
    v = Vec3(ax * 2 + 0.1, ay * 2 - 0.2, az * 2 + 0.3)
    axis = Vec3(ax + 1.1, ay - 1.3, az + 0.7)
    q = UnitQuat.from_axis_angle(axis, ang)
    assert q.rotate(v).norm() == pytest.approx(v.norm(), abs=1e-9)


def test_quat_compose_matches_sequential_rotation():
    qa = UnitQuat.from_axis_angle(Vec3(0, 1, 0), 0.5)
    qb = UnitQuat.from_axis_angle(Vec3(1, 0, 0), -0.3)
    v = Vec3(1.0, 2.0, -0.5)
    lhs = (qa * qb).rotate(v)
    rhs = qa.rotate(qb.rotate(v))
    assert lhs.as_tuple() == pytest.approx(rhs.as_tuple(), abs=1e-12)


def test_look_rotation_points_forward():
    for target in (Vec3(1, 0, 0), Vec3(0, 0, 1), Vec3(-2, 1, 3), Vec3(0, -1, 0), Vec3(0, 1, 0)):
        q = look_rotation(target)
        f = q.forward()
        want = target.normalized()
        assert f.as_tuple() == pytest.approx(want.as_tuple(), abs=1e-9)


def test_pose_compose_and_inverse():
    a = Pose(Vec3(1, 2, 3), UnitQuat.from_axis_angle(Vec3(0, 1, 0), 1.1))
    b = Pose(Vec3(-0.5, 0.2, 0.9), UnitQuat.from_axis_angle(Vec3(1, 0, 1), -0.4))
    p = Vec3(0.3, -0.8, 1.5)
    assert a.compose(b).apply(p).as_tuple() == pytest.approx(a.apply(b.apply(p)).as_tuple(), abs=1e-12)
    roundtrip = a.inverse().apply(a.apply(p))
    assert roundtrip.as_tuple() == pytest.approx(p.as_tuple(), abs=1e-12)


def test_slerp_endpoints_exact():
    qa = UnitQuat.from_axis_angle(Vec3(0, 1, 0), 0.9)
    qb = UnitQuat.from_axis_angle(Vec3(1, 0, 0), -1.2)
    assert qa.slerp(qb, 0.0) == qa
    got = qa.slerp(qb, 1.0)
    assert got.dot(qb) == pytest.approx(1.0, abs=1e-9)


def test_ray_requires_unit_direction():
    with pytest.raises(InputDomainError):
        Ray(Vec3(0, 0, 0), Vec3(0, 0, -2))


def test_intrinsics_validation():
    with pytest.raises(InputDomainError):
        CameraIntrinsics(vertical_fov=0.0, width_px=10, height_px=10)
    with pytest.raises(InputDomainError):
        CameraIntrinsics(vertical_fov=1.0, width_px=10, height_px=10, near=2.0, far=1.0)
