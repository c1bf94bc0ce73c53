"""Tests for poses, cameras and spaces"""
import numpy as np
import pytest

from gridfusion.config import PRESETS
from gridfusion.errors import ConfigError, ContractError
from gridfusion.geometry import (
    CameraModel,
    CartesianSpace,
    FrustumSpace,
    Pose,
    apply_pose,
    compose,
    inverse,
    inverse_depth_planes,
    space_from_dict,
    voxel_center,
    world_to_grid,
)


class TestPose:
    """Tests for rigid transforms"""

    def test_identity_leaves_points_unchanged(self):
        """Test that the identity pose maps every point to itself"""
        points = np.array([[1.0, -2.0, 3.5], [0.0, 0.0, 0.0]])
        np.testing.assert_array_equal(Pose.identity().apply(points), points)

    def test_compose_applies_right_operand_first(self):
        """Test that (a ∘ b)(p) == a(b(p))"""
        a = Pose.from_euler([10.0, -20.0, 30.0], [1.0, 2.0, 3.0])
        b = Pose.from_euler([-5.0, 15.0, 45.0], [-0.5, 0.0, 4.0])
        p = np.array([0.3, -1.2, 2.0])
        np.testing.assert_allclose(compose(a, b).apply(p), a.apply(b.apply(p)), atol=1e-12)

    def test_compose_is_associative(self, rng):
        """Test associativity within 1e-12 over random poses"""
        for _ in range(20):
            a, b, c = (Pose.from_euler(rng.uniform(-180, 180, 3), rng.uniform(-5, 5, 3)) for _ in range(3))
            left = compose(compose(a, b), c)
            right = compose(a, compose(b, c))
            assert left.max_difference(right) <= 1e-12

    def test_inverse_composes_to_identity(self, rng):
        """Test that p ∘ p⁻¹ is the identity within 1e-12"""
        for _ in range(20):
            p = Pose.from_euler(rng.uniform(-180, 180, 3), rng.uniform(-10, 10, 3))
            assert compose(p, inverse(p)).max_difference(Pose.identity()) <= 1e-12

    def test_batched_apply_is_bit_identical_to_single_point(self, rng):
        """Test that a point transforms the same alone and inside a batch"""
        pose = Pose.from_euler([12.0, 34.0, 56.0], [0.1, 0.2, 0.3])
        points = rng.uniform(-50, 50, (100, 3))
        batched = pose.apply(points)
        for i in (0, 17, 99):
            assert np.array_equal(apply_pose(pose, points[i]), batched[i])

    def test_rejects_non_orthonormal_rotation(self):
        """Test that a scaled matrix is not accepted as a rotation"""
        with pytest.raises(ContractError):
            Pose(np.eye(3) * 2.0, [0.0, 0.0, 0.0])

    def test_rejects_reflection(self):
        """Test that a determinant of -1 is rejected"""
        with pytest.raises(ContractError):
            Pose(np.diag([1.0, 1.0, -1.0]), [0.0, 0.0, 0.0])

    def test_pose_is_immutable(self):
        """Test that attributes and arrays cannot be changed"""
        pose = Pose.identity()
        with pytest.raises(AttributeError):
            pose.translation = np.ones(3)
        with pytest.raises(ValueError):
            pose.translation[0] = 1.0

    def test_dict_round_trip_is_exact(self):
        """Test that to_dict/from_dict reproduce the same pose"""
        pose = Pose.from_euler([1.0, 2.0, 3.0], [4.0, 5.0, 6.0])
        assert Pose.from_dict(pose.to_dict()) == pose

    def test_from_dict_accepts_euler_angles(self):
        """Test the euler_xyz_deg form of a pose"""
        pose = Pose.from_dict({'euler_xyz_deg': [0.0, 0.0, 90.0], 'translation': [1.0, 0.0, 0.0]})
        np.testing.assert_allclose(pose.apply([1.0, 0.0, 0.0]), [1.0, 1.0, 0.0], atol=1e-12)

    def test_from_dict_rejects_garbage(self):
        """Test that a malformed pose map is a config error"""
        with pytest.raises(ConfigError):
            Pose.from_dict({'rotation': [1.0, 2.0]})

    def test_matrix_round_trip(self):
        """Test from_matrix(as_matrix()) equality"""
        pose = Pose.from_euler([5.0, 6.0, 7.0], [1.0, 1.0, 1.0])
        assert Pose.from_matrix(pose.as_matrix()) == pose


class TestCameraModel:
    """Tests for pinhole projection"""

    def test_point_on_axis_projects_to_principal_point(self, forward_camera):
        """Test that a point straight ahead lands on the principal point"""
        u, v, depth, valid = forward_camera.project([0.0, 0.0, 10.0])
        assert (float(u), float(v), float(depth)) == (32.0, 24.0, 10.0)
        assert bool(valid)

    def test_point_behind_camera_is_invalid(self, forward_camera):
        """Test that depth <= 1e-3 m gives an invalid projection"""
        _, _, _, valid = forward_camera.project(np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 0.0005]]))
        assert not valid.any()

    def test_point_outside_image_is_invalid(self, forward_camera):
        """Test that projections beyond the last column are rejected"""
        _, _, _, valid = forward_camera.project([10.0, 0.0, 1.0])
        assert not bool(valid)

    def test_unproject_inverts_project(self, rng):
        """Test that unproject(project(p)) == p for a rotated camera"""
        camera = CameraModel((40.0, 42.0), (20.0, 15.0), (30, 40), Pose.from_euler([3.0, -4.0, 5.0], [1.0, 2.0, 3.0]))
        points = camera.unproject(rng.uniform(0, 39, 10), rng.uniform(0, 29, 10), rng.uniform(1, 30, 10))
        u, v, depth, valid = camera.project(points)
        assert valid.all()
        np.testing.assert_allclose(camera.unproject(u, v, depth), points, atol=1e-9)

    def test_scaled_camera_divides_intrinsics(self, forward_camera):
        """Test that a stride-2 camera has half focal and principal point"""
        scaled = forward_camera.scaled(2)
        assert scaled.focal == (25.0, 25.0)
        assert scaled.principal_point == (16.0, 12.0)
        assert scaled.image_size == (24, 32)

    def test_rejects_non_positive_focal(self):
        """Test camera validation"""
        with pytest.raises(ContractError):
            CameraModel((0.0, 1.0), (1.0, 1.0), (4, 4))


class TestCartesianSpace:
    """Tests for Cartesian voxel spaces"""

    @pytest.mark.parametrize('preset, name, dims', [
        ('panoramic-hd', 'lidar', (1, 320, 320)),
        ('panoramic-hd', 'raycast', (14, 256, 256)),
        ('stereo-front', 'stereo', (12, 240, 200)),
    ])
    def test_preset_dims(self, preset, name, dims):
        """Test the dims derived from the preset extents and cells"""
        space = space_from_dict(PRESETS[preset]['spaces'][name])
        assert space.dims == dims

    def test_dims_are_ordered_z_x_y(self, unit_space):
        """Test that extents (4, 5, 3) give dims (3, 4, 5)"""
        assert unit_space.dims == (3, 4, 5)
        assert unit_space.num_voxels == 60

    def test_voxel_center_formula(self):
        """Test center = min + (i + 0.5) * cell per axis"""
        space = CartesianSpace((-1.0, -2.0, -3.0), (1.0, 2.0, 3.0), (0.5, 1.0, 2.0))
        np.testing.assert_allclose(voxel_center(space, (2, 1, 3)), [-0.25, 1.5, 2.0])

    def test_voxel_center_out_of_range(self, unit_space):
        """Test that an index outside dims raises"""
        with pytest.raises(ContractError):
            voxel_center(unit_space, (3, 0, 0))

    def test_world_to_grid_of_center_is_integer(self, unit_space):
        """Test that voxel centers map back to their own index"""
        index, in_bounds = world_to_grid(unit_space, voxel_center(unit_space, (1, 2, 3)))
        np.testing.assert_allclose(index, [1.0, 2.0, 3.0])
        assert bool(in_bounds)

    def test_extent_contains(self, unit_space):
        """Test the extent mask on both sides of the boundary"""
        inside = unit_space.extent_contains(np.array([[0.0, 0.0, 0.0], [4.0, 5.0, 3.0], [4.01, 1.0, 1.0]]))
        assert inside.tolist() == [True, True, False]

    def test_rejects_extent_that_is_not_whole_cells(self):
        """Test that the extent must be a whole number of cells within 1e-6 m"""
        CartesianSpace((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (0.1, 0.1, 0.1))
        with pytest.raises(ContractError):
            CartesianSpace((0.0, 0.0, 0.0), (1.05, 1.0, 1.0), (0.2, 0.2, 0.2))

    def test_rejects_zero_cell(self):
        """Test that cells must be strictly positive"""
        with pytest.raises(ContractError):
            CartesianSpace((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (0.0, 0.1, 0.1))

    def test_rejects_inverted_extent(self):
        """Test that max < min is rejected"""
        with pytest.raises(ContractError):
            CartesianSpace((1.0, 0.0, 0.0), (0.0, 1.0, 1.0), (0.1, 0.1, 0.1))


class TestFrustumSpace:
    """Tests for camera frustum spaces"""

    def test_dims_follow_planes_and_stride(self, forward_camera):
        """Test dims (P, rows // stride, cols // stride)"""
        space = FrustumSpace(forward_camera, (2.0, 4.0, 8.0), stride=4)
        assert space.dims == (3, 12, 16)

    def test_index_round_trip(self, forward_camera, rng):
        """Test that world_to_grid inverts grid_to_world inside the frustum"""
        space = FrustumSpace(forward_camera, inverse_depth_planes(2.0, 20.0, 6), stride=2)
        index = np.stack([rng.uniform(0, 5, 20), rng.uniform(0, 23, 20), rng.uniform(0, 31, 20)], axis=1)
        back, in_bounds = space.world_to_grid(space.grid_to_world(index))
        assert in_bounds.all()
        np.testing.assert_allclose(back, index, atol=1e-9)

    def test_optical_axis_maps_to_principal_point(self, forward_camera):
        """Test that a point on the optical axis at the first plane lands at (0, cy / stride, cx / stride)"""
        space = FrustumSpace(forward_camera, (2.0, 4.0, 8.0), stride=4)
        index, in_bounds = world_to_grid(space, np.array([0.0, 0.0, 2.0]))
        np.testing.assert_allclose(index, [0.0, 24.0 / 4, 32.0 / 4], atol=1e-12)
        assert in_bounds

    def test_points_behind_or_beyond_are_out_of_bounds(self, forward_camera):
        """Test depth bounds of the frustum"""
        space = FrustumSpace(forward_camera, (2.0, 4.0))
        _, in_bounds = space.world_to_grid(np.array([[0.0, 0.0, -3.0], [0.0, 0.0, 1.0], [0.0, 0.0, 5.0]]))
        assert not in_bounds.any()

    def test_rejects_unsorted_planes(self, forward_camera):
        """Test that depth planes must increase"""
        with pytest.raises(ContractError):
            FrustumSpace(forward_camera, (4.0, 2.0))

    def test_inverse_depth_planes(self):
        """Test endpoints and uniform spacing in inverse depth"""
        planes = inverse_depth_planes(2.0, 60.0, 48)
        assert len(planes) == 48
        assert planes[0] == 2.0 and planes[-1] == 60.0
        np.testing.assert_allclose(np.diff(1.0 / np.asarray(planes)), (1 / 60.0 - 1 / 2.0) / 47, rtol=1e-9)

    def test_space_from_dict_resolves_camera_name(self, forward_camera):
        """Test a frustum space that names its camera"""
        space = space_from_dict(
            {'type': 'frustum', 'camera': 'cam', 'depths': {'near': 1.0, 'far': 10.0, 'count': 4}, 'stride': 2},
            {'cam': forward_camera},
        )
        assert space.dims == (4, 24, 32)
        assert space.camera == forward_camera

    def test_space_from_dict_unknown_camera(self):
        """Test that an unknown camera name is a config error"""
        with pytest.raises(ConfigError):
            space_from_dict({'type': 'frustum', 'camera': 'nope', 'depths': [1.0]}, {})

    def test_space_round_trips_through_dict(self, forward_camera):
        """Test that to_dict output rebuilds an equal space"""
        space = FrustumSpace(forward_camera, (2.0, 3.0), stride=2)
        assert space_from_dict(space.to_dict()) == space
