"""Tests for voxelization and the PointNet encoder"""
import numpy as np
import pytest

from gridfusion.errors import ContractError, ShapeMismatchError
from gridfusion.geometry import CartesianSpace, FrustumSpace, Pose
from gridfusion.grid import Grid
from gridfusion.pointcloud import PointCloud
from gridfusion.pointnet import (
    PointNetEncoder,
    PointNetWeights,
    point_voxel_indices,
    pointnet_encode,
    pointnet_vjp,
    voxelize,
)


@pytest.fixture
def weights():
    return PointNetWeights.initialize(seed=3, hidden=6, embed=4)


@pytest.fixture
def scatter_cloud(rng):
    """Points spread over and beyond the unit space"""
    xyz = rng.uniform(-1.0, 6.0, (200, 3))
    return PointCloud(xyz, rng.uniform(0, 1, 200), np.zeros(200), np.zeros(200))


class TestVoxelize:
    """Tests for grouping points into voxels"""

    def test_every_in_range_point_lands_once(self, scatter_cloud, unit_space):
        """Test that in-range points are assigned to exactly one voxel and others dropped"""
        buckets = voxelize(scatter_cloud, unit_space, Pose.identity())
        inside = unit_space.extent_contains(scatter_cloud.xyz)
        assert sorted(buckets.point_index.tolist()) == np.flatnonzero(inside).tolist()
        assert buckets.sizes().sum() == inside.sum()

    def test_bucket_holds_points_of_its_cell(self, scatter_cloud, unit_space):
        """Test that a bucket keeps input order and only its own points"""
        buckets = voxelize(scatter_cloud, unit_space, Pose.identity())
        voxel = int(buckets.voxel_id[0])
        members = buckets.bucket(voxel)
        assert (np.diff(members) > 0).all()
        cells, _ = point_voxel_indices(unit_space, scatter_cloud.xyz[members])
        assert {np.ravel_multi_index(tuple(c), unit_space.dims) for c in cells} == {voxel}

    def test_upper_boundary_belongs_to_last_cell(self, unit_space):
        """Test that a point exactly on the max corner maps to the last voxel"""
        cells, in_bounds = point_voxel_indices(unit_space, np.array([[4.0, 5.0, 3.0]]))
        assert cells.tolist() == [[2, 3, 4]]
        assert in_bounds.tolist() == [True]

    def test_grid_pose_moves_points(self, unit_space):
        """Test that voxelization happens in the grid frame"""
        cloud = PointCloud.from_points([[10.5, 0.5, 0.5]])
        buckets = voxelize(cloud, unit_space, Pose.translation_only([10.0, 0.0, 0.0]))
        assert buckets.voxel_id.tolist() == [0]

    def test_frustum_space_is_rejected(self, forward_camera, scatter_cloud):
        """Test that only Cartesian spaces can be voxelized"""
        with pytest.raises(ContractError):
            voxelize(scatter_cloud, FrustumSpace(forward_camera, (1.0, 2.0)), Pose.identity())


class TestPointNet:
    """Tests for the per-voxel embedding"""

    def test_output_shape_and_empty_voxels(self, scatter_cloud, unit_space, weights):
        """Test (1, E, Z, X, Y) output with zeros where no point fell"""
        grid = PointNetEncoder(weights, unit_space, Pose.identity())(scatter_cloud)
        assert grid.shape == (1, 4) + unit_space.dims
        sizes = voxelize(scatter_cloud, unit_space, Pose.identity()).sizes().reshape(unit_space.dims)
        assert not grid.data[0][:, sizes == 0].any()
        assert (grid.data >= 0).all()

    def test_matches_hand_computed_voxel(self, weights, unit_space):
        """Test a two-point voxel against the layer formulas"""
        xyz = np.array([[0.2, 0.3, 0.4], [0.6, 0.1, 0.8]])
        cloud = PointCloud(xyz, [0.5, 0.25], [0, 0], [0, 0])
        grid = PointNetEncoder(weights, unit_space, Pose.identity())(cloud)
        centroid = xyz.mean(axis=0)
        features = np.concatenate([xyz, xyz - centroid, [[0.5], [0.25]]], axis=1)
        hidden = np.maximum(features @ weights.w1.T + weights.b1, 0.0)
        out = np.maximum(hidden @ weights.w2.T + weights.b2, 0.0)
        np.testing.assert_allclose(grid.data[0, :, 0, 0, 0], out.max(axis=0), atol=1e-12)
        assert np.count_nonzero(grid.data[0, :, 1:]) == 0

    def test_point_order_does_not_matter(self, scatter_cloud, unit_space, weights, rng):
        """Test invariance to a permutation of the input points"""
        shuffled = scatter_cloud.take(rng.permutation(len(scatter_cloud)))
        encoder = PointNetEncoder(weights, unit_space, Pose.identity())
        np.testing.assert_allclose(encoder(shuffled).data, encoder(scatter_cloud).data, atol=1e-12)

    def test_empty_cloud_gives_zero_grid(self, unit_space, weights):
        """Test that a cloud without points encodes to zeros"""
        grid = PointNetEncoder(weights, unit_space, Pose.identity())(PointCloud.empty())
        assert not grid.data.any()

    def test_initialize_is_seeded(self):
        """Test that the same seed gives the same weights"""
        a = PointNetWeights.initialize(seed=9, hidden=5, embed=3)
        b = PointNetWeights.initialize(seed=9, hidden=5, embed=3)
        for name in ('w1', 'b1', 'w2', 'b2'):
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
        assert a.w1.shape == (5, 7)

    def test_inconsistent_weights_are_rejected(self):
        """Test weight shape validation"""
        with pytest.raises(ShapeMismatchError):
            PointNetWeights(np.zeros((4, 7)), np.zeros(4), np.zeros((3, 5)), np.zeros(3))

    def test_encode_uses_explicit_frame(self, scatter_cloud, unit_space, weights):
        """Test that pointnet_encode can relabel the output frame"""
        buckets = voxelize(scatter_cloud, unit_space, Pose.identity())
        other = CartesianSpace((10.0, 10.0, 10.0), (14.0, 15.0, 13.0), (1.0, 1.0, 1.0))
        grid = pointnet_encode(buckets, weights, other, Pose.identity())
        assert grid.space == other

    def test_duplicated_cloud_gives_same_grid(self, scatter_cloud, unit_space, weights):
        """Test that repeating every point leaves centroids and maxima unchanged"""
        index = np.arange(len(scatter_cloud))
        doubled = scatter_cloud.take(np.concatenate([index, index]))
        encoder = PointNetEncoder(weights, unit_space, Pose.identity())
        np.testing.assert_allclose(encoder(doubled).data, encoder(scatter_cloud).data, atol=1e-12)


def upstream_for(space, weights, rng):
    return Grid(rng.normal(size=(1, weights.embed) + tuple(space.dims)), space, Pose.identity())


class TestPointNetVjp:
    """Tests for the PointNet weight gradients"""

    def test_zero_upstream_gives_zero_gradient(self, scatter_cloud, unit_space, weights):
        """Test that every weight gradient vanishes for a zero upstream"""
        buckets = voxelize(scatter_cloud, unit_space, Pose.identity())
        zero = Grid(np.zeros((1, weights.embed) + unit_space.dims), unit_space, Pose.identity())
        grads = pointnet_vjp(zero, buckets, weights)
        for name, value in grads.as_dict().items():
            assert not value.any(), name

    def test_tied_points_route_gradient_once(self, unit_space, weights, rng):
        """
        Test the max-pool tie break.

        Given: A voxel holding the same point twice
        When: Gradients are taken through the max pool
        Then: Only one copy receives the gradient, so they equal the single point case
        """
        point = [[1.3, 2.6, 0.4]]
        single = voxelize(PointCloud(point, [0.7], [0], [0]), unit_space, Pose.identity())
        twin = voxelize(PointCloud(point * 2, [0.7, 0.7], [0, 0], [0, 0]), unit_space, Pose.identity())
        upstream = upstream_for(unit_space, weights, rng)
        expected = pointnet_vjp(upstream, single, weights)
        actual = pointnet_vjp(upstream, twin, weights)
        for name in ('w1', 'b1', 'w2', 'b2'):
            np.testing.assert_allclose(getattr(actual, name), getattr(expected, name), atol=1e-12)

    def test_matches_chain_rule_by_hand(self, unit_space, weights, rng):
        """Test a three-point voxel against a per-channel chain rule"""
        xyz = np.array([[0.2, 0.3, 0.4], [0.6, 0.1, 0.8], [0.9, 0.7, 0.1]])
        intensity = np.array([0.5, 0.25, 0.9])
        buckets = voxelize(PointCloud(xyz, intensity, [0, 0, 0], [0, 0, 0]), unit_space, Pose.identity())
        upstream = upstream_for(unit_space, weights, rng)
        u = upstream.data[0, :, 0, 0, 0]

        features = np.concatenate([xyz, xyz - xyz.mean(axis=0), intensity[:, None]], axis=1)
        hidden_pre = features @ weights.w1.T + weights.b1
        hidden = np.maximum(hidden_pre, 0.0)
        out_pre = hidden @ weights.w2.T + weights.b2
        out = np.maximum(out_pre, 0.0)
        w1, b1 = np.zeros_like(weights.w1), np.zeros_like(weights.b1)
        w2, b2 = np.zeros_like(weights.w2), np.zeros_like(weights.b2)
        for e in range(weights.embed):
            k = int(np.argmax(out[:, e]))
            if out_pre[k, e] <= 0:
                continue
            w2[e] += u[e] * hidden[k]
            b2[e] += u[e]
            for h in range(len(weights.b1)):
                if hidden_pre[k, h] > 0:
                    w1[h] += u[e] * weights.w2[e, h] * features[k]
                    b1[h] += u[e] * weights.w2[e, h]

        grads = pointnet_vjp(upstream, buckets, weights)
        np.testing.assert_allclose(grads.w1, w1, atol=1e-12)
        np.testing.assert_allclose(grads.b1, b1, atol=1e-12)
        np.testing.assert_allclose(grads.w2, w2, atol=1e-12)
        np.testing.assert_allclose(grads.b2, b2, atol=1e-12)
