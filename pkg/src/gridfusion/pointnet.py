"""Voxelized two-layer PointNet encoder for LiDAR point clouds.

Per point the network sees (x, y, z, dx, dy, dz, intensity): the position
in the grid frame, the offset from the centroid of the points sharing its
voxel, and the return intensity. Two affine + ReLU layers follow, then an
elementwise max over each voxel's points. Empty voxels stay zero.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ShapeMismatchError
from .geometry import XYZ_TO_ZXY, CartesianSpace
from .grid import Grid

logger = logging.getLogger(__name__)

NUM_POINT_FEATURES = 7


@dataclass(frozen=True, eq=False)
class VoxelBuckets:
    """In-range points grouped by voxel.

    Arrays are ordered by voxel id, keeping input order inside a voxel.
    ``point_index`` maps back into the source cloud.
    """

    voxel_id: np.ndarray
    point_index: np.ndarray
    local_xyz: np.ndarray
    intensity: np.ndarray
    space: object
    pose: object

    @property
    def num_voxels(self):
        return self.space.num_voxels

    def __len__(self):
        return len(self.voxel_id)

    def sizes(self):
        return np.bincount(self.voxel_id, minlength=self.num_voxels)

    def bucket(self, voxel_id):
        """Source point indices falling in ``voxel_id``, in input order."""
        lo, hi = np.searchsorted(self.voxel_id, [voxel_id, voxel_id + 1])
        return self.point_index[lo:hi]

    def segment_starts(self):
        if not len(self):
            return np.zeros(0, dtype=np.int64)
        starts = np.ones(len(self), dtype=bool)
        starts[1:] = self.voxel_id[1:] != self.voxel_id[:-1]
        return np.flatnonzero(starts)


def point_voxel_indices(space, local_points):
    """Integer (z, x, y) cell of each local point plus the in-range mask.

    A point on the upper boundary belongs to the last cell.
    """
    if not isinstance(space, CartesianSpace):
        raise ContractError("voxelization needs a Cartesian space")
    local_points = np.asarray(local_points, dtype=np.float64)
    lo = np.asarray(space.min_corner)
    hi = np.asarray(space.max_corner)
    cells = np.floor((local_points - lo) / np.asarray(space.cell_size)).astype(np.int64)[..., XYZ_TO_ZXY]
    cells = np.clip(cells, 0, np.asarray(space.dims) - 1)
    in_bounds = np.all((local_points >= lo) & (local_points <= hi), axis=-1)
    return cells, in_bounds


def voxelize(cloud, space, pose):
    """Assign every in-range point to exactly one voxel; drop the rest."""
    local = cloud.points_in(pose)
    cells, in_bounds = point_voxel_indices(space, local)
    kept = np.flatnonzero(in_bounds)
    voxel_id = np.ravel_multi_index(tuple(cells[kept].T), tuple(space.dims)) if kept.size else kept
    order = np.argsort(voxel_id, kind='stable')
    point_index = kept[order]
    logger.debug("Voxelized %d of %d points", kept.size, len(cloud))
    return VoxelBuckets(
        voxel_id=np.asarray(voxel_id, dtype=np.int64)[order],
        point_index=point_index,
        local_xyz=local[point_index],
        intensity=cloud.intensity[point_index],
        space=space,
        pose=pose,
    )


@dataclass(frozen=True, eq=False)
class PointNetWeights:
    """Two per-point affine layers: hidden = relu(w1 f + b1), out = relu(w2 hidden + b2)"""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        hidden, features = np.shape(self.w1)
        embed, hidden2 = np.shape(self.w2)
        if hidden2 != hidden or np.shape(self.b1) != (hidden,) or np.shape(self.b2) != (embed,):
            raise ShapeMismatchError(
                f"inconsistent PointNet weight shapes w1={np.shape(self.w1)} b1={np.shape(self.b1)} "
                f"w2={np.shape(self.w2)} b2={np.shape(self.b2)}"
            )
        for name in ('w1', 'b1', 'w2', 'b2'):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ContractError(f"PointNet weight {name} is not finite")

    @classmethod
    def initialize(cls, seed=0, hidden=32, embed=64, in_features=NUM_POINT_FEATURES):
        """Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] from a seeded generator."""
        rng = np.random.default_rng(seed)
        k1 = 1.0 / np.sqrt(in_features)
        k2 = 1.0 / np.sqrt(hidden)
        return cls(
            w1=rng.uniform(-k1, k1, (hidden, in_features)),
            b1=rng.uniform(-k1, k1, hidden),
            w2=rng.uniform(-k2, k2, (embed, hidden)),
            b2=rng.uniform(-k2, k2, embed),
        )

    @property
    def embed(self):
        return self.w2.shape[0]

    def as_dict(self):
        return {'w1': self.w1, 'b1': self.b1, 'w2': self.w2, 'b2': self.b2}


def point_features(buckets):
    """(P, 7) per-point input features in bucket order."""
    n = len(buckets)
    if n == 0:
        return np.zeros((0, NUM_POINT_FEATURES))
    sizes = buckets.sizes()
    sums = np.zeros((buckets.num_voxels, 3))
    np.add.at(sums, buckets.voxel_id, buckets.local_xyz)
    centroid = sums[buckets.voxel_id] / sizes[buckets.voxel_id][:, None]
    offset = buckets.local_xyz - centroid
    return np.concatenate([buckets.local_xyz, offset, buckets.intensity[:, None]], axis=1)


@dataclass(frozen=True, eq=False)
class _Forward:
    features: np.ndarray
    hidden_pre: np.ndarray
    hidden: np.ndarray
    out_pre: np.ndarray
    out: np.ndarray
    voxel_max: np.ndarray  # (V, E)
    argmax: np.ndarray  # (segments, E) row into the bucket-ordered arrays
    segment_voxel: np.ndarray


def _forward(buckets, weights):
    features = point_features(buckets)
    hidden_pre = features @ weights.w1.T + weights.b1
    hidden = np.maximum(hidden_pre, 0.0)
    out_pre = hidden @ weights.w2.T + weights.b2
    out = np.maximum(out_pre, 0.0)
    voxel_max = np.zeros((buckets.num_voxels, weights.embed))
    starts = buckets.segment_starts()
    if starts.size:
        segment_max = np.maximum.reduceat(out, starts, axis=0)
        segment_voxel = buckets.voxel_id[starts]
        voxel_max[segment_voxel] = segment_max
        segment_of_point = np.cumsum(np.isin(np.arange(len(buckets)), starts)) - 1
        rows = np.arange(len(buckets))[:, None]
        candidates = np.where(out == segment_max[segment_of_point], rows, len(buckets))
        argmax = np.minimum.reduceat(candidates, starts, axis=0)
    else:
        segment_voxel = np.zeros(0, dtype=np.int64)
        argmax = np.zeros((0, weights.embed), dtype=np.int64)
    return _Forward(features, hidden_pre, hidden, out_pre, out, voxel_max, argmax, segment_voxel)


def pointnet_encode(buckets, weights, space=None, pose=None):
    """Per-voxel max-pooled PointNet embedding as a (1, E, Z, X, Y) grid."""
    space = space if space is not None else buckets.space
    pose = pose if pose is not None else buckets.pose
    forward = _forward(buckets, weights)
    data = forward.voxel_max.T.reshape((1, weights.embed) + tuple(space.dims))
    return Grid(data, space, pose)


def pointnet_vjp(upstream, buckets, weights):
    """Weight gradients of ``<pointnet_encode(buckets, weights), upstream>``.

    Max pooling routes each channel's gradient to the arg-max point, ties
    going to the lowest point index.
    """
    expected = (1, weights.embed) + tuple(buckets.space.dims)
    if upstream.shape != expected:
        raise ShapeMismatchError(f"upstream shape {upstream.shape} != encoder output {expected}")
    forward = _forward(buckets, weights)
    grad_voxel = upstream.data[0].reshape(weights.embed, -1).T
    grad_out = np.zeros_like(forward.out)
    channels = np.arange(weights.embed)[np.newaxis, :]
    np.add.at(grad_out, (forward.argmax, channels), grad_voxel[forward.segment_voxel])
    grad_out_pre = grad_out * (forward.out_pre > 0)
    grad_hidden = grad_out_pre @ weights.w2
    grad_hidden_pre = grad_hidden * (forward.hidden_pre > 0)
    return PointNetWeights(
        w1=grad_hidden_pre.T @ forward.features,
        b1=grad_hidden_pre.sum(axis=0),
        w2=grad_out_pre.T @ forward.hidden,
        b2=grad_out_pre.sum(axis=0),
    )


@dataclass(frozen=True, eq=False)
class PointNetEncoder:
    """LiDAR encoder bound to its own space and pose"""

    weights: PointNetWeights
    space: object
    pose: object

    def __call__(self, cloud):
        return pointnet_encode(voxelize(cloud, self.space, self.pose), self.weights)
