"""Raycast uplift of camera feature maps into a Cartesian grid.

Two phases:

1. project and gather: every voxel center is projected into every
   camera; each valid (voxel, camera) pair becomes a row of the pair
   table and gathers one feature vector from that camera's map.
2. reduce: the gathered rows are scatter-reduced per voxel (mean by
   default, sum optionally). Voxels seen by no camera get a zero vector.

The voxel coordinates are appended as three extra channels so voxels that
share a single camera ray still get distinct feature vectors.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ShapeMismatchError
from .geometry import CameraModel
from .grid import Grid, coordinate_grid

logger = logging.getLogger(__name__)

REDUCE_MEAN = 'mean'
REDUCE_SUM = 'sum'
REDUCTIONS = (REDUCE_MEAN, REDUCE_SUM)

SAMPLE_NEAREST = 'nearest'
SAMPLE_BILINEAR = 'bilinear'
SAMPLINGS = (SAMPLE_NEAREST, SAMPLE_BILINEAR)


@dataclass(frozen=True, eq=False)
class ImageFeatureMap:
    """Per-camera feature map of shape (C, rows, cols).

    ``stride`` is the featurizer's subsampling factor: feature pixel (r, c)
    sits at full-resolution image pixel (r, c) * stride.
    """

    data: np.ndarray
    camera: CameraModel
    stride: int = 1

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ShapeMismatchError(f"feature map must be (C, rows, cols), got {data.shape}")
        rows, cols = self.camera.image_size
        expected = (rows // self.stride, cols // self.stride)
        if tuple(data.shape[1:]) != expected:
            raise ShapeMismatchError(
                f"feature map spatial shape {data.shape[1:]} != image size / stride {expected}"
            )
        object.__setattr__(self, 'data', data)

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def feature_shape(self):
        return self.data.shape[1:]


@dataclass(frozen=True, eq=False)
class VoxelCameraPairTable:
    """Valid (voxel, camera) pairs sorted by (voxel_id, camera_index).

    ``u`` and ``v`` are feature-map pixel coordinates (column, row).
    """

    voxel_id: np.ndarray
    camera_index: np.ndarray
    u: np.ndarray
    v: np.ndarray
    num_voxels: int

    def __len__(self):
        return len(self.voxel_id)

    def counts(self):
        return np.bincount(self.voxel_id, minlength=self.num_voxels)


def _nearest(coord):
    return np.floor(coord + 0.5).astype(np.int64)


def sample_taps(u, v, shape, sampling=SAMPLE_NEAREST):
    """Pixel taps (rows, cols, weights) for feature coordinates (u, v).

    Coordinates are assumed to lie in [0, cols - 1] x [0, rows - 1].
    """
    rows, cols = shape
    if sampling == SAMPLE_NEAREST:
        return [(_nearest(v), _nearest(u), None)]
    if sampling != SAMPLE_BILINEAR:
        raise ContractError(f"unknown sampling rule {sampling!r}")
    c0 = np.minimum(np.floor(u).astype(np.int64), cols - 1)
    r0 = np.minimum(np.floor(v).astype(np.int64), rows - 1)
    c1 = np.minimum(c0 + 1, cols - 1)
    r1 = np.minimum(r0 + 1, rows - 1)
    wu = u - c0
    wv = v - r0
    return [
        (r0, c0, (1.0 - wv) * (1.0 - wu)),
        (r0, c1, (1.0 - wv) * wu),
        (r1, c0, wv * (1.0 - wu)),
        (r1, c1, wv * wu),
    ]


def visible_pixels(feature_map, points):
    """Project reference-frame points into a feature map.

    Returns feature coordinates (u, v) and the validity mask: in front of
    the camera and inside [0, cols - 1] x [0, rows - 1] of the feature map.
    """
    u, v, _, valid = feature_map.camera.project(points)
    u = u / feature_map.stride
    v = v / feature_map.stride
    rows, cols = feature_map.feature_shape
    valid = valid & (u >= 0) & (u <= cols - 1) & (v >= 0) & (v <= rows - 1)
    return u, v, valid


def _check_features(features):
    if not features:
        raise ContractError("raycast needs at least one camera feature map")
    channels = {f.channels for f in features}
    if len(channels) != 1:
        raise ShapeMismatchError(f"feature maps disagree on channel count: {sorted(channels)}")
    return channels.pop()


def gather(features, table, sampling=SAMPLE_NEAREST):
    """Gather one feature row per table row."""
    channels = _check_features(features)
    dtype = np.result_type(*(f.data.dtype for f in features))
    gathered = np.zeros((len(table), channels), dtype=dtype)
    for k, feature_map in enumerate(features):
        sel = np.flatnonzero(table.camera_index == k)
        if sel.size == 0:
            continue
        taps = sample_taps(table.u[sel], table.v[sel], feature_map.feature_shape, sampling)
        acc = None
        for rows, cols, weight in taps:
            values = feature_map.data[:, rows, cols].T
            if weight is not None:
                values = values * weight[:, None]
            acc = values if acc is None else acc + values
        gathered[sel] = acc
    return gathered


def project_and_gather(features, space, pose, sampling=SAMPLE_NEAREST):
    """Build the voxel-camera pair table and gather features for each pair."""
    _check_features(features)
    centers = pose.apply(space.voxel_centers())
    voxel_ids, camera_ids, us, vs = [], [], [], []
    for k, feature_map in enumerate(features):
        u, v, valid = visible_pixels(feature_map, centers)
        idx = np.flatnonzero(valid)
        voxel_ids.append(idx)
        camera_ids.append(np.full(idx.size, k, dtype=np.int64))
        us.append(u[idx])
        vs.append(v[idx])
    voxel_id = np.concatenate(voxel_ids)
    camera_index = np.concatenate(camera_ids)
    order = np.lexsort((camera_index, voxel_id))
    table = VoxelCameraPairTable(
        voxel_id=voxel_id[order],
        camera_index=camera_index[order],
        u=np.concatenate(us)[order],
        v=np.concatenate(vs)[order],
        num_voxels=space.num_voxels,
    )
    logger.debug("Raycast pair table: %d pairs over %d voxels", len(table), space.num_voxels)
    return table, gather(features, table, sampling)


def _segment_ranks(ids):
    """Position of each row inside its run of equal ids (ids sorted)."""
    n = ids.size
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    starts = np.ones(n, dtype=bool)
    starts[1:] = ids[1:] != ids[:-1]
    first = np.maximum.accumulate(np.where(starts, np.arange(n), 0))
    return np.arange(n) - first


def scatter_reduce(table, gathered, space, reduction=REDUCE_MEAN):
    """Reduce gathered rows per voxel into a (num voxels, C) matrix.

    Rows of one voxel are accumulated in table order, one rank at a time,
    so the result does not depend on how the work is split.
    """
    if reduction not in REDUCTIONS:
        raise ContractError(f"unknown reduction {reduction!r}")
    gathered = np.asarray(gathered)
    num_voxels = space.num_voxels
    if gathered.shape[0] != len(table):
        raise ShapeMismatchError(f"{gathered.shape[0]} gathered rows for {len(table)} table rows")
    ids = np.asarray(table.voxel_id, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= num_voxels):
        raise ContractError(f"voxel id out of range for {num_voxels} voxels")
    order = np.argsort(ids, kind='stable')
    ids = ids[order]
    rows = gathered[order]
    out = np.zeros((num_voxels, gathered.shape[1]), dtype=gathered.dtype)
    ranks = _segment_ranks(ids)
    for rank in range(int(ranks.max()) + 1 if ranks.size else 0):
        sel = ranks == rank
        out[ids[sel]] += rows[sel]
    if reduction == REDUCE_MEAN:
        counts = np.bincount(ids, minlength=num_voxels)
        seen = counts > 0
        out[seen] /= counts[seen, None]
    return out


def raycast(features, space, pose, reduction=REDUCE_MEAN, sampling=SAMPLE_NEAREST):
    """Uplift feature maps into a Grid with C + 3 channels (features, then x, y, z)."""
    table, gathered = project_and_gather(features, space, pose, sampling)
    reduced = scatter_reduce(table, gathered, space, reduction)
    volume = reduced.T.reshape((reduced.shape[1],) + tuple(space.dims))
    coords = coordinate_grid(space, pose).data.astype(reduced.dtype)
    data = np.concatenate([volume[np.newaxis], coords], axis=1)
    logger.info("Raycast %d cameras into %s grid", len(features), space.dims)
    return Grid(data, space, pose)


def raycast_vjp(upstream_gradient, table, features, reduction=REDUCE_MEAN, sampling=SAMPLE_NEAREST):
    """Adjoint of gather -> reduce, returned as one array per feature map.

    The coordinate channels carry no gradient.
    """
    channels = _check_features(features)
    expected = (1, channels + 3) + tuple(upstream_gradient.space.dims)
    if upstream_gradient.shape != expected or table.num_voxels != upstream_gradient.space.num_voxels:
        raise ShapeMismatchError(f"upstream gradient shape {upstream_gradient.shape} != {expected}")
    grad_voxels = upstream_gradient.data[0, :channels].reshape(channels, -1).T
    row_grad = grad_voxels[table.voxel_id]
    if reduction == REDUCE_MEAN:
        counts = table.counts()
        row_grad = row_grad / counts[table.voxel_id][:, None]
    grads = []
    for k, feature_map in enumerate(features):
        grad = np.zeros(feature_map.data.shape, dtype=np.result_type(feature_map.data, row_grad))
        sel = np.flatnonzero(table.camera_index == k)
        taps = sample_taps(table.u[sel], table.v[sel], feature_map.feature_shape, sampling)
        for rows, cols, weight in taps:
            values = row_grad[sel] if weight is None else row_grad[sel] * weight[:, None]
            for c in range(channels):
                np.add.at(grad[c], (rows, cols), values[:, c])
        grads.append(grad)
    return grads
