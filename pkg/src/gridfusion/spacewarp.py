"""SpaceWarp: resample a Grid into another Space and Pose.

The warp is linear in the source features. It is assembled once as a
sparse (target voxels x source voxels) matrix of trilinear weights, so the
forward pass is ``W @ f`` and the vector-Jacobian product is ``W.T @ g``
(the exact adjoint, with a fixed accumulation order).

Interpolation is anchored at voxel centers. Sample points outside the
source extent read as zero; points inside the extent but beyond the
outermost centers interpolate against zero-valued virtual neighbours.
Gradients with respect to poses and sample points are not provided.
"""
import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import NumericalError, ShapeMismatchError
from .grid import Grid

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class WarpOperator:
    """Sparse trilinear sampling operator between two grid frames"""

    matrix: sparse.csr_matrix
    source_space: object
    source_pose: object
    target_space: object
    target_pose: object

    @property
    def source_dims(self):
        return tuple(self.source_space.dims)

    @property
    def target_dims(self):
        return tuple(self.target_space.dims)

    def apply(self, source):
        if source.dims != self.source_dims:
            raise ShapeMismatchError(f"source dims {source.dims} != operator dims {self.source_dims}")
        n, c = source.batch, source.channels
        flat = source.data.reshape(n * c, self.matrix.shape[1]).T
        out = np.asarray(self.matrix @ flat).T
        data = out.reshape((n, c) + self.target_dims).astype(source.data.dtype, copy=False)
        return Grid(data, self.target_space, self.target_pose)

    def adjoint(self, upstream):
        if upstream.dims != self.target_dims:
            raise ShapeMismatchError(
                f"upstream gradient dims {upstream.dims} != warp output dims {self.target_dims}"
            )
        n, c = upstream.batch, upstream.channels
        flat = upstream.data.reshape(n * c, self.matrix.shape[0]).T
        out = np.asarray(self.matrix.T @ flat).T
        data = out.reshape((n, c) + self.source_dims).astype(upstream.data.dtype, copy=False)
        return Grid(data, self.source_space, self.source_pose)


def sample_points(source_space, source_pose, target_space, target_pose):
    """Continuous source indices of every target voxel center, plus in-bounds mask."""
    transform = source_pose.inverse().compose(target_pose)
    points = transform.apply(target_space.voxel_centers())
    return source_space.world_to_grid(points)


def trilinear_matrix(index, in_bounds, source_dims):
    """Sparse matrix of trilinear weights for continuous (z, x, y) indices."""
    index = np.asarray(index, dtype=np.float64)
    num_targets = index.shape[0]
    dims = np.asarray(source_dims)
    safe = np.where(in_bounds[:, None], index, 0.0)
    base = np.floor(safe)
    frac = safe - base
    base = base.astype(np.int64)
    rows, cols, vals = [], [], []
    target_ids = np.arange(num_targets)
    for offset in itertools.product((0, 1), repeat=3):
        offset = np.asarray(offset)
        corner = base + offset
        weight = np.prod(np.where(offset == 1, frac, 1.0 - frac), axis=1)
        keep = in_bounds & np.all((corner >= 0) & (corner < dims), axis=1) & (weight != 0.0)
        flat = np.ravel_multi_index(tuple(corner[keep].T), source_dims)
        rows.append(target_ids[keep])
        cols.append(flat)
        vals.append(weight[keep])
    num_sources = int(np.prod(dims))
    matrix = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(num_targets, num_sources),
    ).tocsr()
    matrix.sort_indices()
    return matrix


def warp_operator(source_space, source_pose, target_space, target_pose):
    index, in_bounds = sample_points(source_space, source_pose, target_space, target_pose)
    matrix = trilinear_matrix(index, in_bounds, tuple(source_space.dims))
    logger.debug(
        "Warp operator %s -> %s: %d of %d samples in bounds",
        source_space.dims, target_space.dims, int(in_bounds.sum()), in_bounds.size,
    )
    return WarpOperator(matrix, source_space, source_pose, target_space, target_pose)


def _check_finite(source):
    if not source.is_finite():
        raise NumericalError("source grid contains non-finite values")


def space_warp(source, target_space, target_pose):
    """Resample ``source`` into ``target_space`` placed at ``target_pose``."""
    _check_finite(source)
    return warp_operator(source.space, source.pose, target_space, target_pose).apply(source)


def chain_pose(intermediates, target_pose):
    """Compose an intermediate frame chain into one target pose.

    Each intermediate pose is relative to the frame before it, and the
    target pose is relative to the last intermediate.
    """
    pose = target_pose
    for _, step in reversed(list(intermediates)):
        pose = step.compose(pose)
    return pose


def space_warp_chain(source, intermediates, target):
    """Warp through a chain of frames with a single interpolation."""
    target_space, target_pose = target
    return space_warp(source, target_space, chain_pose(intermediates, target_pose))


def space_warp_vjp(source, target, upstream_gradient):
    """Gradient of ``<space_warp(source, *target), upstream>`` w.r.t. source features."""
    target_space, target_pose = target
    if upstream_gradient.batch != source.batch or upstream_gradient.channels != source.channels:
        raise ShapeMismatchError(
            f"upstream gradient shape {upstream_gradient.shape} does not match source "
            f"batch/channels {(source.batch, source.channels)}"
        )
    operator = warp_operator(source.space, source.pose, target_space, target_pose)
    return operator.adjoint(upstream_gradient)
