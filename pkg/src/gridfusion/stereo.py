"""Image-centric plane-sweep stereo cost volume.

Right-camera features are warped into the left image through the
homography induced by fronto-parallel planes (in the left camera frame)
at a list of depths. Each plane contributes one slice of a frustum grid
indexed by (plane, row, col), which SpaceWarp can then move into any
Cartesian space.
"""
import logging

import numpy as np
from scipy import ndimage

from .errors import ContractError, ShapeMismatchError
from .geometry import FrustumSpace
from .grid import Grid
from .spacewarp import space_warp

logger = logging.getLogger(__name__)

MODE_CORRELATION = 'correlation'
MODE_CONCAT = 'concat'
BASELINE_EPS = 1e-12


def plane_homography(left_cam, right_cam, depth, stride=1):
    """3x3 map from left feature pixels to right feature pixels for the plane z = depth."""
    if depth <= 0:
        raise ContractError(f"plane depth must be positive, got {depth}")
    relative = right_cam.pose.inverse().compose(left_cam.pose)
    normal = np.array([0.0, 0.0, 1.0])
    plane_map = relative.rotation + np.outer(relative.translation, normal) / depth
    k_left = left_cam.scaled(stride).intrinsic_matrix
    k_right = right_cam.scaled(stride).intrinsic_matrix
    return k_right @ plane_map @ np.linalg.inv(k_left)


def baseline(left_cam, right_cam):
    relative = right_cam.pose.inverse().compose(left_cam.pose)
    return float(np.linalg.norm(relative.translation))


def plane_sweep_warp(right, left_cam, right_cam, depth):
    """Resample the right feature map into the left image for one plane.

    Bilinear, with zeros outside the right map.
    """
    if depth <= 0:
        raise ContractError(f"plane depth must be positive, got {depth}")
    if baseline(left_cam, right_cam) < BASELINE_EPS:
        logger.warning("Stereo pair has zero baseline; plane sweep reduces to the identity")
        return np.array(right.data, copy=True)
    stride = right.stride
    rows, cols = left_cam.image_size[0] // stride, left_cam.image_size[1] // stride
    homography = plane_homography(left_cam, right_cam, depth, stride)
    r, c = np.mgrid[0:rows, 0:cols].astype(np.float64)
    pixels = np.stack([c.ravel(), r.ravel(), np.ones(rows * cols)])
    mapped = homography @ pixels
    w = mapped[2]
    ahead = w > 0
    u = np.where(ahead, mapped[0] / np.where(ahead, w, 1.0), -1e6).reshape(rows, cols)
    v = np.where(ahead, mapped[1] / np.where(ahead, w, 1.0), -1e6).reshape(rows, cols)
    warped = np.stack([
        ndimage.map_coordinates(channel, [v, u], order=1, mode='constant', cval=0.0)
        for channel in np.asarray(right.data, dtype=np.float64)
    ])
    return warped


def cost_volume(left, right, planes, left_cam=None, right_cam=None, mode=MODE_CORRELATION):
    """Plane-sweep volume as a Grid over the left camera's frustum.

    ``correlation`` mode gives one channel, the channel-mean of
    left * warped-right. ``concat`` mode stacks left and warped-right
    features (2 * C channels).
    """
    left_cam = left_cam or left.camera
    right_cam = right_cam or right.camera
    planes = tuple(float(d) for d in planes)
    if not planes:
        raise ContractError("cost volume needs at least one depth plane")
    if any(b <= a for a, b in zip(planes, planes[1:])):
        raise ContractError(f"depth planes must be strictly increasing, got {planes}")
    if left.channels != right.channels:
        raise ShapeMismatchError(f"left has {left.channels} channels, right has {right.channels}")
    if left.stride != right.stride:
        raise ShapeMismatchError(f"left stride {left.stride} != right stride {right.stride}")
    if mode not in (MODE_CORRELATION, MODE_CONCAT):
        raise ContractError(f"unknown cost volume mode {mode!r}")
    left_data = np.asarray(left.data, dtype=np.float64)
    slices = []
    for depth in planes:
        warped = plane_sweep_warp(right, left_cam, right_cam, depth)
        if mode == MODE_CORRELATION:
            slices.append((left_data * warped).mean(axis=0)[np.newaxis])
        else:
            slices.append(np.concatenate([left_data, warped], axis=0))
    data = np.stack(slices, axis=1)[np.newaxis]
    space = FrustumSpace(left_cam, planes, left_cam.image_size, left.stride)
    logger.debug("Cost volume with %d planes, mode %s, shape %s", len(planes), mode, data.shape)
    return Grid(data, space, left_cam.pose)


def frustum_to_cartesian(cv, target, pose):
    """Warp a frustum cost volume into a Cartesian space; outside the frustum reads zero."""
    if not isinstance(cv.space, FrustumSpace):
        raise ContractError("frustum_to_cartesian needs a grid bound to a FrustumSpace")
    return space_warp(cv, target, pose)
