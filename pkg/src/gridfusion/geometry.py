"""Coordinate spaces, rigid poses and pinhole cameras.

Conventions used across the package:

* Vehicle frames are right-handed with X forward, Y left and Z up.
  Camera frames use Z forward, X right and Y down.
* Extents and cell sizes of a Cartesian space are given in (x, y, z)
  order, while grid dims and grid indices are ordered (z, x, y).
* Every Space works in its own local frame. The Pose attached to a Grid
  maps that local frame into the reference frame.
"""
import abc
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import ConfigError, ContractError

logger = logging.getLogger(__name__)

EPS_DEPTH = 1e-3  # meters
ORTHONORMAL_TOL = 1e-9
EXTENT_TOL = 1e-6

# (x, y, z) <-> (z, x, y) component reordering
XYZ_TO_ZXY = [2, 0, 1]
ZXY_TO_XYZ = [1, 2, 0]


class Pose:
    """Rigid transform (rotation + translation) relative to a base frame.

    Applying a pose to a point returns ``rotation @ point + translation``.
    Instances are immutable.
    """

    __slots__ = ('rotation', 'translation', 'base_frame')

    def __init__(self, rotation, translation, base_frame='reference'):
        rotation = np.array(rotation, dtype=np.float64).reshape(3, 3)
        translation = np.array(translation, dtype=np.float64).reshape(3)
        drift = np.abs(rotation.T @ rotation - np.eye(3)).max()
        if drift > ORTHONORMAL_TOL or np.linalg.det(rotation) <= 0:
            raise ContractError(f"rotation is not a proper rotation (|RtR - I| = {drift:.3e})")
        if not np.all(np.isfinite(translation)):
            raise ContractError("translation must be finite")
        rotation.flags.writeable = False
        translation.flags.writeable = False
        object.__setattr__(self, 'rotation', rotation)
        object.__setattr__(self, 'translation', translation)
        object.__setattr__(self, 'base_frame', base_frame)

    def __setattr__(self, name, value):
        raise AttributeError("Pose is immutable")

    @classmethod
    def identity(cls, base_frame='reference'):
        return cls(np.eye(3), np.zeros(3), base_frame)

    @classmethod
    def from_euler(cls, angles_deg, translation=(0.0, 0.0, 0.0), seq='xyz', base_frame='reference'):
        rotation = Rotation.from_euler(seq, angles_deg, degrees=True).as_matrix()
        return cls(rotation, translation, base_frame)

    @classmethod
    def from_matrix(cls, matrix, base_frame='reference'):
        matrix = np.asarray(matrix, dtype=np.float64)
        return cls(matrix[:3, :3], matrix[:3, 3], base_frame)

    @classmethod
    def translation_only(cls, translation, base_frame='reference'):
        return cls(np.eye(3), translation, base_frame)

    def as_matrix(self):
        matrix = np.eye(4)
        matrix[:3, :3] = self.rotation
        matrix[:3, 3] = self.translation
        return matrix

    def apply(self, points):
        """Transform points of shape (..., 3).

        Computed with elementwise products only, so a single point and the
        same point inside a batch give bit-identical results.
        """
        p = np.asarray(points, dtype=np.float64)
        r = self.rotation
        return p[..., 0:1] * r[:, 0] + p[..., 1:2] * r[:, 1] + p[..., 2:3] * r[:, 2] + self.translation

    def inverse(self):
        rt = self.rotation.T
        return Pose(rt, -(rt @ self.translation), self.base_frame)

    def compose(self, other):
        """Return ``self ∘ other``: apply ``other`` first, then ``self``."""
        return Pose(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
            self.base_frame,
        )

    def is_identity(self):
        return np.array_equal(self.rotation, np.eye(3)) and not np.any(self.translation)

    def max_difference(self, other):
        return max(
            float(np.abs(self.rotation - other.rotation).max()),
            float(np.abs(self.translation - other.translation).max()),
        )

    def to_dict(self):
        return {
            'rotation': [float(v) for v in self.rotation.reshape(-1)],
            'translation': [float(v) for v in self.translation],
            'base_frame': self.base_frame,
        }

    @classmethod
    def from_dict(cls, data):
        if data is None:
            return cls.identity()
        try:
            base_frame = data.get('base_frame', 'reference')
            translation = data.get('translation', [0.0, 0.0, 0.0])
            if 'rotation' in data:
                return cls(np.asarray(data['rotation'], dtype=np.float64).reshape(3, 3), translation, base_frame)
            if 'euler_xyz_deg' in data:
                return cls.from_euler(data['euler_xyz_deg'], translation, base_frame=base_frame)
            return cls(np.eye(3), translation, base_frame)
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"invalid pose {data!r}: {exc}") from exc

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return (
            np.array_equal(self.rotation, other.rotation)
            and np.array_equal(self.translation, other.translation)
            and self.base_frame == other.base_frame
        )

    def __hash__(self):
        return hash((self.rotation.tobytes(), self.translation.tobytes(), self.base_frame))

    def __repr__(self):
        return f"Pose(t={self.translation.tolist()}, base_frame={self.base_frame!r})"


def compose(a, b):
    """Pose whose application equals applying ``b`` then ``a``."""
    return a.compose(b)


def inverse(p):
    return p.inverse()


def apply_pose(p, point):
    return p.apply(point)


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera; ``pose`` maps camera frame to reference frame."""

    focal: tuple
    principal_point: tuple
    image_size: tuple  # (rows, cols)
    pose: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        object.__setattr__(self, 'focal', tuple(float(v) for v in self.focal))
        object.__setattr__(self, 'principal_point', tuple(float(v) for v in self.principal_point))
        object.__setattr__(self, 'image_size', tuple(int(v) for v in self.image_size))
        fx, fy = self.focal
        cx, cy = self.principal_point
        rows, cols = self.image_size
        if fx <= 0 or fy <= 0:
            raise ContractError(f"focal lengths must be positive, got {self.focal}")
        if rows <= 0 or cols <= 0:
            raise ContractError(f"image size must be positive, got {self.image_size}")
        if not (0 <= cx <= cols and 0 <= cy <= rows):
            raise ContractError(f"principal point {self.principal_point} outside image {self.image_size}")

    @cached_property
    def world_to_camera(self):
        return self.pose.inverse()

    @property
    def intrinsic_matrix(self):
        fx, fy = self.focal
        cx, cy = self.principal_point
        return np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])

    def scaled(self, stride):
        """Camera whose pixel grid is the image subsampled by ``stride``."""
        rows, cols = self.image_size
        return CameraModel(
            focal=(self.focal[0] / stride, self.focal[1] / stride),
            principal_point=(self.principal_point[0] / stride, self.principal_point[1] / stride),
            image_size=(rows // stride, cols // stride),
            pose=self.pose,
        )

    def project_camera_frame(self, p_cam):
        """Pinhole projection of camera-frame points: (u, v, depth, valid)."""
        p_cam = np.asarray(p_cam, dtype=np.float64)
        x, y, z = p_cam[..., 0], p_cam[..., 1], p_cam[..., 2]
        front = z > EPS_DEPTH
        safe_z = np.where(front, z, 1.0)
        fx, fy = self.focal
        cx, cy = self.principal_point
        u = fx * x / safe_z + cx
        v = fy * y / safe_z + cy
        rows, cols = self.image_size
        valid = front & (u >= 0) & (u <= cols - 1) & (v >= 0) & (v <= rows - 1)
        return u, v, z, valid

    def project(self, point_world):
        return self.project_camera_frame(self.world_to_camera.apply(point_world))

    def unproject_camera_frame(self, u, v, depth):
        fx, fy = self.focal
        cx, cy = self.principal_point
        u, v, depth = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (u, v, depth)))
        return np.stack([(u - cx) / fx * depth, (v - cy) / fy * depth, depth], axis=-1)

    def unproject(self, u, v, depth):
        return self.pose.apply(self.unproject_camera_frame(u, v, depth))

    def to_dict(self):
        return {
            'focal': list(self.focal),
            'principal_point': list(self.principal_point),
            'image_size': list(self.image_size),
            'pose': self.pose.to_dict(),
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                focal=data['focal'],
                principal_point=data['principal_point'],
                image_size=data['image_size'],
                pose=Pose.from_dict(data.get('pose')),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"invalid camera {data!r}: {exc}") from exc


def project(camera, point_world):
    return camera.project(point_world)


class Space(abc.ABC):
    """Coordinate system with a grid-index <-> local-point mapping."""

    @property
    @abc.abstractmethod
    def dims(self):
        """Grid dims ordered (Z, X, Y)."""

    @abc.abstractmethod
    def grid_to_world(self, index):
        """Map continuous (z, x, y) indices of shape (..., 3) to local points."""

    @abc.abstractmethod
    def world_to_grid(self, points):
        """Map local points to continuous (z, x, y) indices and an in-bounds mask."""

    @abc.abstractmethod
    def to_dict(self):
        """Serializable description."""

    @property
    def num_voxels(self):
        return math.prod(self.dims)

    def voxel_indices(self):
        """All integer indices in flat (z, x, y) row-major order, shape (V, 3)."""
        return np.indices(self.dims).reshape(3, -1).T

    def voxel_centers(self):
        return self.grid_to_world(self.voxel_indices().astype(np.float64))

    def extent_contains(self, points):
        """Mask of local points inside the space's extent."""
        return self.world_to_grid(points)[1]


@dataclass(frozen=True)
class CartesianSpace(Space):
    """Axis-aligned voxel box; extents and cells in (x, y, z), dims in (Z, X, Y)."""

    min_corner: tuple
    max_corner: tuple
    cell_size: tuple

    def __post_init__(self):
        for name in ('min_corner', 'max_corner', 'cell_size'):
            value = tuple(float(v) for v in getattr(self, name))
            if len(value) != 3 or not all(math.isfinite(v) for v in value):
                raise ContractError(f"{name} must be 3 finite values, got {value}")
            object.__setattr__(self, name, value)
        if min(self.cell_size) <= 0:
            raise ContractError(f"cell sizes must be strictly positive, got {self.cell_size}")
        counts = []
        for lo, hi, cell in zip(self.min_corner, self.max_corner, self.cell_size):
            n = round((hi - lo) / cell)
            if n < 1 or abs(n * cell - (hi - lo)) > EXTENT_TOL:
                raise ContractError(
                    f"extent [{lo}, {hi}] is not a whole number of {cell} m cells"
                )
            counts.append(n)
        nx, ny, nz = counts
        object.__setattr__(self, '_dims', (nz, nx, ny))

    @property
    def dims(self):
        return self._dims

    def grid_to_world(self, index):
        index = np.asarray(index, dtype=np.float64)
        xyz = index[..., ZXY_TO_XYZ]
        return np.asarray(self.min_corner) + (xyz + 0.5) * np.asarray(self.cell_size)

    def world_to_grid(self, points):
        points = np.asarray(points, dtype=np.float64)
        lo = np.asarray(self.min_corner)
        hi = np.asarray(self.max_corner)
        xyz = (points - lo) / np.asarray(self.cell_size) - 0.5
        in_bounds = np.all((points >= lo) & (points <= hi), axis=-1)
        return xyz[..., XYZ_TO_ZXY], in_bounds

    def to_dict(self):
        return {
            'type': 'cartesian',
            'min': list(self.min_corner),
            'max': list(self.max_corner),
            'cell': list(self.cell_size),
        }


def cartesian_space(min_corner, max_corner, cell_size):
    return CartesianSpace(min_corner, max_corner, cell_size)


def voxel_center(space, index):
    """Center of integer voxel ``index`` (z, x, y) as an (x, y, z) point."""
    index = tuple(int(i) for i in index)
    if len(index) != 3 or any(i < 0 or i >= n for i, n in zip(index, space.dims)):
        raise ContractError(f"voxel index {index} outside dims {space.dims}")
    return space.grid_to_world(np.asarray(index, dtype=np.float64))


def world_to_grid(space, point):
    return space.world_to_grid(point)


def inverse_depth_planes(near, far, count):
    """Depths uniform in inverse depth from ``near`` to ``far``."""
    if count < 1 or near <= 0 or far <= near:
        raise ContractError(f"invalid plane range near={near} far={far} count={count}")
    if count == 1:
        return (float(near),)
    inv = np.linspace(1.0 / near, 1.0 / far, count)
    depths = 1.0 / inv
    depths[0], depths[-1] = near, far
    return tuple(float(d) for d in depths)


@dataclass(frozen=True)
class FrustumSpace(Space):
    """Camera frustum indexed by (depth plane, row, col).

    The local frame is the camera frame. Row/col indices are feature-map
    pixels: pixel (r, c) sits at image coordinates (v, u) = (r, c) * stride.
    """

    camera: CameraModel
    depth_planes: tuple
    image_dims: tuple = None
    stride: int = 1

    def __post_init__(self):
        planes = tuple(float(d) for d in self.depth_planes)
        if not planes:
            raise ContractError("frustum needs at least one depth plane")
        if planes[0] <= 0 or any(b <= a for a, b in zip(planes, planes[1:])):
            raise ContractError(f"depth planes must be positive and strictly increasing, got {planes}")
        object.__setattr__(self, 'depth_planes', planes)
        image_dims = self.image_dims if self.image_dims is not None else self.camera.image_size
        object.__setattr__(self, 'image_dims', tuple(int(v) for v in image_dims))
        if int(self.stride) < 1:
            raise ContractError(f"stride must be >= 1, got {self.stride}")
        object.__setattr__(self, 'stride', int(self.stride))

    @property
    def dims(self):
        rows, cols = self.image_dims
        return (len(self.depth_planes), rows // self.stride, cols // self.stride)

    def grid_to_world(self, index):
        index = np.asarray(index, dtype=np.float64)
        planes = np.asarray(self.depth_planes)
        depth = np.interp(index[..., 0], np.arange(len(planes)), planes)
        v = index[..., 1] * self.stride
        u = index[..., 2] * self.stride
        return self.camera.unproject_camera_frame(u, v, depth)

    def world_to_grid(self, points):
        points = np.asarray(points, dtype=np.float64)
        u, v, depth, _ = self.camera.project_camera_frame(points)
        planes = np.asarray(self.depth_planes)
        k = np.interp(depth, planes, np.arange(len(planes), dtype=np.float64))
        index = np.stack([k, v / self.stride, u / self.stride], axis=-1)
        _, rows, cols = self.dims
        in_bounds = (
            (depth > EPS_DEPTH)
            & (depth >= planes[0]) & (depth <= planes[-1])
            & (index[..., 1] >= -0.5) & (index[..., 1] <= rows - 0.5)
            & (index[..., 2] >= -0.5) & (index[..., 2] <= cols - 0.5)
        )
        return index, in_bounds

    def to_dict(self):
        return {
            'type': 'frustum',
            'camera': self.camera.to_dict(),
            'depths': list(self.depth_planes),
            'image_dims': list(self.image_dims),
            'stride': self.stride,
        }


def space_from_dict(data, cameras=None):
    """Build a Space from its config/FGRD description.

    ``cameras`` resolves a frustum's camera given by name.
    """
    try:
        kind = data.get('type', 'cartesian')
        if kind == 'cartesian':
            return CartesianSpace(data['min'], data['max'], data['cell'])
        if kind == 'frustum':
            camera = data['camera']
            if isinstance(camera, str):
                if not cameras or camera not in cameras:
                    raise ConfigError(f"frustum references unknown camera {camera!r}")
                camera = cameras[camera]
            elif not isinstance(camera, CameraModel):
                camera = CameraModel.from_dict(camera)
            depths = data['depths']
            if isinstance(depths, dict):
                depths = inverse_depth_planes(depths['near'], depths['far'], depths['count'])
            return FrustumSpace(camera, depths, data.get('image_dims'), data.get('stride', 1))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"invalid space {data!r}: {exc}") from exc
    raise ConfigError(f"unknown space type {kind!r}")
