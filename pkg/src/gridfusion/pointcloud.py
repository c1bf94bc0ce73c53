"""LiDAR point clouds and their flat binary format.

Binary layout (little-endian): point count as uint64, then per point
x, y, z, intensity as float32 followed by beam and azimuth indices as two
uint16 (together the fifth 32-bit word).
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError, InputError
from .geometry import Pose

logger = logging.getLogger(__name__)

POINT_DTYPE = np.dtype([
    ('x', '<f4'), ('y', '<f4'), ('z', '<f4'), ('intensity', '<f4'),
    ('beam', '<u2'), ('azimuth', '<u2'),
])
_COUNT_DTYPE = np.dtype('<u8')


@dataclass(frozen=True, eq=False)
class PointCloud:
    """LiDAR returns in the sensor frame; ``pose`` maps sensor to reference."""

    xyz: np.ndarray
    intensity: np.ndarray
    beam: np.ndarray
    azimuth: np.ndarray
    pose: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        xyz = np.array(self.xyz, dtype=np.float64).reshape(-1, 3)
        n = xyz.shape[0]
        intensity = np.array(self.intensity, dtype=np.float64).reshape(n)
        beam = np.array(self.beam, dtype=np.int64).reshape(n)
        azimuth = np.array(self.azimuth, dtype=np.int64).reshape(n)
        if not np.all(np.isfinite(xyz)):
            raise ContractError("point coordinates must be finite")
        if n and (beam.min() < 0 or azimuth.min() < 0):
            raise ContractError("beam and azimuth indices must be non-negative")
        for name, value in (('xyz', xyz), ('intensity', intensity), ('beam', beam), ('azimuth', azimuth)):
            value.flags.writeable = False
            object.__setattr__(self, name, value)

    @classmethod
    def empty(cls, pose=None):
        return cls(np.zeros((0, 3)), np.zeros(0), np.zeros(0, np.int64), np.zeros(0, np.int64),
                   pose or Pose.identity())

    @classmethod
    def from_points(cls, xyz, intensity=None, pose=None):
        xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
        n = xyz.shape[0]
        if intensity is None:
            intensity = np.zeros(n)
        zeros = np.zeros(n, dtype=np.int64)
        return cls(xyz, intensity, zeros, zeros, pose or Pose.identity())

    def __len__(self):
        return self.xyz.shape[0]

    def take(self, selection):
        """Subset by boolean mask or index array, preserving order."""
        return PointCloud(
            self.xyz[selection], self.intensity[selection],
            self.beam[selection], self.azimuth[selection], self.pose,
        )

    def ranges(self):
        return np.sqrt(np.sum(self.xyz ** 2, axis=1))

    def points_in(self, pose):
        """Point positions expressed in the frame placed at ``pose``."""
        return pose.inverse().compose(self.pose).apply(self.xyz)


def encode_point_cloud(cloud):
    records = np.zeros(len(cloud), dtype=POINT_DTYPE)
    records['x'], records['y'], records['z'] = cloud.xyz.T
    records['intensity'] = cloud.intensity
    records['beam'] = cloud.beam
    records['azimuth'] = cloud.azimuth
    return np.array([len(cloud)], dtype=_COUNT_DTYPE).tobytes() + records.tobytes()


def decode_point_cloud(buffer, pose=None):
    buffer = bytes(buffer)
    if len(buffer) < _COUNT_DTYPE.itemsize:
        raise InputError("point cloud stream shorter than its count header")
    count = int(np.frombuffer(buffer[:8], dtype=_COUNT_DTYPE)[0])
    payload = buffer[8:]
    if len(payload) != count * POINT_DTYPE.itemsize:
        raise InputError(
            f"point cloud payload is {len(payload)} bytes, header announces {count} points"
        )
    records = np.frombuffer(payload, dtype=POINT_DTYPE)
    xyz = np.stack([records['x'], records['y'], records['z']], axis=1)
    return PointCloud(xyz, records['intensity'], records['beam'], records['azimuth'], pose or Pose.identity())


def write_point_cloud(cloud, destination):
    encoded = encode_point_cloud(cloud)
    if isinstance(destination, (str, Path)):
        Path(destination).write_bytes(encoded)
    else:
        destination.write(encoded)


def read_point_cloud(source, pose=None):
    if isinstance(source, (bytes, bytearray, memoryview)):
        return decode_point_cloud(source, pose)
    path = Path(source)
    if not path.exists():
        raise InputError(f"point cloud not found: {path}")
    return decode_point_cloud(path.read_bytes(), pose)
