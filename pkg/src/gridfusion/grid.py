"""Grid container and the FGRD binary format.

A Grid binds a 5-D feature volume ``(N, C, Z, X, Y)`` to a Space and a
Pose (grid-to-reference). Grids are immutable values; every operation
returns a new grid.

FGRD layout (little-endian)::

    magic     4 bytes  b"FGRD"
    version   uint16
    dims      5 x uint32   N, C, Z, X, Y
    meta_len  uint32
    meta      meta_len bytes of UTF-8 JSON (space description, base frame)
    pose      12 x float64  row-major 3x4 [R | t]
    payload   N*C*Z*X*Y x float32, row-major with Y fastest

Only float32 grids are written, so reading a file back returns exactly
the grid that was written. Cast computed grids with ``Grid.astype`` first.
"""
import hashlib
import io
import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, GridFormatError, GridMismatchError, InputError, ShapeMismatchError
from .geometry import CartesianSpace, Pose, space_from_dict

logger = logging.getLogger(__name__)

MAGIC = b'FGRD'
VERSION = 1
MAX_ELEMENTS = 2 ** 32
_FIXED_HEADER = struct.Struct('<4sH5II')
_POSE_BLOCK = struct.Struct('<12d')


@dataclass(frozen=True, eq=False)
class Grid:
    """Feature volume of shape (N, C, Z, X, Y) bound to a space and pose"""

    data: np.ndarray
    space: object
    pose: Pose

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 5:
            raise ShapeMismatchError(f"grid data must be 5-D (N, C, Z, X, Y), got shape {data.shape}")
        if tuple(data.shape[2:]) != tuple(self.space.dims):
            raise ShapeMismatchError(
                f"grid spatial shape {data.shape[2:]} does not match space dims {self.space.dims}"
            )
        if data.flags.writeable:
            data = data.view()
            data.flags.writeable = False
        object.__setattr__(self, 'data', data)

    @classmethod
    def zeros(cls, space, pose, channels, batch=1, dtype=np.float32):
        return cls(np.zeros((batch, channels) + tuple(space.dims), dtype=dtype), space, pose)

    @property
    def shape(self):
        return self.data.shape

    @property
    def batch(self):
        return self.data.shape[0]

    @property
    def channels(self):
        return self.data.shape[1]

    @property
    def dims(self):
        return tuple(self.data.shape[2:])

    def is_finite(self):
        return bool(np.all(np.isfinite(self.data)))

    def with_data(self, data):
        return Grid(data, self.space, self.pose)

    def astype(self, dtype):
        if self.data.dtype == dtype:
            return self
        return Grid(self.data.astype(dtype), self.space, self.pose)

    def slice_channels(self, start, stop):
        return Grid(self.data[:, start:stop], self.space, self.pose)

    def checksum(self):
        """sha256 of the FGRD encoding; defined for float32 grids only."""
        return hashlib.sha256(encode_grid(self)).hexdigest()

    def __repr__(self):
        return f"Grid(shape={self.shape}, space={type(self.space).__name__}, pose={self.pose!r})"


def check_same_frame(a, b, *, check_batch=True):
    """Raise GridMismatchError naming the first field on which a and b differ."""
    if a.space != b.space:
        raise GridMismatchError('space')
    if a.pose != b.pose:
        raise GridMismatchError('pose')
    if check_batch and a.batch != b.batch:
        raise GridMismatchError('N', f"{a.batch} != {b.batch}")
    if a.dims != b.dims:
        raise GridMismatchError('dims', f"{a.dims} != {b.dims}")


def concat_channels(a, b):
    """Stack b's channels after a's; both grids must share space, pose, N and dims."""
    check_same_frame(a, b)
    return Grid(np.concatenate([a.data, b.data], axis=1), a.space, a.pose)


def coordinate_grid(space, pose, batch=1):
    """C=3 grid holding the reference-frame (x, y, z) of every voxel center."""
    centers = pose.apply(space.voxel_centers())
    volume = centers.reshape(tuple(space.dims) + (3,))
    data = np.moveaxis(volume, -1, 0)[np.newaxis]
    if batch > 1:
        data = np.repeat(data, batch, axis=0)
    return Grid(np.ascontiguousarray(data), space, pose)


def collapse_height(grid):
    """Fold Z into channels: (N, C, Z, X, Y) -> (N, C*Z, 1, X, Y).

    Channel ``c * Z + z`` holds channel c of height slice z.
    """
    space = grid.space
    if not isinstance(space, CartesianSpace):
        raise GridMismatchError('space', 'height collapse needs a Cartesian space')
    n, c, z, x, y = grid.shape
    height = space.max_corner[2] - space.min_corner[2]
    flat_space = CartesianSpace(
        space.min_corner,
        space.max_corner,
        (space.cell_size[0], space.cell_size[1], height),
    )
    return Grid(grid.data.reshape(n, c * z, 1, x, y), flat_space, grid.pose)


def encode_grid(g):
    n, c, z, x, y = g.shape
    meta = json.dumps(
        {'space': g.space.to_dict(), 'base_frame': g.pose.base_frame},
        sort_keys=True,
    ).encode('utf-8')
    pose_block = np.concatenate([g.pose.rotation, g.pose.translation[:, None]], axis=1).reshape(-1)
    if g.data.dtype != np.float32:
        raise GridFormatError(GridFormatError.BAD_DTYPE, f"FGRD stores float32, got {g.data.dtype}")
    payload = np.ascontiguousarray(g.data, dtype='<f4').tobytes()
    return b''.join([
        _FIXED_HEADER.pack(MAGIC, VERSION, n, c, z, x, y, len(meta)),
        meta,
        _POSE_BLOCK.pack(*pose_block),
        payload,
    ])


def decode_grid(buffer):
    buffer = bytes(buffer)
    if len(buffer) < 4 or buffer[:4] != MAGIC:
        raise GridFormatError(GridFormatError.BAD_MAGIC)
    if len(buffer) < _FIXED_HEADER.size:
        raise GridFormatError(GridFormatError.TRUNCATED_PAYLOAD, 'header shorter than fixed block')
    _, version, n, c, z, x, y, meta_len = _FIXED_HEADER.unpack_from(buffer, 0)
    if version != VERSION:
        raise GridFormatError(GridFormatError.BAD_VERSION, f"unsupported version {version}")
    count = n * c * z * x * y
    if count > MAX_ELEMENTS or min(z, x, y) == 0:
        raise GridFormatError(GridFormatError.DIM_OVERFLOW, f"dims {(n, c, z, x, y)}")
    offset = _FIXED_HEADER.size
    if len(buffer) < offset + meta_len + _POSE_BLOCK.size:
        raise GridFormatError(GridFormatError.TRUNCATED_PAYLOAD, 'metadata block cut short')
    try:
        meta = json.loads(buffer[offset:offset + meta_len].decode('utf-8'))
        space = space_from_dict(meta['space'])
    except (ConfigError, ValueError, KeyError, TypeError) as exc:
        raise GridFormatError(GridFormatError.BAD_METADATA, f"unreadable metadata: {exc}") from exc
    offset += meta_len
    pose_block = np.array(_POSE_BLOCK.unpack_from(buffer, offset)).reshape(3, 4)
    pose = Pose(pose_block[:, :3], pose_block[:, 3], meta.get('base_frame', 'reference'))
    offset += _POSE_BLOCK.size
    if tuple(space.dims) != (z, x, y):
        raise GridFormatError(GridFormatError.DIM_OVERFLOW, f"header dims {(z, x, y)} vs space {space.dims}")
    payload = buffer[offset:]
    if len(payload) != count * 4:
        raise GridFormatError(
            GridFormatError.TRUNCATED_PAYLOAD,
            f"expected {count * 4} payload bytes, found {len(payload)}",
        )
    data = np.frombuffer(payload, dtype='<f4').astype(np.float32).reshape(n, c, z, x, y)
    return Grid(data, space, pose)


def write_grid(g, destination):
    """Write ``g`` as FGRD to a path or a binary file object."""
    encoded = encode_grid(g)
    if isinstance(destination, (str, Path)):
        destination = Path(destination)
        destination.parent.mkdir(parents=True, exist_ok=True)
        destination.write_bytes(encoded)
    else:
        destination.write(encoded)
    logger.debug("Wrote grid %s (%d bytes)", g.shape, len(encoded))


def read_grid(source):
    """Read an FGRD grid from a path, a binary file object or bytes."""
    if isinstance(source, (bytes, bytearray, memoryview)):
        return decode_grid(source)
    if isinstance(source, (str, Path)):
        if not Path(source).exists():
            raise InputError(f"grid file not found: {source}")
        return decode_grid(Path(source).read_bytes())
    if isinstance(source, io.IOBase) or hasattr(source, 'read'):
        return decode_grid(source.read())
    raise TypeError(f"cannot read grid from {type(source).__name__}")
