"""Camera images: file IO and featurizers.

Images are handled as float arrays of shape (C, rows, cols). Two file
formats are supported:

* PNG, read and written with OpenCV and mapped to [0, 1] floats.
* planar float32 (``.f32``): three little-endian uint32 (rows, cols,
  channels) followed by the C * rows * cols float32 values, channel-major.
"""
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from .errors import ContractError, InputError
from .raycast import ImageFeatureMap

logger = logging.getLogger(__name__)

_PLANAR_HEADER = struct.Struct('<3I')


def read_image(path):
    """Load an image file as a (C, rows, cols) float32 array."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"image not found: {path}")
    if path.suffix.lower() == '.f32':
        raw = path.read_bytes()
        if len(raw) < _PLANAR_HEADER.size:
            raise InputError(f"truncated planar image: {path}")
        rows, cols, channels = _PLANAR_HEADER.unpack_from(raw, 0)
        payload = raw[_PLANAR_HEADER.size:]
        if len(payload) != rows * cols * channels * 4:
            raise InputError(f"planar image {path} payload does not match its header")
        return np.frombuffer(payload, dtype='<f4').astype(np.float32).reshape(channels, rows, cols)
    image = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if image is None:
        raise InputError(f"unreadable image: {path}")
    scale = 65535.0 if image.dtype == np.uint16 else 255.0
    if image.ndim == 2:
        image = image[:, :, np.newaxis]
    elif image.shape[2] >= 3:
        image = cv2.cvtColor(image[:, :, :3], cv2.COLOR_BGR2RGB)
    return (np.moveaxis(image, -1, 0).astype(np.float32) / scale)


def write_image(path, image):
    """Write a (C, rows, cols) image; the suffix selects PNG or planar float32."""
    path = Path(path)
    image = np.asarray(image)
    if path.suffix.lower() == '.f32':
        channels, rows, cols = image.shape
        path.write_bytes(
            _PLANAR_HEADER.pack(rows, cols, channels)
            + np.ascontiguousarray(image, dtype='<f4').tobytes()
        )
        return
    pixels = np.clip(np.rint(np.moveaxis(image, 0, -1) * 255.0), 0, 255).astype(np.uint8)
    if pixels.shape[2] == 3:
        pixels = cv2.cvtColor(pixels, cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(str(path), pixels):
        raise InputError(f"could not write image {path}")


def _stride_image(image, stride):
    """Area-average (C, rows, cols) by an integer stride."""
    image = np.asarray(image, dtype=np.float64)
    if stride == 1:
        return image
    channels, rows, cols = image.shape
    out_rows, out_cols = rows // stride, cols // stride
    cropped = np.ascontiguousarray(np.moveaxis(image[:, :out_rows * stride, :out_cols * stride], 0, -1))
    if channels <= 4:
        resized = cv2.resize(cropped, (out_cols, out_rows), interpolation=cv2.INTER_AREA)
        return np.moveaxis(resized.reshape(out_rows, out_cols, channels), -1, 0)
    blocks = cropped.reshape(out_rows, stride, out_cols, stride, channels)
    return np.moveaxis(blocks.mean(axis=(1, 3)), -1, 0)


@dataclass(frozen=True)
class RawFeaturizer:
    """Uses the image channels themselves as features."""

    stride: int = 1

    def __call__(self, image, camera):
        return ImageFeatureMap(_stride_image(image, self.stride), camera, self.stride)


@dataclass(frozen=True)
class RandomLinearFeaturizer:
    """Fixed-seed 1x1 linear map applied after striding."""

    out_channels: int = 8
    stride: int = 1
    seed: int = 0

    def weights(self, in_channels):
        rng = np.random.default_rng(self.seed)
        return rng.standard_normal((self.out_channels, in_channels)) / np.sqrt(in_channels)

    def __call__(self, image, camera):
        strided = _stride_image(image, self.stride)
        features = np.einsum('oc,crw->orw', self.weights(strided.shape[0]), strided)
        return ImageFeatureMap(features, camera, self.stride)


def make_featurizer(section):
    """Featurizer from a config mapping such as ``{"type": "random", "channels": 8}``."""
    section = dict(section or {})
    kind = section.get('type', 'raw')
    stride = int(section.get('stride', 1))
    if kind == 'raw':
        return RawFeaturizer(stride)
    if kind == 'random':
        return RandomLinearFeaturizer(int(section.get('channels', 8)), stride, int(section.get('seed', 0)))
    raise ContractError(f"unknown featurizer type {kind!r}")
