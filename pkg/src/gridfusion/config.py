"""Run configuration: JSON documents and the built-in presets.

A config is a JSON object. Presets are complete configs; a file may name
a preset (key ``preset``) or be combined with ``--preset`` and then
replaces whole top-level keys of it.
"""
import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, GridFusionError
from .geometry import CameraModel, Pose, space_from_dict
from .lidar_sim import profile_from_dict

logger = logging.getLogger(__name__)

ENCODER_TYPES = ('pointnet', 'raycast', 'stereo-cv')

# camera frame (Z forward, X right, Y down) -> vehicle frame (X forward, Y left, Z up)
CAMERA_TO_VEHICLE = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])


def mounted_camera_pose(yaw_deg, translation):
    """Pose dict of a camera looking along vehicle heading ``yaw_deg``."""
    yaw = Pose.from_euler([0.0, 0.0, yaw_deg])
    rotation = yaw.rotation @ CAMERA_TO_VEHICLE
    return Pose(rotation, translation).to_dict()


def _camera(yaw_deg, translation, image_size, focal):
    rows, cols = image_size
    return {
        'focal': [focal, focal],
        'principal_point': [cols / 2.0, rows / 2.0],
        'image_size': [rows, cols],
        'pose': mounted_camera_pose(yaw_deg, translation),
    }


PANORAMIC_LIDAR_SPACE = {'type': 'cartesian', 'min': [-51.2, -51.2, -2.0], 'max': [51.2, 51.2, 12.0],
                         'cell': [0.32, 0.32, 14.0]}
PANORAMIC_RAYCAST_SPACE = {'type': 'cartesian', 'min': [-51.2, -51.2, -2.0], 'max': [51.2, 51.2, 12.0],
                           'cell': [0.4, 0.4, 1.0]}
NEAR_FIELD_SPACE = {'type': 'cartesian', 'min': [-25.6, -25.6, -2.0], 'max': [25.6, 25.6, 12.0],
                    'cell': [0.4, 0.4, 14.0]}
STEREO_SPACE = {'type': 'cartesian', 'min': [-36.0, 0.0, -1.0], 'max': [36.0, 60.0, 5.0],
                'cell': [0.3, 0.3, 0.5]}


def _panoramic(lidar, encoders=('lidar', 'cameras')):
    """Six-camera rig plus roof LiDAR, fused in the LiDAR BEV space.

    ``encoders`` picks the sensor set: LiDAR only, cameras only or both.
    Every variant still scans the scene for occupancy ground truth.
    """
    cameras = {
        f'cam{i}': _camera(60.0 * i, [0.0, 0.0, 1.6], (540, 960), 480.0)
        for i in range(6)
    }
    all_encoders = [
        {'name': 'lidar', 'type': 'pointnet', 'space': 'lidar', 'pose': 'ego'},
        {'name': 'cameras', 'type': 'raycast', 'space': 'raycast', 'pose': 'ego',
         'cameras': sorted(cameras)},
    ]
    return {
        'seed': 0,
        'cameras': cameras,
        'spaces': {'lidar': PANORAMIC_LIDAR_SPACE, 'raycast': PANORAMIC_RAYCAST_SPACE,
                   'near_field': NEAR_FIELD_SPACE},
        'poses': {'ego': Pose.identity().to_dict(), 'lidar_sensor': {'translation': [0.0, 0.0, 1.8]}},
        'scene': {'boxes': 8, 'ground_z': 0.0},
        'lidar': dict(lidar, sensor_pose='lidar_sensor'),
        'lidar_profiles': {},
        'encoders': [e for e in all_encoders if e['name'] in encoders],
        'backbone': {'space': 'lidar', 'pose': 'ego', 'mode': 'concat', 'subnetwork': 'identity'},
        'heads': [
            {'name': 'detection', 'space': 'lidar', 'pose': 'ego'},
            {'name': 'near_field', 'space': 'near_field', 'pose': 'ego'},
        ],
        'pointnet': {'hidden': 32, 'embed': 64, 'seed': 0},
        'raycast': {'reduction': 'mean', 'sampling': 'nearest',
                    'featurizer': {'type': 'random', 'channels': 8, 'stride': 4, 'seed': 0}},
        'stereo': {},
        'valid_objects': {'threshold': 0.5, 'eps': 0.5, 'spacing': 0.2},
        'occupancy': {'threshold': 0.5, 'space': 'raycast', 'pose': 'ego'},
    }


def _stereo_front():
    left = _camera(0.0, [0.0, 0.25, 1.5], (360, 640), 500.0)
    right = _camera(0.0, [0.0, -0.25, 1.5], (360, 640), 500.0)
    return {
        'seed': 0,
        'cameras': {'left': left, 'right': right},
        'spaces': {'stereo': STEREO_SPACE},
        # grid x runs to the right of the vehicle, grid y forward
        'poses': {'stereo_grid': Pose.from_euler([0.0, 0.0, -90.0]).to_dict(),
                  'lidar_sensor': {'translation': [0.0, 0.0, 1.8]}},
        'scene': {'boxes': 6, 'ground_z': 0.0, 'region': {'x': [8.0, 50.0], 'y': [-12.0, 12.0]}},
        'lidar': {'profile': 'hd', 'sensor_pose': 'lidar_sensor'},
        'lidar_profiles': {},
        'encoders': [
            {'name': 'stereo', 'type': 'stereo-cv', 'space': 'stereo', 'pose': 'stereo_grid',
             'left': 'left', 'right': 'right'},
        ],
        'backbone': {'space': 'stereo', 'pose': 'stereo_grid', 'mode': 'concat', 'subnetwork': 'identity'},
        'heads': [{'name': 'detection', 'space': 'stereo', 'pose': 'stereo_grid'}],
        'pointnet': {'hidden': 32, 'embed': 64, 'seed': 0},
        'raycast': {'reduction': 'mean', 'sampling': 'nearest',
                    'featurizer': {'type': 'random', 'channels': 8, 'stride': 4, 'seed': 0}},
        'stereo': {'planes': {'near': 2.0, 'far': 60.0, 'count': 48}, 'mode': 'correlation'},
        'valid_objects': {'threshold': 0.5, 'eps': 0.5, 'spacing': 0.2},
        'occupancy': {'threshold': 0.5, 'space': 'stereo', 'pose': 'stereo_grid'},
    }


PRESETS = {
    'panoramic-hd': _panoramic({'profile': 'hd'}),
    'panoramic-ld': _panoramic({'profile': 'hd', 'degrade_to': 'ld'}),
    'panoramic-vision': _panoramic({'profile': 'hd'}, encoders=('cameras',)),
    'lidar-hd': _panoramic({'profile': 'hd'}, encoders=('lidar',)),
    'lidar-ld': _panoramic({'profile': 'hd', 'degrade_to': 'ld'}, encoders=('lidar',)),
    'stereo-front': _stereo_front(),
}


@dataclass(frozen=True)
class EncoderConfig:
    name: str
    kind: str
    space: str
    pose: str
    options: dict = field(default_factory=dict)


@dataclass(frozen=True)
class HeadConfig:
    name: str
    space: str
    pose: str


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Parsed configuration with named cameras, spaces and poses resolved"""

    raw: dict
    seed: int
    cameras: dict
    spaces: dict
    poses: dict
    encoders: tuple
    backbone: dict
    heads: tuple

    def section(self, name):
        return dict(self.raw.get(name) or {})

    def camera(self, name):
        return self._lookup(self.cameras, 'camera', name)

    def space(self, name):
        return self._lookup(self.spaces, 'space', name)

    def pose(self, name):
        if name is None:
            return Pose.identity()
        return self._lookup(self.poses, 'pose', name)

    def profile(self, name):
        custom = self.section('lidar_profiles')
        if name in custom:
            return profile_from_dict(custom[name])
        return profile_from_dict(name)

    @staticmethod
    def _lookup(table, kind, name):
        try:
            return table[name]
        except KeyError:
            raise ConfigError(f"unknown {kind} {name!r}; known: {sorted(table)}") from None

    def backbone_frame(self):
        return self.space(self.backbone['space']), self.pose(self.backbone.get('pose'))

    def with_seed(self, seed):
        raw = copy.deepcopy(self.raw)
        raw['seed'] = int(seed)
        return parse_config(raw)


def parse_config(raw):
    """Validate a config mapping and resolve its named objects."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    try:
        cameras = {name: CameraModel.from_dict(c) for name, c in (raw.get('cameras') or {}).items()}
        spaces = {name: space_from_dict(s, cameras) for name, s in (raw.get('spaces') or {}).items()}
        poses = {name: Pose.from_dict(p) for name, p in (raw.get('poses') or {}).items()}
    except ConfigError:
        raise
    except GridFusionError as exc:
        raise ConfigError(str(exc)) from exc
    encoders = []
    for entry in raw.get('encoders') or []:
        kind = entry.get('type')
        if kind not in ENCODER_TYPES:
            raise ConfigError(f"unknown encoder type {kind!r}; expected one of {ENCODER_TYPES}")
        try:
            options = {k: v for k, v in entry.items() if k not in ('name', 'type', 'space', 'pose')}
            encoders.append(EncoderConfig(entry['name'], kind, entry['space'], entry.get('pose'), options))
        except KeyError as exc:
            raise ConfigError(f"encoder entry {entry!r} is missing {exc}") from exc
    heads = tuple(
        HeadConfig(h['name'], h['space'], h.get('pose')) for h in raw.get('heads') or []
    )
    config = RunConfig(
        raw=raw,
        seed=int(raw.get('seed', 0)),
        cameras=cameras,
        spaces=spaces,
        poses=poses,
        encoders=tuple(encoders),
        backbone=dict(raw.get('backbone') or {}),
        heads=heads,
    )
    for encoder in config.encoders:
        config.space(encoder.space)
        config.pose(encoder.pose)
    for head in heads:
        config.space(head.space)
        config.pose(head.pose)
    return config


def load_config(path=None, preset=None, seed=None):
    """Load a config file and/or a named preset into a RunConfig."""
    raw = {}
    data = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    preset = preset or data.get('preset')
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; known: {sorted(PRESETS)}")
        raw = copy.deepcopy(PRESETS[preset])
    if path is None and preset is None:
        raise ConfigError("either --config or --preset is required")
    raw.update({k: v for k, v in data.items() if k != 'preset'})
    if seed is not None:
        raw['seed'] = int(seed)
    logger.debug("Loaded config (preset=%s, file=%s)", preset, path)
    return parse_config(raw)
