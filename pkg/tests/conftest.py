import copy

import numpy as np
import pytest

from gridfusion.config import mounted_camera_pose, parse_config
from gridfusion.geometry import CameraModel, CartesianSpace, Pose
from gridfusion.grid import Grid


SMALL_CONFIG = {
    'seed': 5,
    'cameras': {
        'front': {'focal': [20.0, 20.0], 'principal_point': [16.0, 12.0], 'image_size': [24, 32],
                  'pose': mounted_camera_pose(0.0, [0.0, 0.0, 1.5])},
        'left': {'focal': [20.0, 20.0], 'principal_point': [16.0, 12.0], 'image_size': [24, 32],
                 'pose': mounted_camera_pose(90.0, [0.0, 0.0, 1.5])},
    },
    'spaces': {
        'bev': {'type': 'cartesian', 'min': [-8.0, -8.0, -1.0], 'max': [8.0, 8.0, 3.0], 'cell': [0.5, 0.5, 4.0]},
        'vol': {'type': 'cartesian', 'min': [-8.0, -8.0, -1.0], 'max': [8.0, 8.0, 3.0], 'cell': [1.0, 1.0, 1.0]},
        'ahead': {'type': 'cartesian', 'min': [0.0, -4.0, -1.0], 'max': [8.0, 4.0, 3.0], 'cell': [1.0, 1.0, 4.0]},
    },
    'poses': {'ego': {}, 'lidar_sensor': {'translation': [0.0, 0.0, 1.8]}},
    'scene': {'boxes': 3, 'ground_z': 0.0, 'region': {'x': [3.0, 8.0], 'y': [-6.0, 6.0]}},
    'lidar': {'profile': 'small', 'sensor_pose': 'lidar_sensor'},
    'lidar_profiles': {'small': {'n_beams': 16, 'azimuth_step': 2.0, 'elevation_range': [-25.0, 3.0]}},
    'encoders': [
        {'name': 'lidar', 'type': 'pointnet', 'space': 'bev', 'pose': 'ego'},
        {'name': 'cameras', 'type': 'raycast', 'space': 'vol', 'pose': 'ego', 'cameras': ['front', 'left']},
    ],
    'backbone': {'space': 'bev', 'pose': 'ego', 'mode': 'concat', 'subnetwork': 'identity'},
    'heads': [
        {'name': 'detection', 'space': 'bev', 'pose': 'ego'},
        {'name': 'ahead', 'space': 'ahead', 'pose': 'ego'},
    ],
    'pointnet': {'hidden': 8, 'embed': 4, 'seed': 0},
    'raycast': {'reduction': 'mean', 'sampling': 'nearest',
                'featurizer': {'type': 'random', 'channels': 4, 'stride': 2, 'seed': 0}},
    'stereo': {},
    'valid_objects': {'threshold': 0.5, 'eps': 0.5, 'spacing': 0.2},
    'occupancy': {'threshold': 0.5, 'space': 'vol', 'pose': 'ego'},
}

SMALL_STEREO_CONFIG = {
    'seed': 2,
    'cameras': {
        'left': {'focal': [20.0, 20.0], 'principal_point': [16.0, 12.0], 'image_size': [24, 32],
                 'pose': mounted_camera_pose(0.0, [0.0, 0.25, 1.5])},
        'right': {'focal': [20.0, 20.0], 'principal_point': [16.0, 12.0], 'image_size': [24, 32],
                  'pose': mounted_camera_pose(0.0, [0.0, -0.25, 1.5])},
    },
    'spaces': {
        'stereo': {'type': 'cartesian', 'min': [-4.0, 0.0, -1.0], 'max': [4.0, 8.0, 2.0], 'cell': [0.5, 0.5, 0.5]},
    },
    'poses': {'grid': {'euler_xyz_deg': [0.0, 0.0, -90.0]}, 'lidar_sensor': {'translation': [0.0, 0.0, 1.8]}},
    'scene': {'boxes': 2, 'ground_z': 0.0, 'region': {'x': [4.0, 8.0], 'y': [-3.0, 3.0]}},
    'lidar': {'profile': 'small', 'sensor_pose': 'lidar_sensor'},
    'lidar_profiles': {'small': {'n_beams': 8, 'azimuth_step': 4.0}},
    'encoders': [
        {'name': 'stereo', 'type': 'stereo-cv', 'space': 'stereo', 'pose': 'grid', 'left': 'left', 'right': 'right'},
    ],
    'backbone': {'space': 'stereo', 'pose': 'grid', 'mode': 'concat', 'subnetwork': 'identity'},
    'heads': [{'name': 'detection', 'space': 'stereo', 'pose': 'grid'}],
    'raycast': {'featurizer': {'type': 'random', 'channels': 4, 'stride': 2, 'seed': 0}},
    'stereo': {'planes': {'near': 2.0, 'far': 8.0, 'count': 6}, 'mode': 'correlation'},
    'occupancy': {},
}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config_dict():
    return copy.deepcopy(SMALL_CONFIG)


@pytest.fixture
def small_config():
    return parse_config(copy.deepcopy(SMALL_CONFIG))


@pytest.fixture
def stereo_config():
    return parse_config(copy.deepcopy(SMALL_STEREO_CONFIG))


@pytest.fixture
def unit_space():
    """dims (Z, X, Y) = (3, 4, 5) with 1 m cells starting at the origin"""
    return CartesianSpace((0.0, 0.0, 0.0), (4.0, 5.0, 3.0), (1.0, 1.0, 1.0))


@pytest.fixture
def random_grid(rng, unit_space):
    return Grid(rng.standard_normal((1, 2) + unit_space.dims), unit_space, Pose.identity())


@pytest.fixture
def stored_grid(random_grid):
    """random_grid in the float32 storage type"""
    return random_grid.astype(np.float32)


@pytest.fixture
def forward_camera():
    """Camera frame coincides with the reference frame (looks along +z)"""
    return CameraModel(focal=(50.0, 50.0), principal_point=(32.0, 24.0), image_size=(48, 64))
