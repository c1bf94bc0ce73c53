"""End-to-end run: scene -> encoders -> backbone -> heads, one FGRD file per grid.

Output layout::

    scene/              generated inputs (unless an existing scene dir is given)
    encoders/<name>.fgrd
    fused.fgrd
    heads/<name>.fgrd
    occupancy_gt.fgrd
    summary.json        stage records with shapes, checksums and paths relative to the run dir
    timings.json        the same records with timestamps and durations

summary.json depends only on the config and the inputs, so two runs with the
same seed write identical files.
"""
import json
import logging
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputError
from .fusion import Backbone, Head, occupancy_ground_truth
from .geometry import inverse_depth_planes
from .grid import write_grid
from .images import make_featurizer, read_image
from .pointcloud import read_point_cloud
from .pointnet import PointNetEncoder, PointNetWeights
from .raycast import raycast
from .records import RunRecord
from .scene import IMAGE_DIR, generate_scene, load_scan
from .stereo import cost_volume, frustum_to_cartesian

logger = logging.getLogger(__name__)

SUMMARY_FILE = 'summary.json'
TIMINGS_FILE = 'timings.json'
IMAGE_SUFFIXES = ('.png', '.f32')


@contextmanager
def _stage(record, name):
    stage = record.add(name)
    stage.start()
    try:
        yield stage
    except Exception as exc:
        stage.fail(exc)
        logger.error("Stage %s failed: %s", name, exc)
        raise
    if stage.is_running():
        stage.finish()
    logger.info("Stage %s completed in %.1f ms", name, stage.duration_ms)


def _store(stage, grid, path, out_dir):
    """Write ``grid`` as float32 FGRD and return the grid that was stored."""
    stored = grid.astype(np.float32)
    write_grid(stored, path)
    stage.finish(stored, path.relative_to(out_dir))
    return stored


class SceneInputs:
    """Lazy access to camera images and the LiDAR scan of a scene.

    Inputs default to the layout of a generated scene directory; an image
    directory, a point cloud file or per-camera image files override it.
    """

    def __init__(self, scene_dir, config, image_dir=None, cloud_path=None, image_files=None):
        self.scene_dir = Path(scene_dir) if scene_dir is not None else None
        self.config = config
        self.image_dir = Path(image_dir) if image_dir is not None else None
        self.cloud_path = Path(cloud_path) if cloud_path is not None else None
        self.image_files = dict(image_files or {})
        self._images = {}
        self._cloud = None

    def _image_path(self, camera_name):
        if camera_name in self.image_files:
            return Path(self.image_files[camera_name])
        directory = self.image_dir
        if directory is None:
            if self.scene_dir is None:
                raise InputError(f"no image source for camera {camera_name!r}")
            directory = self.scene_dir / IMAGE_DIR
        for suffix in IMAGE_SUFFIXES:
            candidate = directory / f'{camera_name}{suffix}'
            if candidate.exists():
                return candidate
        raise InputError(f"no image for camera {camera_name!r} in {directory}")

    def image(self, camera_name):
        if camera_name not in self._images:
            self.config.camera(camera_name)
            self._images[camera_name] = read_image(self._image_path(camera_name))
        return self._images[camera_name]

    @property
    def cloud(self):
        if self._cloud is None:
            if self.cloud_path is not None:
                sensor_pose = self.config.pose(self.config.section('lidar').get('sensor_pose'))
                self._cloud = read_point_cloud(self.cloud_path, sensor_pose)
            elif self.scene_dir is not None:
                self._cloud = load_scan(self.scene_dir, self.config)
            else:
                raise InputError("no point cloud input given")
        return self._cloud


def stereo_planes(section):
    planes = section.get('planes')
    if planes is None:
        raise ConfigError("stereo encoder needs stereo.planes")
    if isinstance(planes, dict):
        return inverse_depth_planes(float(planes['near']), float(planes['far']), int(planes['count']))
    return tuple(float(d) for d in planes)


def run_encoder(encoder, config, inputs):
    """Evaluate one configured encoder into its own (space, pose)."""
    space = config.space(encoder.space)
    pose = config.pose(encoder.pose)
    if encoder.kind == 'pointnet':
        section = config.section('pointnet')
        weights = PointNetWeights.initialize(
            seed=int(section.get('seed', 0)),
            hidden=int(section.get('hidden', 32)),
            embed=int(section.get('embed', 64)),
        )
        return PointNetEncoder(weights, space, pose)(inputs.cloud)
    if encoder.kind == 'raycast':
        section = config.section('raycast')
        featurizer = make_featurizer(section.get('featurizer'))
        names = encoder.options.get('cameras') or sorted(config.cameras)
        features = [featurizer(inputs.image(n), config.camera(n)) for n in names]
        return raycast(
            features, space, pose,
            reduction=section.get('reduction', 'mean'),
            sampling=section.get('sampling', 'nearest'),
        )
    if encoder.kind == 'stereo-cv':
        section = config.section('stereo')
        featurizer = make_featurizer(config.section('raycast').get('featurizer'))
        try:
            left_name, right_name = encoder.options['left'], encoder.options['right']
        except KeyError as exc:
            raise ConfigError(f"stereo encoder {encoder.name!r} needs {exc}") from exc
        left = featurizer(inputs.image(left_name), config.camera(left_name))
        right = featurizer(inputs.image(right_name), config.camera(right_name))
        cv = cost_volume(left, right, stereo_planes(section), mode=section.get('mode', 'correlation'))
        return frustum_to_cartesian(cv, space, pose)
    raise ConfigError(f"unknown encoder type {encoder.kind!r}")


def run_pipeline(config, out_dir, scene_dir=None, preset=None):
    """Run every configured stage and write its grids under ``out_dir``.

    Every grid is stored as float32 and the stored grid feeds the next stage.
    Returns the RunRecord; summary.json and timings.json are written even
    when a stage fails.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not config.encoders:
        raise ConfigError("config defines no encoders")
    if not config.backbone:
        raise ConfigError("config defines no backbone")
    record = RunRecord(preset=preset, seed=config.seed)
    try:
        if scene_dir is None:
            scene_dir = out_dir / 'scene'
            with _stage(record, 'scene') as stage:
                generate_scene(config, scene_dir)
                stage.finish(path=scene_dir.relative_to(out_dir))
        inputs = SceneInputs(scene_dir, config)

        grids = []
        for encoder in config.encoders:
            with _stage(record, f'encoder:{encoder.name}') as stage:
                grid = run_encoder(encoder, config, inputs)
                grid = _store(stage, grid, out_dir / 'encoders' / f'{encoder.name}.fgrd', out_dir)
            grids.append(grid)

        space, pose = config.backbone_frame()
        backbone = Backbone(
            space, pose,
            mode=config.backbone.get('mode', 'concat'),
            subnetwork=config.backbone.get('subnetwork', 'identity'),
        )
        with _stage(record, 'backbone') as stage:
            fused = _store(stage, backbone(grids), out_dir / 'fused.fgrd', out_dir)

        for head_config in config.heads:
            head = Head(head_config.name, config.space(head_config.space), config.pose(head_config.pose))
            with _stage(record, f'head:{head.name}') as stage:
                _store(stage, head(fused), out_dir / 'heads' / f'{head.name}.fgrd', out_dir)

        occupancy = config.section('occupancy')
        if occupancy.get('space'):
            with _stage(record, 'occupancy_gt') as stage:
                truth = occupancy_ground_truth(
                    inputs.cloud, config.space(occupancy['space']), config.pose(occupancy.get('pose'))
                )
                _store(stage, truth, out_dir / 'occupancy_gt.fgrd', out_dir)
    finally:
        (out_dir / SUMMARY_FILE).write_text(json.dumps(record.to_dict(), indent=2))
        (out_dir / TIMINGS_FILE).write_text(json.dumps(record.to_dict(timings=True), indent=2))
    return record
