"""Seeded synthetic scenes: random boxes on a ground plane, camera renders and LiDAR scans.

A generated scene directory holds::

    scene.json          boxes and ground height
    images/<camera>.png flat-shaded render per configured camera
    lidar.bin           point cloud in the LiDAR sensor frame
    manifest.json       file list with sha256 checksums
"""
import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from .errors import InputError
from .images import write_image
from .lidar_sim import BoxAnnotation, Scene, cast_rays, degrade, synth_scan
from .pointcloud import read_point_cloud, write_point_cloud

logger = logging.getLogger(__name__)

SKY_COLOR = np.array([0.55, 0.70, 0.90])
GROUND_COLOR = np.array([0.40, 0.38, 0.34])
BOX_PALETTE = np.array([
    [0.80, 0.20, 0.20],
    [0.20, 0.60, 0.25],
    [0.20, 0.35, 0.80],
    [0.85, 0.70, 0.15],
    [0.60, 0.25, 0.70],
    [0.15, 0.70, 0.70],
])
DEFAULT_REGION = {'x': [-40.0, 40.0], 'y': [-40.0, 40.0]}
EGO_CLEARANCE = (5.0, 3.0)  # keep boxes off the sensor rig, meters in x and y

SCENE_FILE = 'scene.json'
LIDAR_FILE = 'lidar.bin'
MANIFEST_FILE = 'manifest.json'
IMAGE_DIR = 'images'


def random_scene(seed, n_boxes=8, ground_z=0.0, region=None):
    """Car-sized boxes resting on the ground at seeded positions and headings."""
    region = region or DEFAULT_REGION
    rng = np.random.default_rng(seed)
    boxes = []
    while len(boxes) < n_boxes:
        x = rng.uniform(*region['x'])
        y = rng.uniform(*region['y'])
        length = rng.uniform(3.8, 4.6)
        width = rng.uniform(1.7, 1.9)
        height = rng.uniform(1.4, 1.6)
        yaw = rng.uniform(-np.pi, np.pi)
        if abs(x) < EGO_CLEARANCE[0] and abs(y) < EGO_CLEARANCE[1]:
            continue
        boxes.append(BoxAnnotation(
            center=(x, y, ground_z + height / 2.0),
            size=(length, width, height),
            yaw=float(yaw),
            id=f'box{len(boxes)}',
        ))
    return Scene(tuple(boxes), ground_z)


def _checker(points, scale):
    cells = np.floor(points * scale).astype(np.int64).sum(axis=-1)
    return np.where(cells % 2 == 0, 1.0, 0.7)


def render_camera(scene, camera):
    """(3, rows, cols) RGB render of ``scene`` seen through ``camera``.

    Surfaces are flat colored with a checker texture so that stereo has
    something to match.
    """
    rows, cols = camera.image_size
    (fx, fy), (cx, cy) = camera.focal, camera.principal_point
    r, c = np.mgrid[0:rows, 0:cols].astype(np.float64)
    rays = np.stack([(c - cx) / fx, (r - cy) / fy, np.ones_like(c)], axis=-1)
    rays /= np.linalg.norm(rays, axis=-1, keepdims=True)
    directions = rays @ camera.pose.rotation.T
    origin = camera.pose.translation
    distance, label = cast_rays(scene, origin, directions)
    hit = np.where(np.isfinite(distance), distance, 0.0)[..., None]
    points = origin + directions * hit

    image = np.broadcast_to(SKY_COLOR, (rows, cols, 3)).copy()
    ground = label == -2
    image[ground] = GROUND_COLOR * _checker(points[ground][:, :2], 1.0)[:, None]
    for i in range(len(scene.boxes)):
        on_box = label == i
        color = BOX_PALETTE[i % len(BOX_PALETTE)]
        image[on_box] = color * _checker(points[on_box], 2.0)[:, None]
    return np.moveaxis(image, -1, 0)


def lidar_scan(config, scene):
    """Scan ``scene`` with the configured profile, degrading it if the config asks to."""
    section = config.section('lidar')
    profile = config.profile(section.get('profile', 'hd'))
    sensor_pose = config.pose(section.get('sensor_pose'))
    cloud = synth_scan(scene, profile, sensor_pose)
    target = section.get('degrade_to')
    if target:
        cloud = degrade(cloud, profile, config.profile(target))
    return cloud


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def generate_scene(config, out_dir):
    """Write a scene, its camera renders and its LiDAR scan; returns the manifest."""
    out_dir = Path(out_dir)
    (out_dir / IMAGE_DIR).mkdir(parents=True, exist_ok=True)
    section = config.section('scene')
    scene = random_scene(
        config.seed,
        int(section.get('boxes', 8)),
        float(section.get('ground_z', 0.0)),
        section.get('region'),
    )
    (out_dir / SCENE_FILE).write_text(json.dumps(scene.to_dict(), indent=2, sort_keys=True))

    files = [SCENE_FILE]
    for name, camera in sorted(config.cameras.items()):
        relative = f'{IMAGE_DIR}/{name}.png'
        write_image(out_dir / relative, render_camera(scene, camera))
        files.append(relative)
        logger.debug("Rendered camera %s", name)

    cloud = lidar_scan(config, scene)
    write_point_cloud(cloud, out_dir / LIDAR_FILE)
    files.append(LIDAR_FILE)

    manifest = {
        'seed': config.seed,
        'boxes': len(scene.boxes),
        'points': len(cloud),
        'files': {f: _sha256(out_dir / f) for f in files},
    }
    (out_dir / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True))
    logger.info("Generated scene with %d boxes and %d points in %s", len(scene.boxes), len(cloud), out_dir)
    return manifest


def load_scene(path):
    """Scene from a scene.json file or a generated scene directory."""
    path = Path(path)
    if path.is_dir():
        path = path / SCENE_FILE
    if not path.exists():
        raise InputError(f"scene file not found: {path}")
    try:
        return Scene.from_dict(json.loads(path.read_text()))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"invalid scene file {path}: {exc}") from exc


def load_scan(scene_dir, config):
    """LiDAR scan of a generated scene, placed at the configured sensor pose."""
    sensor_pose = config.pose(config.section('lidar').get('sensor_pose'))
    return read_point_cloud(Path(scene_dir) / LIDAR_FILE, sensor_pose)
