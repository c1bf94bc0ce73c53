"""Synthetic LiDAR scans, density degradation and box visibility.

Rays are indexed by (beam, azimuth). Beam ``i`` of ``n`` points at
elevation ``lo + i * (hi - lo) / (n - 1)`` and azimuth cell ``a`` at
``a * azimuth_step`` degrees, counter-clockwise from the sensor's X axis.
Points are returned in the sensor frame.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError
from .geometry import Pose
from .pointcloud import PointCloud

logger = logging.getLogger(__name__)

EPS_OCCLUSION = 0.5  # meters
FACE_SPACING = 0.2  # meters
BOX_INTENSITY = 0.8
GROUND_INTENSITY = 0.3


@dataclass(frozen=True)
class DetectionTable:
    """Piecewise-constant keep probability over range buckets.

    ``probabilities[i]`` applies to ranges in [edges[i-1], edges[i]), with
    open-ended first and last buckets.
    """

    edges: tuple = ()
    probabilities: tuple = (1.0,)

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        probabilities = tuple(float(p) for p in self.probabilities)
        if len(probabilities) != len(edges) + 1:
            raise ContractError("detection table needs one more probability than edges")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ContractError("detection table edges must be strictly increasing")
        if any(not 0.0 <= p <= 1.0 for p in probabilities):
            raise ContractError(f"detection probabilities must lie in [0, 1], got {probabilities}")
        object.__setattr__(self, 'edges', edges)
        object.__setattr__(self, 'probabilities', probabilities)

    @classmethod
    def constant(cls, probability):
        return cls((), (probability,))

    def __call__(self, ranges):
        return np.asarray(self.probabilities)[np.digitize(ranges, self.edges)]


@dataclass(frozen=True)
class LidarProfile:
    n_beams: int
    azimuth_step: float  # degrees
    elevation_range: tuple = (-25.0, 3.0)  # degrees
    detection_probability: DetectionTable = field(default_factory=DetectionTable)
    seed: int = 0
    max_range: float = 120.0

    def __post_init__(self):
        if int(self.n_beams) < 1:
            raise ContractError(f"n_beams must be >= 1, got {self.n_beams}")
        cells = 360.0 / self.azimuth_step
        if self.azimuth_step <= 0 or abs(cells - round(cells)) > 1e-9 * cells:
            raise ContractError(f"azimuth step {self.azimuth_step} does not divide 360")
        lo, hi = self.elevation_range
        if hi < lo or (self.n_beams > 1 and hi == lo):
            raise ContractError(f"elevation range {self.elevation_range} cannot hold {self.n_beams} beams")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ContractError("seed must be an unsigned 64-bit integer")

    @property
    def n_azimuth(self):
        return int(round(360.0 / self.azimuth_step))

    @property
    def max_points(self):
        return self.n_beams * self.n_azimuth

    def beam_elevations(self):
        lo, hi = self.elevation_range
        if self.n_beams == 1:
            return np.array([float(lo)])
        return np.linspace(lo, hi, self.n_beams)

    def ray_directions(self):
        """Unit ray directions of shape (n_beams, n_azimuth, 3) in the sensor frame."""
        elevation = np.radians(self.beam_elevations())[:, None]
        azimuth = np.radians(np.arange(self.n_azimuth) * self.azimuth_step)[None, :]
        return np.stack(np.broadcast_arrays(
            np.cos(elevation) * np.cos(azimuth),
            np.cos(elevation) * np.sin(azimuth),
            np.sin(elevation),
        ), axis=-1)

    def cell_of(self, points):
        """Nearest (beam, azimuth) cell of sensor-frame points and a covered mask."""
        points = np.asarray(points, dtype=np.float64)
        azimuth = np.degrees(np.arctan2(points[..., 1], points[..., 0]))
        a = np.floor(azimuth / self.azimuth_step + 0.5).astype(np.int64) % self.n_azimuth
        horizontal = np.hypot(points[..., 0], points[..., 1])
        elevation = np.degrees(np.arctan2(points[..., 2], horizontal))
        lo, hi = self.elevation_range
        if self.n_beams == 1:
            b = np.zeros(a.shape, dtype=np.int64)
            covered = np.abs(elevation - lo) <= 0.5
        else:
            spacing = (hi - lo) / (self.n_beams - 1)
            b = np.floor((elevation - lo) / spacing + 0.5).astype(np.int64)
            covered = (b >= 0) & (b < self.n_beams)
            b = np.clip(b, 0, self.n_beams - 1)
        return b, a, covered


HD_PROFILE = LidarProfile(n_beams=64, azimuth_step=0.2)
LD_PROFILE = LidarProfile(n_beams=13, azimuth_step=2.0)
PROFILES = {'hd': HD_PROFILE, 'ld': LD_PROFILE}


def profile_from_dict(data):
    if isinstance(data, str):
        try:
            return PROFILES[data]
        except KeyError:
            raise ConfigError(f"unknown LiDAR profile {data!r}") from None
    try:
        table = data.get('detection_probability', {})
        return LidarProfile(
            n_beams=int(data['n_beams']),
            azimuth_step=float(data['azimuth_step']),
            elevation_range=tuple(data.get('elevation_range', (-25.0, 3.0))),
            detection_probability=DetectionTable(
                table.get('edges', ()), table.get('probabilities', (1.0,))
            ),
            seed=int(data.get('seed', 0)),
            max_range=float(data.get('max_range', 120.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid LiDAR profile {data!r}: {exc}") from exc


@dataclass(frozen=True)
class BoxAnnotation:
    """Yawed box in the reference frame"""

    center: tuple
    size: tuple  # (length along heading, width, height)
    yaw: float = 0.0
    id: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'center', tuple(float(v) for v in self.center))
        object.__setattr__(self, 'size', tuple(float(v) for v in self.size))
        if min(self.size) <= 0:
            raise ContractError(f"box {self.id!r} must have positive size, got {self.size}")

    @property
    def pose(self):
        """Box frame (center, heading) to reference."""
        return Pose.from_euler([0.0, 0.0, math.degrees(self.yaw)], self.center)

    def to_dict(self):
        return {'center': list(self.center), 'size': list(self.size), 'yaw': self.yaw, 'id': self.id}

    @classmethod
    def from_dict(cls, data):
        return cls(data['center'], data['size'], float(data.get('yaw', 0.0)), str(data.get('id', '')))


@dataclass(frozen=True)
class Scene:
    """Boxes over an optional ground plane at height ``ground_z``"""

    boxes: tuple = ()
    ground_z: float = None

    def to_dict(self):
        return {'boxes': [b.to_dict() for b in self.boxes], 'ground_z': self.ground_z}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(BoxAnnotation.from_dict(b) for b in data.get('boxes', [])), data.get('ground_z'))


def ray_box_distances(origins, directions, box):
    """Entry distance of each ray into ``box`` (inf on a miss), slab test."""
    to_box = box.pose.inverse()
    o = to_box.apply(origins)
    d = np.asarray(directions, dtype=np.float64) @ to_box.rotation.T
    o, d = np.broadcast_arrays(o, d)
    half = np.asarray(box.size) / 2.0
    with np.errstate(divide='ignore', invalid='ignore'):
        inv = 1.0 / d
        t1 = (-half - o) * inv
        t2 = (half - o) * inv
    t_near = np.nanmax(np.minimum(t1, t2), axis=-1)
    t_far = np.nanmin(np.maximum(t1, t2), axis=-1)
    hit = (t_far >= np.maximum(t_near, 0.0)) & np.isfinite(t_near)
    entry = np.where(t_near > 0.0, t_near, t_far)
    return np.where(hit & (entry > 0.0), entry, np.inf)


def cast_rays(scene, origins, directions):
    """First hit of each ray: distance and hit label (-1 miss, -2 ground, else box index)."""
    origins = np.asarray(origins, dtype=np.float64)
    directions = np.asarray(directions, dtype=np.float64)
    shape = np.broadcast_shapes(origins.shape, directions.shape)[:-1]
    best = np.full(shape, np.inf)
    label = np.full(shape, -1, dtype=np.int64)
    if scene.ground_z is not None:
        dz = np.broadcast_to(directions[..., 2], shape)
        with np.errstate(divide='ignore', invalid='ignore'):
            t = (scene.ground_z - np.broadcast_to(origins[..., 2], shape)) / dz
        t = np.where((dz < 0) & (t > 0), t, np.inf)
        closer = t < best
        best = np.where(closer, t, best)
        label = np.where(closer, -2, label)
    for i, box in enumerate(scene.boxes):
        t = ray_box_distances(origins, directions, box)
        closer = t < best
        best = np.where(closer, t, best)
        label = np.where(closer, i, label)
    return best, label


def synth_scan(scene, profile, sensor_pose):
    """One ray per (beam, azimuth) cell; the first hit becomes a return."""
    directions_sensor = profile.ray_directions()
    directions = directions_sensor @ sensor_pose.rotation.T
    origin = sensor_pose.translation
    distance, label = cast_rays(scene, origin, directions)
    hit = np.isfinite(distance) & (distance <= profile.max_range)
    beam, azimuth = np.nonzero(hit)
    xyz = directions_sensor[beam, azimuth] * distance[beam, azimuth][:, None]
    intensity = np.where(label[beam, azimuth] == -2, GROUND_INTENSITY, BOX_INTENSITY)
    logger.info("Synthesized %d returns from %d rays", beam.size, profile.max_points)
    return PointCloud(xyz, intensity, beam, azimuth, sensor_pose)


def beam_subset(n_from, n_to):
    """Evenly spread beam indices kept when going from n_from to n_to beams."""
    if n_to == 1:
        return np.array([0])
    return np.floor(np.arange(n_to) * (n_from - 1) / (n_to - 1) + 0.5).astype(np.int64)


def azimuth_factor(source, target):
    ratio = target.azimuth_step / source.azimuth_step
    factor = int(round(ratio))
    if factor < 1 or abs(ratio - factor) > 1e-9 * ratio:
        raise ContractError(
            f"azimuth step {target.azimuth_step} is not a multiple of {source.azimuth_step}"
        )
    return factor


def keep_uniforms(seed, count):
    """Counter-based uniforms: value i depends only on (seed, i)."""
    generator = np.random.Generator(np.random.Philox(key=int(seed)))
    return generator.random(count)


def degrade(cloud, source, target):
    """Beam, azimuth and probability-of-detection subsampling.

    Surviving points keep their source beam and azimuth indices.
    """
    if target.n_beams > source.n_beams:
        raise ContractError(f"cannot go from {source.n_beams} to {target.n_beams} beams")
    factor = azimuth_factor(source, target)
    kept_beams = beam_subset(source.n_beams, target.n_beams)
    keep = np.isin(cloud.beam, kept_beams) & (cloud.azimuth % factor == 0)
    probability = target.detection_probability(cloud.ranges())
    keep &= keep_uniforms(target.seed, len(cloud)) < probability
    logger.info("Degraded %d -> %d points", len(cloud), int(keep.sum()))
    return cloud.take(keep)


def range_image(cloud, profile):
    """(beams x azimuth) image of the nearest return per cell; empty cells are +inf.

    Points are binned by direction, so a degraded cloud that still carries
    its source indices lands in the cells of ``profile``.
    """
    image = np.full((profile.n_beams, profile.n_azimuth), np.inf)
    beam, azimuth, covered = profile.cell_of(cloud.xyz)
    np.minimum.at(image, (beam[covered], azimuth[covered]), cloud.ranges()[covered])
    return image


def box_face_samples(box, viewpoint, spacing=FACE_SPACING):
    """Cell-centered samples on the faces of ``box`` facing ``viewpoint`` (reference frame)."""
    half = np.asarray(box.size) / 2.0
    to_ref = box.pose
    local_view = to_ref.inverse().apply(viewpoint)
    samples = []
    for axis in range(3):
        for sign in (-1.0, 1.0):
            if sign * (local_view[axis] - sign * half[axis]) <= 0:
                continue
            u_axis, v_axis = [a for a in range(3) if a != axis]
            nu = max(1, math.ceil(box.size[u_axis] / spacing - 1e-9))
            nv = max(1, math.ceil(box.size[v_axis] / spacing - 1e-9))
            us = (np.arange(nu) + 0.5) / nu * box.size[u_axis] - half[u_axis]
            vs = (np.arange(nv) + 0.5) / nv * box.size[v_axis] - half[v_axis]
            gu, gv = np.meshgrid(us, vs, indexing='ij')
            face = np.zeros((gu.size, 3))
            face[:, axis] = sign * half[axis]
            face[:, u_axis] = gu.ravel()
            face[:, v_axis] = gv.ravel()
            samples.append(face)
    if not samples:
        return np.zeros((0, 3))
    return to_ref.apply(np.concatenate(samples))


@dataclass(frozen=True)
class Visibility:
    box_id: str
    visible_fraction: float
    is_valid: bool
    samples: int

    def to_dict(self):
        return {
            'id': self.box_id,
            'visible_fraction': self.visible_fraction,
            'is_valid': self.is_valid,
            'samples': self.samples,
        }


def valid_objects(cloud, boxes, profile, threshold, eps=EPS_OCCLUSION, spacing=FACE_SPACING):
    """Visible fraction of each box judged against the cloud's range image.

    Visibility is evaluated from the LiDAR origin. A face sample is visible
    when its cell is empty or its range is within ``eps`` of the cell's
    nearest return. Samples outside the vertical field of view are ignored.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ContractError(f"threshold must lie in [0, 1], got {threshold}")
    image = range_image(cloud, profile)
    origin = cloud.pose.translation
    to_sensor = cloud.pose.inverse()
    results = []
    for box in boxes:
        local = to_sensor.apply(box_face_samples(box, origin, spacing))
        beam, azimuth, covered = profile.cell_of(local)
        distance = np.sqrt(np.sum(local ** 2, axis=1))
        cell_range = image[beam, azimuth]
        visible = (distance <= cell_range + eps)[covered]
        total = int(covered.sum())
        fraction = float(visible.sum()) / total if total else 0.0
        results.append(Visibility(box.id, fraction, fraction >= threshold, total))
    return results


def count_points_in_boxes(cloud, boxes):
    """Number of cloud points enclosed by each box."""
    world = cloud.pose.apply(cloud.xyz)
    counts = []
    for box in boxes:
        local = box.pose.inverse().apply(world)
        inside = np.all(np.abs(local) <= np.asarray(box.size) / 2.0 + 1e-9, axis=1)
        counts.append(int(inside.sum()))
    return counts


def median_points_per_object(cloud, boxes):
    counts = count_points_in_boxes(cloud, boxes)
    return float(np.median(counts)) if counts else 0.0
