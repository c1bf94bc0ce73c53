"""Central finite-difference checks of the analytic vector-Jacobian products.

Each check builds a small random problem, takes the scalar loss
``<op(x), g>`` for a fixed random upstream ``g`` and compares the
analytic gradient against centered differences over every entry of x.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import CameraModel, CartesianSpace, Pose
from .grid import Grid
from .pointcloud import PointCloud
from .pointnet import PointNetWeights, pointnet_encode, pointnet_vjp, voxelize
from .raycast import SAMPLE_BILINEAR, ImageFeatureMap, project_and_gather, raycast, raycast_vjp
from .spacewarp import space_warp, space_warp_vjp

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-4
DEFAULT_EPS = 1e-6
CHECKS = ('spacewarp', 'spacewarp_identity', 'raycast', 'pointnet')


@dataclass(frozen=True)
class GradcheckResult:
    op: str
    entries: int
    max_abs_error: float
    max_rel_error: float
    tolerance: float

    @property
    def passed(self):
        return self.max_rel_error <= self.tolerance

    def to_dict(self):
        return {
            'op': self.op,
            'entries': self.entries,
            'max_abs_error': self.max_abs_error,
            'max_rel_error': self.max_rel_error,
            'tolerance': self.tolerance,
            'passed': self.passed,
        }


def finite_difference(loss, x0, eps=DEFAULT_EPS):
    """Centered-difference gradient of ``loss`` at x0 (any shape)."""
    x0 = np.asarray(x0, dtype=np.float64)
    grad = np.zeros_like(x0)
    flat = grad.reshape(-1)
    for j in range(x0.size):
        x = x0.copy().reshape(-1)
        x[j] = x0.reshape(-1)[j] + eps
        f_plus = loss(x.reshape(x0.shape))
        x[j] = x0.reshape(-1)[j] - eps
        f_minus = loss(x.reshape(x0.shape))
        flat[j] = (f_plus - f_minus) / (2 * eps)
    return grad


def compare(op, numeric, analytic, tolerance=DEFAULT_TOLERANCE):
    """Max relative error, scaled by the largest gradient magnitude."""
    numeric = np.asarray(numeric, dtype=np.float64).reshape(-1)
    analytic = np.asarray(analytic, dtype=np.float64).reshape(-1)
    diff = float(np.abs(numeric - analytic).max()) if numeric.size else 0.0
    scale = max(float(np.abs(numeric).max(initial=0.0)), float(np.abs(analytic).max(initial=0.0)), 1e-12)
    result = GradcheckResult(op, int(numeric.size), diff, diff / scale, tolerance)
    log = logger.info if result.passed else logger.error
    log("gradcheck %s: %d entries, max rel error %.3e (tolerance %.0e)", op, result.entries,
        result.max_rel_error, tolerance)
    return result


def _small_pose(rng, max_angle=10.0, max_shift=0.3):
    return Pose.from_euler(rng.uniform(-max_angle, max_angle, 3), rng.uniform(-max_shift, max_shift, 3))


def check_spacewarp(rng, identity=False, vjp=space_warp_vjp, eps=DEFAULT_EPS, tolerance=DEFAULT_TOLERANCE):
    source_space = CartesianSpace((0.0, 0.0, 0.0), (4.0, 5.0, 3.0), (1.0, 1.0, 1.0))
    source_pose = Pose.identity()
    if identity:
        target_space, target_pose = source_space, source_pose
    else:
        target_space = CartesianSpace((0.3, -0.2, 0.1), (3.3, 3.8, 2.1), (1.0, 1.0, 1.0))
        target_pose = _small_pose(rng)
    x0 = rng.standard_normal((1, 2) + tuple(source_space.dims))
    upstream = Grid(rng.standard_normal((1, 2) + tuple(target_space.dims)), target_space, target_pose)

    def loss(x):
        out = space_warp(Grid(x, source_space, source_pose), target_space, target_pose)
        return float(np.sum(out.data * upstream.data))

    analytic = vjp(Grid(x0, source_space, source_pose), (target_space, target_pose), upstream).data
    name = 'spacewarp_identity' if identity else 'spacewarp'
    return compare(name, finite_difference(loss, x0, eps), analytic, tolerance)


def _gradcheck_cameras():
    base = dict(focal=(6.0, 6.0), principal_point=(4.5, 3.5), image_size=(8, 10))
    return [
        CameraModel(pose=Pose.identity(), **base),
        CameraModel(pose=Pose.from_euler([0.0, 4.0, 0.0], [0.3, 0.0, 0.0]), **base),
    ]


def check_raycast(rng, vjp=raycast_vjp, sampling=SAMPLE_BILINEAR, eps=DEFAULT_EPS,
                  tolerance=DEFAULT_TOLERANCE):
    space = CartesianSpace((-1.0, -1.0, 3.0), (1.0, 1.0, 5.0), (0.5, 0.5, 1.0))
    pose = Pose.identity()
    cameras = _gradcheck_cameras()
    x0 = rng.standard_normal((len(cameras), 2) + tuple(cameras[0].image_size))

    def features_of(x):
        return [ImageFeatureMap(x[k], cam) for k, cam in enumerate(cameras)]

    out_shape = raycast(features_of(x0), space, pose, sampling=sampling).shape
    upstream = Grid(rng.standard_normal(out_shape), space, pose)

    def loss(x):
        return float(np.sum(raycast(features_of(x), space, pose, sampling=sampling).data * upstream.data))

    table, _ = project_and_gather(features_of(x0), space, pose, sampling)
    analytic = np.stack(vjp(upstream, table, features_of(x0), sampling=sampling))
    return compare('raycast', finite_difference(loss, x0, eps), analytic, tolerance)


def _gradcheck_points(rng, count=20):
    xyz = rng.uniform([0.05, 0.05, 0.05], [1.95, 1.95, 0.95], (count, 3))
    return PointCloud.from_points(xyz, rng.uniform(0.0, 1.0, count))


def check_pointnet(rng, vjp=pointnet_vjp, eps=DEFAULT_EPS, tolerance=DEFAULT_TOLERANCE):
    space = CartesianSpace((0.0, 0.0, 0.0), (2.0, 2.0, 1.0), (1.0, 1.0, 1.0))
    buckets = voxelize(_gradcheck_points(rng), space, Pose.identity())
    weights = PointNetWeights.initialize(seed=int(rng.integers(2 ** 31)), hidden=6, embed=5)
    names = ('w1', 'b1', 'w2', 'b2')
    shapes = [getattr(weights, n).shape for n in names]
    sizes = [int(np.prod(s)) for s in shapes]
    x0 = np.concatenate([getattr(weights, n).reshape(-1) for n in names])
    upstream = Grid(rng.standard_normal((1, weights.embed) + tuple(space.dims)), space, Pose.identity())

    def unpack(x):
        parts = np.split(x, np.cumsum(sizes)[:-1])
        return PointNetWeights(**{n: p.reshape(s) for n, p, s in zip(names, parts, shapes)})

    def loss(x):
        return float(np.sum(pointnet_encode(buckets, unpack(x)).data * upstream.data))

    grads = vjp(upstream, buckets, weights)
    analytic = np.concatenate([getattr(grads, n).reshape(-1) for n in names])
    return compare('pointnet', finite_difference(loss, x0, eps), analytic, tolerance)


def run_gradcheck(seed=0, tolerance=DEFAULT_TOLERANCE, eps=DEFAULT_EPS, checks=CHECKS, vjps=None):
    """Run the named checks; ``vjps`` replaces an op's analytic VJP by name."""
    vjps = vjps or {}
    rng = np.random.default_rng(seed)
    results = []
    for name in checks:
        if name == 'spacewarp':
            results.append(check_spacewarp(rng, vjp=vjps.get('spacewarp', space_warp_vjp),
                                           eps=eps, tolerance=tolerance))
        elif name == 'spacewarp_identity':
            results.append(check_spacewarp(rng, identity=True, vjp=vjps.get('spacewarp', space_warp_vjp),
                                           eps=eps, tolerance=tolerance))
        elif name == 'raycast':
            results.append(check_raycast(rng, vjp=vjps.get('raycast', raycast_vjp), eps=eps, tolerance=tolerance))
        elif name == 'pointnet':
            results.append(check_pointnet(rng, vjp=vjps.get('pointnet', pointnet_vjp), eps=eps,
                                          tolerance=tolerance))
        else:
            raise ConfigError(f"unknown gradcheck {name!r}; expected one of {CHECKS}")
    return results
