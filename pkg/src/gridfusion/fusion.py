"""Backbone and head plumbing, plus occupancy ground truth and metrics."""
import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, ShapeMismatchError
from .grid import Grid, concat_channels
from .pointnet import point_voxel_indices
from .spacewarp import space_warp

logger = logging.getLogger(__name__)

FUSE_CONCAT = 'concat'
FUSE_SUM = 'sum'
FUSION_MODES = (FUSE_CONCAT, FUSE_SUM)

_SUBNETWORKS = {}


def register_subnetwork(name):
    """Register a Grid -> Grid callable as a backbone sub-network."""
    def decorator(func):
        _SUBNETWORKS[name] = func
        return func
    return decorator


def get_subnetwork(name):
    try:
        return _SUBNETWORKS[name]
    except KeyError:
        raise ConfigError(
            f"unknown backbone sub-network {name!r}; registered: {sorted(_SUBNETWORKS)}"
        ) from None


def registered_subnetworks():
    return sorted(_SUBNETWORKS)


@register_subnetwork('identity')
def identity_subnetwork(grid):
    return grid


def to_space(grid, space, pose):
    """The grid itself when already in (space, pose), otherwise one SpaceWarp."""
    if grid.space == space and grid.pose == pose:
        return grid
    return space_warp(grid, space, pose)


def fuse(grids, common, mode=FUSE_CONCAT):
    """Warp every grid into the common (space, pose) and combine them."""
    if not grids:
        raise ContractError("fuse needs at least one grid")
    if mode not in FUSION_MODES:
        raise ContractError(f"unknown fusion mode {mode!r}")
    space, pose = common
    warped = [to_space(g, space, pose) for g in grids]
    if mode == FUSE_SUM:
        channels = {g.channels for g in warped}
        if len(channels) != 1:
            raise ContractError(f"sum fusion needs equal channel counts, got {[g.channels for g in warped]}")
        data = warped[0].data.copy()
        for g in warped[1:]:
            data = data + g.data
        fused = Grid(data, space, pose)
    else:
        fused = warped[0]
        for g in warped[1:]:
            fused = concat_channels(fused, g)
    logger.debug("Fused %d grids (%s) into %s", len(grids), mode, fused.shape)
    return fused


def head_adapt(backbone_out, head_space):
    """Move the backbone output into a head's (space, pose); no resampling when they match."""
    space, pose = head_space
    return to_space(backbone_out, space, pose)


@dataclass(frozen=True)
class Backbone:
    """Common space, fusion operator and user-defined sub-network"""

    space: object
    pose: object
    mode: str = FUSE_CONCAT
    subnetwork: str = 'identity'

    def __call__(self, grids):
        fused = fuse(grids, (self.space, self.pose), self.mode)
        out = get_subnetwork(self.subnetwork)(fused)
        if out.space != self.space:
            raise ContractError(f"sub-network {self.subnetwork!r} left the common space")
        if out.pose != self.pose:
            raise ContractError(f"sub-network {self.subnetwork!r} moved the grid off the common pose")
        return out


@dataclass(frozen=True)
class Head:
    """Grid consumer parameterized by the space it operates in"""

    name: str
    space: object
    pose: object

    def __call__(self, grid):
        return head_adapt(grid, (self.space, self.pose))


def occupancy_ground_truth(cloud, space, pose):
    """C=1 grid: 1.0 in every voxel holding at least one point, else 0.0."""
    cells, in_bounds = point_voxel_indices(space, cloud.points_in(pose))
    occupancy = np.zeros(tuple(space.dims))
    occupancy[tuple(cells[in_bounds].T)] = 1.0
    return Grid(occupancy[np.newaxis, np.newaxis], space, pose)


@dataclass(frozen=True)
class OccupancyMetrics:
    precision: float
    recall: float
    iou: float
    true_positives: int
    false_positives: int
    false_negatives: int

    def to_dict(self):
        return {
            'precision': self.precision,
            'recall': self.recall,
            'iou': self.iou,
            'true_positives': self.true_positives,
            'false_positives': self.false_positives,
            'false_negatives': self.false_negatives,
        }


def _ratio(numerator, denominator):
    return numerator / denominator if denominator else 1.0


def occupancy_metrics(prediction, truth, threshold=0.5):
    """Precision, recall and IoU of ``prediction >= threshold`` against a binary truth grid.

    A ratio with an empty denominator counts as 1.0 (nothing to get wrong).
    """
    if prediction.shape != truth.shape:
        raise ShapeMismatchError(f"prediction {prediction.shape} vs truth {truth.shape}")
    if prediction.space != truth.space:
        raise ShapeMismatchError("prediction and truth live in different spaces")
    predicted = np.asarray(prediction.data) >= threshold
    actual = np.asarray(truth.data) > 0.5
    tp = int(np.sum(predicted & actual))
    fp = int(np.sum(predicted & ~actual))
    fn = int(np.sum(~predicted & actual))
    return OccupancyMetrics(
        precision=_ratio(tp, tp + fp),
        recall=_ratio(tp, tp + fn),
        iou=_ratio(tp, tp + fp + fn),
        true_positives=tp,
        false_positives=fp,
        false_negatives=fn,
    )
