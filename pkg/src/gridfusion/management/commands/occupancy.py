import json

import numpy as np

from gridfusion.errors import ConfigError
from gridfusion.fusion import occupancy_ground_truth, occupancy_metrics
from gridfusion.grid import read_grid, write_grid
from gridfusion.management.base import GridFusionCommand
from gridfusion.pointcloud import read_point_cloud


class Command(GridFusionCommand):
    help = "Build occupancy ground truth from a scan, or score a predicted occupancy grid."

    def add_arguments(self, parser):
        parser.add_argument("action", choices=["gt", "eval"], help="Occupancy action")
        parser.add_argument("--input", help="gt: point cloud in the LiDAR sensor frame")
        parser.add_argument("--space", help="gt: target space name (occupancy section if omitted)")
        parser.add_argument("--pose", help="gt: target pose name")
        parser.add_argument("--prediction", help="eval: predicted occupancy FGRD")
        parser.add_argument("--truth", help="eval: ground-truth occupancy FGRD")
        parser.add_argument("--threshold", type=float, default=None, help="eval: occupancy threshold")
        parser.add_argument("--out", help="Output file (FGRD for gt, JSON for eval)")

    def handle(self, *args, **options):
        if options["action"] == "gt":
            self.ground_truth(options)
        else:
            self.evaluate(options)

    def ground_truth(self, options):
        config = self.load_config(options)
        section = config.section("occupancy")
        if not options["input"] or not options["out"]:
            raise ConfigError("occupancy gt needs --input and --out")
        space_name = options["space"] or section.get("space")
        if not space_name:
            raise ConfigError("occupancy gt needs --space or an occupancy.space entry")
        pose = config.pose(options["pose"] or section.get("pose"))
        sensor_pose = config.pose(config.section("lidar").get("sensor_pose"))
        cloud = read_point_cloud(options["input"], sensor_pose)
        truth = occupancy_ground_truth(cloud, config.space(space_name), pose)
        truth = truth.astype(np.float32)
        write_grid(truth, options["out"])
        occupied = int(truth.data.sum())
        self.stdout.write(self.style.SUCCESS(f"{occupied} occupied voxels written to {options['out']}"))

    def evaluate(self, options):
        if not options["prediction"] or not options["truth"]:
            raise ConfigError("occupancy eval needs --prediction and --truth")
        threshold = options["threshold"]
        if threshold is None:
            threshold = 0.5
            if options["config"] or options["preset"]:
                threshold = float(self.load_config(options).section("occupancy").get("threshold", 0.5))
        metrics = occupancy_metrics(read_grid(options["prediction"]), read_grid(options["truth"]), threshold)
        report = json.dumps(metrics.to_dict(), indent=2)
        if options["out"]:
            with open(options["out"], "w") as handle:
                handle.write(report)
        self.stdout.write(report)
