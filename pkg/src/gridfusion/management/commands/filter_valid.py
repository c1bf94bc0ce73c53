import json

from gridfusion.errors import ConfigError
from gridfusion.lidar_sim import EPS_OCCLUSION, FACE_SPACING, valid_objects
from gridfusion.management.base import GridFusionCommand
from gridfusion.pointcloud import read_point_cloud
from gridfusion.scene import load_scene


class Command(GridFusionCommand):
    help = "Mark annotated boxes valid when enough of their surface is visible to the LiDAR."

    def add_arguments(self, parser):
        parser.add_argument("--input", required=True, help="Point cloud in the LiDAR sensor frame")
        parser.add_argument("--scene", required=True, help="scene.json or scene directory with the boxes")
        parser.add_argument("--profile", help="Profile the cloud was captured with (config default)")
        parser.add_argument("--threshold", type=float, default=None, help="Minimum visible fraction")
        parser.add_argument("--out", help="JSON report file")

    def handle(self, *args, **options):
        config = self.load_config(options)
        section = config.section("valid_objects")
        lidar = config.section("lidar")
        profile_name = options["profile"] or lidar.get("degrade_to") or lidar.get("profile", "hd")
        threshold = options["threshold"] if options["threshold"] is not None else section.get("threshold")
        if threshold is None:
            raise ConfigError("valid-object filtering needs --threshold or valid_objects.threshold")
        cloud = read_point_cloud(options["input"], config.pose(lidar.get("sensor_pose")))
        scene = load_scene(options["scene"])
        results = valid_objects(
            cloud, scene.boxes, config.profile(profile_name), float(threshold),
            eps=float(section.get("eps", EPS_OCCLUSION)),
            spacing=float(section.get("spacing", FACE_SPACING)),
        )
        report = json.dumps({"threshold": float(threshold), "objects": [r.to_dict() for r in results]}, indent=2)
        if options["out"]:
            with open(options["out"], "w") as handle:
                handle.write(report)
        self.stdout.write(report)
        valid = sum(r.is_valid for r in results)
        self.stdout.write(self.style.SUCCESS(f"{valid} of {len(results)} objects valid"))
