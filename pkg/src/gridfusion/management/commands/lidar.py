import dataclasses
import json

from gridfusion.errors import ConfigError
from gridfusion.lidar_sim import degrade, median_points_per_object, profile_from_dict, synth_scan
from gridfusion.management.base import GridFusionCommand
from gridfusion.pointcloud import read_point_cloud, write_point_cloud
from gridfusion.scene import load_scene, random_scene


class Command(GridFusionCommand):
    help = "Synthesize a LiDAR scan of a scene, or degrade a scan to a sparser profile."

    def add_arguments(self, parser):
        parser.add_argument("action", choices=["synth", "degrade"], help="LiDAR action")
        parser.add_argument("--scene", help="scene.json or scene directory (synth); random scene if omitted")
        parser.add_argument("--profile", default=None, help="Profile to scan with (synth)")
        parser.add_argument("--input", help="Point cloud to degrade")
        parser.add_argument("--from", dest="source", default="hd", help="Profile of the input cloud")
        parser.add_argument("--to", dest="target", default="ld", help="Profile to degrade to")
        parser.add_argument("--out", required=True, help="Output point cloud file")

    def handle(self, *args, **options):
        if options["action"] == "synth":
            self.synth(options)
        else:
            self.degrade(options)

    def synth(self, options):
        config = self.load_config(options)
        section = config.section("lidar")
        profile = config.profile(options["profile"] or section.get("profile", "hd"))
        if options["scene"]:
            scene = load_scene(options["scene"])
        else:
            scene_section = config.section("scene")
            scene = random_scene(config.seed, int(scene_section.get("boxes", 8)),
                                 float(scene_section.get("ground_z", 0.0)), scene_section.get("region"))
        cloud = synth_scan(scene, profile, config.pose(section.get("sensor_pose")))
        write_point_cloud(cloud, options["out"])
        summary = {
            "points": len(cloud),
            "max_points": profile.max_points,
            "median_points_per_object": median_points_per_object(cloud, scene.boxes),
        }
        self.stdout.write(json.dumps(summary))
        self.stdout.write(self.style.SUCCESS(f"Wrote {len(cloud)} points to {options['out']}"))

    def degrade(self, options):
        if not options["input"]:
            raise ConfigError("lidar degrade needs --input")
        lookup = profile_from_dict
        if options["config"] or options["preset"]:
            lookup = self.load_config(options).profile
        source = lookup(options["source"])
        target = lookup(options["target"])
        if options["seed"] is not None:
            target = dataclasses.replace(target, seed=options["seed"])
        cloud = read_point_cloud(options["input"])
        degraded = degrade(cloud, source, target)
        write_point_cloud(degraded, options["out"])
        self.stdout.write(self.style.SUCCESS(
            f"Degraded {len(cloud)} -> {len(degraded)} points ({options['source']} -> {options['target']})"
        ))
