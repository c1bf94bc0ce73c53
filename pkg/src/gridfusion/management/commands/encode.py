import numpy as np

from gridfusion.errors import ConfigError
from gridfusion.grid import write_grid
from gridfusion.images import make_featurizer
from gridfusion.management.base import GridFusionCommand
from gridfusion.pipeline import SceneInputs, run_encoder, stereo_planes
from gridfusion.stereo import cost_volume


class Command(GridFusionCommand):
    help = "Run one configured encoder on a scene directory and write its grid."

    def add_arguments(self, parser):
        parser.add_argument("kind", choices=["raycast", "pointnet", "stereo-cv"], help="Encoder type")
        parser.add_argument("--scene", help="Scene directory with images/ and lidar.bin")
        parser.add_argument("--images", help="Directory of <camera>.png or <camera>.f32 images")
        parser.add_argument("--input", help="pointnet: point cloud in the LiDAR sensor frame")
        parser.add_argument("--left", help="stereo-cv: left image file")
        parser.add_argument("--right", help="stereo-cv: right image file")
        parser.add_argument("--encoder", help="Encoder name when the config has several of this type")
        parser.add_argument("--frustum", action="store_true",
                            help="stereo-cv: write the cost volume in the camera frustum")
        parser.add_argument("--out", required=True, help="Output FGRD file")

    def handle(self, *args, **options):
        config = self.load_config(options)
        candidates = [e for e in config.encoders if e.kind == options["kind"]]
        if options["encoder"]:
            candidates = [e for e in candidates if e.name == options["encoder"]]
        if not candidates:
            raise ConfigError(f"config has no {options['kind']} encoder {options['encoder'] or ''}".strip())
        encoder = candidates[0]
        image_files = {}
        if options["left"]:
            image_files[encoder.options.get("left")] = options["left"]
        if options["right"]:
            image_files[encoder.options.get("right")] = options["right"]
        inputs = SceneInputs(options["scene"], config, options["images"], options["input"], image_files)
        if options["frustum"] and encoder.kind == "stereo-cv":
            grid = self.frustum_volume(encoder, config, inputs)
        else:
            grid = run_encoder(encoder, config, inputs)
        grid = grid.astype(np.float32)
        write_grid(grid, options["out"])
        self.stdout.write(self.style.SUCCESS(
            f"Encoder {encoder.name} ({encoder.kind}) wrote grid {grid.shape} to {options['out']}"
        ))

    def frustum_volume(self, encoder, config, inputs):
        section = config.section("stereo")
        featurizer = make_featurizer(config.section("raycast").get("featurizer"))
        left_name, right_name = encoder.options["left"], encoder.options["right"]
        left = featurizer(inputs.image(left_name), config.camera(left_name))
        right = featurizer(inputs.image(right_name), config.camera(right_name))
        return cost_volume(left, right, stereo_planes(section), mode=section.get("mode", "correlation"))
