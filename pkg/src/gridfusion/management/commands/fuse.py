import numpy as np

from gridfusion.fusion import FUSION_MODES, Backbone
from gridfusion.grid import read_grid, write_grid
from gridfusion.management.base import GridFusionCommand


class Command(GridFusionCommand):
    help = "Fuse FGRD grids in the backbone's common space."

    def add_arguments(self, parser):
        parser.add_argument("inputs", nargs="+", help="FGRD files to fuse")
        parser.add_argument("--mode", choices=FUSION_MODES, help="Fusion operator (config default)")
        parser.add_argument("--space", help="Common space name (backbone space if omitted)")
        parser.add_argument("--pose", help="Common pose name")
        parser.add_argument("--out", required=True, help="Output FGRD file")

    def handle(self, *args, **options):
        config = self.load_config(options)
        if options["space"]:
            space, pose = config.space(options["space"]), config.pose(options["pose"])
        else:
            space, pose = config.backbone_frame()
        backbone = Backbone(
            space, pose,
            mode=options["mode"] or config.backbone.get("mode", "concat"),
            subnetwork=config.backbone.get("subnetwork", "identity"),
        )
        fused = backbone([read_grid(path) for path in options["inputs"]])
        fused = fused.astype(np.float32)
        write_grid(fused, options["out"])
        self.stdout.write(self.style.SUCCESS(f"Fused {len(options['inputs'])} grids into {fused.shape}"))
