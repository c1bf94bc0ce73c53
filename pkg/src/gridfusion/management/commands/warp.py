import numpy as np

from gridfusion.grid import read_grid, write_grid
from gridfusion.management.base import GridFusionCommand
from gridfusion.spacewarp import space_warp_chain


class Command(GridFusionCommand):
    help = "Resample an FGRD grid into a configured space and pose."

    def add_arguments(self, parser):
        parser.add_argument("--input", required=True, help="Source FGRD file")
        parser.add_argument("--space", required=True, help="Target space name")
        parser.add_argument("--pose", help="Target pose name (identity if omitted)")
        parser.add_argument("--via", action="append", default=[],
                            help="Intermediate pose name; repeat to chain frames")
        parser.add_argument("--out", required=True, help="Output FGRD file")

    def handle(self, *args, **options):
        config = self.load_config(options)
        source = read_grid(options["input"])
        target = (config.space(options["space"]), config.pose(options["pose"]))
        intermediates = [(None, config.pose(name)) for name in options["via"]]
        warped = space_warp_chain(source, intermediates, target)
        warped = warped.astype(np.float32)
        write_grid(warped, options["out"])
        self.stdout.write(self.style.SUCCESS(
            f"Warped {source.shape} -> {warped.shape} into space {options['space']}"
        ))
