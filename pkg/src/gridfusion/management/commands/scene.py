from gridfusion.management.base import GridFusionCommand
from gridfusion.scene import generate_scene


class Command(GridFusionCommand):
    help = "Generate a seeded synthetic scene: box layout, camera renders and LiDAR scan."

    def add_arguments(self, parser):
        parser.add_argument("action", choices=["gen"], help="Scene action")
        parser.add_argument("--out", required=True, help="Directory to write the scene into")

    def handle(self, *args, **options):
        config = self.load_config(options)
        manifest = generate_scene(config, options["out"])
        self.stdout.write(self.style.SUCCESS(
            f"Scene with {manifest['boxes']} boxes and {manifest['points']} LiDAR points "
            f"written to {options['out']}"
        ))
