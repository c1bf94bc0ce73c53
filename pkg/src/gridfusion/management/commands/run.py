from gridfusion.management.base import GridFusionCommand
from gridfusion.pipeline import SUMMARY_FILE, run_pipeline


class Command(GridFusionCommand):
    help = "Run the whole pipeline: scene, encoders, backbone and heads."

    def add_arguments(self, parser):
        parser.add_argument("--scene", help="Existing scene directory (generated from the seed if omitted)")
        parser.add_argument("--out", required=True, help="Run output directory")

    def handle(self, *args, **options):
        config = self.load_config(options)
        record = run_pipeline(config, options["out"], options["scene"], options["preset"])
        for stage in record.stages:
            shape = f" {list(stage.shape)}" if stage.shape else ""
            self.stdout.write(f"  {stage.name:<24} {stage.status:<10} {stage.duration_ms:9.1f} ms{shape}")
        self.stdout.write(self.style.SUCCESS(
            f"Run finished with {len(record.stages)} stages; summary in {options['out']}/{SUMMARY_FILE}"
        ))
