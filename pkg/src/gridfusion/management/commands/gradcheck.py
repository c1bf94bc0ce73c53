import json

from gridfusion.errors import NumericalError
from gridfusion.gradcheck import CHECKS, DEFAULT_EPS, DEFAULT_TOLERANCE, run_gradcheck
from gridfusion.management.base import GridFusionCommand


class Command(GridFusionCommand):
    help = "Compare every analytic VJP against central finite differences."
    uses_config = False

    def add_arguments(self, parser):
        parser.add_argument("--tolerance", type=float, default=DEFAULT_TOLERANCE, help="Max relative error")
        parser.add_argument("--eps", type=float, default=DEFAULT_EPS, help="Finite-difference step")
        parser.add_argument("--check", action="append", choices=CHECKS, help="Run only these checks")

    def handle(self, *args, **options):
        seed = options["seed"] if options["seed"] is not None else 0
        results = run_gradcheck(seed, options["tolerance"], options["eps"], options["check"] or CHECKS)
        for result in results:
            line = json.dumps(result.to_dict())
            self.stdout.write(self.style.SUCCESS(line) if result.passed else self.style.ERROR(line))
        failed = [r.op for r in results if not r.passed]
        if failed:
            raise NumericalError(f"gradient check failed for {', '.join(failed)}")
        self.stdout.write(self.style.SUCCESS(f"All {len(results)} gradient checks passed"))
