from ._base import SaliencyCommand


class Command(SaliencyCommand):
    help = "Compute the 34-channel feature stack of every image in the corpus."
    stage = "extract"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--dump-keypoints",
            action="store_true",
            help="Also write keypoints.csv with every detected keypoint.",
        )

    def run_stage(self, pipeline, options):
        return pipeline.extract(force=options["force"], dump_keypoints=options["dump_keypoints"])
