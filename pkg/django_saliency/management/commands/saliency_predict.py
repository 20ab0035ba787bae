from django_saliency.learners import METHODS

from ._base import SaliencyCommand


class Command(SaliencyCommand):
    help = "Predict a saliency map for every image with a trained model."
    stage = "predict"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--method", choices=METHODS, default="svm")
        parser.add_argument("--stride", type=int, help="Score every n-th pixel and interpolate.")
        parser.add_argument("--image", action="append", dest="images", help="Only this image id (repeatable).")
        parser.add_argument("--dump-chan", action="store_true", help="Also write float maps in CHAN format.")

    def config_overrides(self, options):
        return {"predict_stride": options.get("stride")}

    def run_stage(self, pipeline, options):
        return pipeline.predict(
            options["method"],
            force=options["force"],
            dump_chan=options["dump_chan"],
            image_ids=options.get("images"),
        )
