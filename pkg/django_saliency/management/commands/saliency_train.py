from django_saliency.learners import METHODS

from ._base import SaliencyCommand


class Command(SaliencyCommand):
    help = "Train a classifier on the training sample matrix."
    stage = "train"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--method", choices=METHODS, default="svm")

    def run_stage(self, pipeline, options):
        return pipeline.train(options["method"], force=options["force"])
